//! Line-delimited simulation logs, the latency side channel and plot tables.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{parse_trace, ReactTrace};
use crate::colregs::{DecisionCommand, EncounterAssessment, EncounterType, RiskLevel};
use crate::dynamics::ShipState;
use crate::kinematics::{mps_to_knots, unproject, wrap_2pi};

use super::config::{Event, ScenarioConfig};

pub const LOG_SCHEMA: &str = "navagent.simlog/1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("record {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipRecord {
    pub id: String,
    pub state: ShipState,
}

/// Summary of one target assessment at decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentRecord {
    pub target: String,
    pub encounter: EncounterType,
    pub risk: RiskLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
    /// m
    pub range: f64,
    /// m
    pub dcpa: f64,
    /// s
    pub tcpa: f64,
}

impl From<&EncounterAssessment> for AssessmentRecord {
    fn from(a: &EncounterAssessment) -> Self {
        Self {
            target: a.target_id.clone(),
            encounter: a.encounter,
            risk: a.risk,
            priority: a.priority,
            range: a.cpa.range,
            dcpa: a.cpa.dcpa,
            tcpa: a.cpa.tcpa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionTrigger {
    Interval,
    Event,
    RiskEscalation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub t: f64,
    pub trigger: DecisionTrigger,
    /// SHA-256 of the scene text, hex
    pub scene_digest: String,
    /// in priority order
    pub assessments: Vec<AssessmentRecord>,
    pub trace: ReactTrace,
}

impl DecisionRecord {
    pub fn applied(&self) -> &DecisionCommand {
        &self.trace.final_decision
    }

    /// Top-priority assessment that obliges action, if any.
    pub fn driving_assessment(&self) -> Option<&AssessmentRecord> {
        self.assessments
            .iter()
            .filter(|a| a.risk.requires_action())
            .min_by_key(|a| a.priority.unwrap_or(u32::MAX))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionWire {
    t: f64,
    trigger: DecisionTrigger,
    scene_digest: String,
    assessments: Vec<AssessmentRecord>,
    /// transcript text
    trace: String,
}

impl Serialize for DecisionRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DecisionWire {
            t: self.t,
            trigger: self.trigger,
            scene_digest: self.scene_digest.clone(),
            assessments: self.assessments.clone(),
            trace: crate::agent::serialize_trace(&self.trace),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DecisionRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = DecisionWire::deserialize(d)?;
        let trace = parse_trace(&w.trace).map_err(serde::de::Error::custom)?;
        Ok(Self {
            t: w.t,
            trigger: w.trigger,
            scene_digest: w.scene_digest,
            assessments: w.assessments,
            trace,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Duration,
    GoalReached,
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        schema: String,
        config: ScenarioConfig,
    },
    Step {
        t: f64,
        ships: Vec<ShipRecord>,
    },
    Event {
        t: f64,
        event: Event,
    },
    Decision(DecisionRecord),
    End {
        t: f64,
        reason: EndReason,
    },
}

/// Wall-clock timings of one decision; never part of the deterministic log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyRecord {
    pub t: f64,
    /// time inside the decision core, s
    pub core_s: f64,
    /// everything else in the decision cycle, s
    pub pipeline_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    /// header, steps, events, decisions and end, in time order
    pub records: Vec<LogRecord>,
    pub latencies: Vec<LatencyRecord>,
}

impl SimulationLog {
    pub fn config(&self) -> &ScenarioConfig {
        match self.records.first() {
            Some(LogRecord::Header { config, .. }) => config,
            _ => panic!("log without header"),
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = (f64, &[ShipRecord])> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Step { t, ships } => Some((*t, ships.as_slice())),
            _ => None,
        })
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, &Event)> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Event { t, event } => Some((*t, event)),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn end(&self) -> Option<(f64, EndReason)> {
        match self.records.last() {
            Some(LogRecord::End { t, reason }) => Some((*t, *reason)),
            _ => None,
        }
    }

    /// The deterministic log text, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn latency_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.latencies {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses log text, checking record order and structure.
    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        Self::read(text.as_bytes())
    }

    fn read(reader: impl BufRead) -> Result<Self, LogError> {
        let schema = |line: usize, message: String| LogError::Schema { line, message };
        let mut records = Vec::new();
        let mut last_t = f64::NEG_INFINITY;
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| schema(n, e.to_string()))?;
            if records.iter().any(|r| matches!(r, LogRecord::End { .. })) {
                return Err(schema(n, "record after end".into()));
            }
            let rec: LogRecord =
                serde_json::from_str(&line).map_err(|e| schema(n, e.to_string()))?;
            match &rec {
                LogRecord::Header { schema: s, config } => {
                    if n != 1 {
                        return Err(schema(n, "header must be the first record".into()));
                    }
                    if s != LOG_SCHEMA {
                        return Err(schema(n, format!("unsupported schema `{s}`")));
                    }
                    config.validate().map_err(|e| schema(n, format!("config: {e}")))?;
                }
                _ if n == 1 => return Err(schema(n, "missing header".into())),
                LogRecord::Step { t, .. } | LogRecord::Event { t, .. } | LogRecord::End { t, .. } => {
                    if *t < last_t {
                        return Err(schema(n, format!("time {t} goes backwards")));
                    }
                    last_t = *t;
                }
                LogRecord::Decision(d) => {
                    if d.t < last_t {
                        return Err(schema(n, format!("time {} goes backwards", d.t)));
                    }
                    last_t = d.t;
                }
            }
            records.push(rec);
        }
        if !matches!(records.last(), Some(LogRecord::End { .. })) {
            return Err(schema(records.len().max(1), "log is truncated: no end record".into()));
        }
        Ok(Self {
            records,
            latencies: Vec::new(),
        })
    }

    /// Side-channel path for a log path: `run.jsonl` → `run.latency.jsonl`.
    pub fn latency_path(log_path: &Path) -> PathBuf {
        let stem = log_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        log_path.with_file_name(format!("{stem}.latency.jsonl"))
    }

    /// Writes the log and its latency side channel.
    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        std::fs::write(path, self.to_jsonl()).map_err(io_err(path))?;
        let lat = Self::latency_path(path);
        std::fs::write(&lat, self.latency_jsonl()).map_err(io_err(&lat))
    }

    /// Loads a log; the latency side channel is read when present.
    pub fn load(path: &Path) -> Result<Self, LogError> {
        let f = std::fs::File::open(path).map_err(io_err(path))?;
        let mut log = Self::read(std::io::BufReader::new(f))?;
        let lat = Self::latency_path(path);
        if let Ok(text) = std::fs::read_to_string(&lat) {
            for (i, line) in text.lines().enumerate() {
                let r: LatencyRecord = serde_json::from_str(line).map_err(|e| LogError::Schema {
                    line: i + 1,
                    message: format!("{}: {e}", lat.display()),
                })?;
                log.latencies.push(r);
            }
        }
        Ok(log)
    }

    /// Flat track table: one row per ship per step.
    pub fn write_track_csv(&self, out: impl Write) -> Result<(), LogError> {
        let origin = self.config().origin;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "time_s", "ship", "x_m", "y_m", "lon", "lat", "heading_deg", "speed_kn", "rudder_deg",
        ])?;
        for (t, ships) in self.steps() {
            for s in ships {
                let g = unproject(origin, s.state.pos);
                w.write_record([
                    format!("{t}"),
                    s.id.clone(),
                    format!("{:.3}", s.state.pos.x),
                    format!("{:.3}", s.state.pos.y),
                    format!("{:.6}", g.lon),
                    format!("{:.6}", g.lat),
                    format!("{:.2}", wrap_2pi(s.state.heading).to_degrees()),
                    format!("{:.2}", mps_to_knots(s.state.speed)),
                    format!("{:.2}", s.state.rudder.to_degrees()),
                ])?;
            }
        }
        w.flush().map_err(|e| LogError::Csv(e.into()))?;
        Ok(())
    }

    /// Distance of every ship pair at every step.
    pub fn write_distance_csv(&self, out: impl Write) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "ship_a", "ship_b", "distance_m"])?;
        for (t, ships) in self.steps() {
            for (i, a) in ships.iter().enumerate() {
                for b in &ships[i + 1..] {
                    w.write_record([
                        format!("{t}"),
                        a.id.clone(),
                        b.id.clone(),
                        format!("{:.3}", a.state.pos.distance(&b.state.pos)),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| LogError::Csv(e.into()))?;
        Ok(())
    }
}
