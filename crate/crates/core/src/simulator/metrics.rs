//! Run metrics computed from a log alone, so live and replayed logs agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::TraceStatus;
use crate::colregs::{EncounterType, Maneuver, RiskLevel};
use crate::zones::Zone;

use super::config::Event;
use super::log::{DecisionRecord, LogRecord, SimulationLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: String,
    pub b: String,
    /// m
    pub min_distance: f64,
    /// s
    pub at: f64,
}

/// Whether one risk-driven decision followed the steering rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColregsFlag {
    pub t: f64,
    pub target: String,
    pub encounter: EncounterType,
    pub risk: RiskLevel,
    pub maneuver: Maneuver,
    pub compliant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskDetection {
    pub target: String,
    /// first decision time at which the target obliged action, s
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstAvoidance {
    pub t: f64,
    pub target: String,
    pub encounter: EncounterType,
    pub maneuver: Maneuver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub decisions: usize,
    pub mean_core_s: f64,
    pub max_core_s: f64,
    pub mean_pipeline_s: f64,
    pub max_pipeline_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    /// every ship pair, sorted by ids
    pub min_distances: Vec<PairDistance>,
    /// smallest own-ship to target distance, m
    pub min_own_distance: Option<f64>,
    pub colregs_flags: Vec<ColregsFlag>,
    pub colregs_compliant: bool,
    pub risk_detections: Vec<RiskDetection>,
    pub first_avoidance: Option<FirstAvoidance>,
    pub decisions: usize,
    pub truncated_decisions: usize,
    pub degraded_decisions: usize,
    pub goal_reached: bool,
    pub goal_time: Option<f64>,
    /// entries of the own ship's actual track into active no-go zones
    pub zone_incursions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyStats>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairDistance> {
        self.min_distances
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn detection(&self, target: &str) -> Option<f64> {
        self.risk_detections
            .iter()
            .find(|r| r.target == target)
            .map(|r| r.t)
    }
}

/// Steering-rule check for a decision driven by `encounter` at `risk`.
pub fn maneuver_complies(encounter: EncounterType, risk: RiskLevel, maneuver: Maneuver) -> bool {
    use EncounterType::*;
    use Maneuver::*;
    let critical = risk == RiskLevel::Critical;
    match encounter {
        HeadOn | StarboardCrossingSmall | StarboardCrossingLarge | Overtaking | Clear => {
            matches!(maneuver, StarboardTurn | SlowDown | Stop)
        }
        // a stand-on vessel keeps course until the give-way vessel alone cannot avoid
        // collision, and then must not turn to port for a vessel on her port side
        PortCrossing if critical => maneuver != PortTurn,
        BeingOvertaken if critical => true,
        PortCrossing | BeingOvertaken => maneuver == StandOn,
    }
}

fn flag(d: &DecisionRecord) -> Option<ColregsFlag> {
    let a = d.driving_assessment()?;
    let maneuver = d.applied().maneuver;
    Some(ColregsFlag {
        t: d.t,
        target: a.target.clone(),
        encounter: a.encounter,
        risk: a.risk,
        maneuver,
        compliant: maneuver_complies(a.encounter, a.risk, maneuver),
    })
}

pub fn compute_metrics(log: &SimulationLog) -> Metrics {
    let config = log.config();
    let own_id = config.own_spec().id.clone();
    let goal = config.own_goal();

    let mut pairs: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut goal_time = None;
    let mut zones: BTreeMap<String, Zone> = BTreeMap::new();
    let mut inside: BTreeMap<String, bool> = BTreeMap::new();
    let mut incursions = 0;

    for rec in &log.records {
        match rec {
            LogRecord::Event { event, .. } => match event {
                Event::ZoneAppears { zone, .. } => {
                    zones.insert(zone.id.clone(), zone.clone());
                }
                Event::ZoneClears { id, .. } => {
                    zones.remove(id);
                    inside.remove(id);
                }
                Event::PopUpShip { .. } => {}
            },
            LogRecord::Step { t, ships } => {
                for (i, a) in ships.iter().enumerate() {
                    for b in &ships[i + 1..] {
                        let key = if a.id <= b.id {
                            (a.id.clone(), b.id.clone())
                        } else {
                            (b.id.clone(), a.id.clone())
                        };
                        let d = a.state.pos.distance(&b.state.pos);
                        let e = pairs.entry(key).or_insert((d, *t));
                        if d < e.0 {
                            *e = (d, *t);
                        }
                    }
                }
                if let Some(own) = ships.iter().find(|s| s.id == own_id) {
                    if goal_time.is_none() {
                        if let Some(g) = goal {
                            if own.state.pos.distance(&g) <= config.goal_radius {
                                goal_time = Some(*t);
                            }
                        }
                    }
                    for (id, z) in &zones {
                        let now = z.contains(&own.state.pos);
                        let was = inside.insert(id.clone(), now).unwrap_or(false);
                        if now && !was {
                            incursions += 1;
                        }
                    }
                }
            }
            _ => {}
        }
    }

    let min_distances: Vec<PairDistance> = pairs
        .into_iter()
        .map(|((a, b), (d, t))| PairDistance {
            a,
            b,
            min_distance: d,
            at: t,
        })
        .collect();
    let min_own_distance = min_distances
        .iter()
        .filter(|p| p.a == own_id || p.b == own_id)
        .map(|p| p.min_distance)
        .reduce(f64::min);

    let decisions: Vec<&DecisionRecord> = log.decisions().collect();
    let colregs_flags: Vec<ColregsFlag> = decisions.iter().filter_map(|d| flag(d)).collect();
    let mut risk_detections: Vec<RiskDetection> = Vec::new();
    for d in &decisions {
        for a in d.assessments.iter().filter(|a| a.risk.requires_action()) {
            if !risk_detections.iter().any(|r| r.target == a.target) {
                risk_detections.push(RiskDetection {
                    target: a.target.clone(),
                    t: d.t,
                });
            }
        }
    }
    let first_avoidance = decisions.iter().find_map(|d| {
        let a = d.driving_assessment()?;
        let m = d.applied().maneuver;
        (m != Maneuver::StandOn).then(|| FirstAvoidance {
            t: d.t,
            target: a.target.clone(),
            encounter: a.encounter,
            maneuver: m,
        })
    });
    let count = |s: TraceStatus| decisions.iter().filter(|d| d.trace.status == s).count();

    let latency = (!log.latencies.is_empty()).then(|| {
        let n = log.latencies.len() as f64;
        let core: Vec<f64> = log.latencies.iter().map(|l| l.core_s).collect();
        let pipe: Vec<f64> = log.latencies.iter().map(|l| l.pipeline_s).collect();
        LatencyStats {
            decisions: log.latencies.len(),
            mean_core_s: core.iter().sum::<f64>() / n,
            max_core_s: core.iter().copied().fold(0.0, f64::max),
            mean_pipeline_s: pipe.iter().sum::<f64>() / n,
            max_pipeline_s: pipe.iter().copied().fold(0.0, f64::max),
        }
    });

    Metrics {
        scenario: config.name.clone(),
        min_distances,
        min_own_distance,
        colregs_compliant: colregs_flags.iter().all(|f| f.compliant),
        colregs_flags,
        risk_detections,
        first_avoidance,
        decisions: decisions.len(),
        truncated_decisions: count(TraceStatus::Truncated),
        degraded_decisions: count(TraceStatus::Degraded),
        goal_reached: goal_time.is_some(),
        goal_time,
        zone_incursions: incursions,
        latency,
    }
}
