//! Synthetic instruction-tuning datasets.
//!
//! SETD pairs an unlabeled two-ship scene with its encounter type; SCADD
//! pairs a three-ship prompt with the validated rule-core decision. Every
//! record draws from its own ChaCha stream keyed by `(seed, index)`, so the
//! output does not depend on how generation is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{validate_decision, DecisionContext, ValidatorConfig};
use crate::colregs::{classify, AvoidanceConfig, DecisionCommand, EncounterType, RiskThresholds};
use crate::depiction::{
    build_prompt, depict_unlabeled, Contact, OwnSnapshot, SceneSnapshot, DEFAULT_SYSTEM_PROMPT,
};
use crate::dynamics::{state_from_nav, CourseKeeperGains, ShipModelParams, ShipState};
use crate::kinematics::{knots_to_mps, wrap_360, GeoPosition, LocalPoint, METERS_PER_NM};
use crate::agent::grammar::format_final_answer;

pub const SETD_SCHEMA: &str = "navagent.setd/1";
pub const SCADD_SCHEMA: &str = "navagent.scadd/1";

/// Label source written into every record.
pub const PROVENANCE: &str =
    "synthetic geometry; labels from the deterministic COLREGs rule core, not reviewed by mariners";

/// Frame origin for rendered positions.
pub const DATASET_ORIGIN: GeoPosition = GeoPosition {
    lon: 122.445374,
    lat: 31.257936,
};

/// The four SETD classes, in round-robin order.
pub const SETD_CLASSES: [EncounterType; 4] = [
    EncounterType::HeadOn,
    EncounterType::StarboardCrossingSmall,
    EncounterType::StarboardCrossingLarge,
    EncounterType::PortCrossing,
];

const MAX_ATTEMPTS: usize = 10_000;

pub const SETD_QUESTION: &str = "Classify the encounter between the own ship and Target A as one of: head-on, starboard crossing (small angle), starboard crossing (large angle), port crossing.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("{kind} needs n >= {min}, got {n}")]
    TooFew { kind: &'static str, n: usize, min: usize },
    #[error("per-trajectory count must be at least 1")]
    PerTrajectory,
    #[error("record {index}: no geometry satisfying `{constraint}` after {attempts} attempts")]
    Rejection {
        index: usize,
        constraint: String,
        attempts: usize,
    },
}

/// Sampled navigation state of one ship.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipGeometry {
    /// m east of the origin
    pub x: f64,
    /// m north of the origin
    pub y: f64,
    pub course_deg: f64,
    pub speed_kn: f64,
}

impl ShipGeometry {
    pub fn state(&self) -> ShipState {
        state_from_nav(LocalPoint::new(self.x, self.y), self.course_deg, self.speed_kn)
    }

    fn advanced(&self, t: f64) -> Self {
        let p = self.state().extrapolate(t);
        Self { x: p.x, y: p.y, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetGeometry {
    pub id: String,
    #[serde(flatten)]
    pub ship: ShipGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGeometry {
    pub own: ShipGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<LocalPoint>,
    pub targets: Vec<TargetGeometry>,
}

impl SceneGeometry {
    pub fn snapshot(&self, th: &RiskThresholds) -> SceneSnapshot {
        let own = self.own.state();
        let contacts: Vec<Contact> = self
            .targets
            .iter()
            .map(|t| Contact {
                id: t.id.clone(),
                state: t.ship.state(),
                new_contact: false,
            })
            .collect();
        SceneSnapshot::assemble(
            0.0,
            DATASET_ORIGIN,
            OwnSnapshot {
                state: own,
                goal: self.goal,
                course_order: own.heading,
                speed_order: own.speed,
                cruise_speed: own.speed,
            },
            &contacts,
            Vec::new(),
            th,
        )
        .expect("sampled ships never coincide")
    }

    /// Decision context with default tunables, as used for labeling.
    pub fn context(&self) -> DecisionContext {
        let thresholds = RiskThresholds::default();
        let snapshot = self.snapshot(&thresholds);
        let clear_streak = if snapshot.any_at_risk() { 0 } else { AvoidanceConfig::default().clear_cycles };
        DecisionContext {
            snapshot,
            thresholds,
            avoidance: AvoidanceConfig::default(),
            params: ShipModelParams::default(),
            gains: CourseKeeperGains::default(),
            validator: ValidatorConfig::default(),
            clear_streak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetdRecord {
    pub index: usize,
    pub trajectory: usize,
    /// instant within the trajectory, from 0
    pub instant: usize,
    /// unlabeled scene text
    pub scene: String,
    pub instruction: String,
    pub output: String,
    pub label: EncounterType,
    pub geometry: SceneGeometry,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaddRecord {
    pub index: usize,
    /// system prompt and scene text
    pub instruction: String,
    /// `Thought:` and `Final Answer:` lines
    pub output: String,
    pub geometry: SceneGeometry,
    pub provenance: String,
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub schema: String,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_trajectory: Option<usize>,
    pub provenance: String,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_ship(rng: &mut ChaCha8Rng) -> ShipGeometry {
    ShipGeometry {
        x: 0.0,
        y: 0.0,
        course_deg: rng.random_range(0.0..360.0),
        speed_kn: rng.random_range(6.0..16.0),
    }
}

/// Relative-bearing and course-difference ranges, degrees, to draw from per class.
fn sector(class: EncounterType) -> ((f64, f64), (f64, f64)) {
    match class {
        EncounterType::HeadOn => ((-6.0, 6.0), (174.0, 186.0)),
        EncounterType::StarboardCrossingSmall => ((6.0, 67.5), (0.0, 360.0)),
        EncounterType::StarboardCrossingLarge => ((67.5, 112.5), (0.0, 360.0)),
        EncounterType::PortCrossing => ((247.5, 354.0), (0.0, 360.0)),
        _ => unreachable!("not a SETD class"),
    }
}

fn sample_pair(class: EncounterType, rng: &mut ChaCha8Rng) -> SceneGeometry {
    let own = sample_ship(rng);
    let ((b0, b1), (c0, c1)) = sector(class);
    let beta: f64 = rng.random_range(b0..b1);
    let dc: f64 = rng.random_range(c0..c1);
    let range = rng.random_range(1.0..8.0) * METERS_PER_NM;
    let p = LocalPoint::default().offset((own.course_deg + beta).to_radians(), range);
    let target = ShipGeometry {
        x: p.x,
        y: p.y,
        course_deg: wrap_360(own.course_deg + dc),
        speed_kn: rng.random_range(5.0..20.0),
    };
    SceneGeometry {
        own,
        goal: None,
        targets: vec![TargetGeometry {
            id: "A".into(),
            ship: target,
        }],
    }
}

fn label_of(g: &SceneGeometry) -> Option<EncounterType> {
    classify(&g.own.state(), &g.targets[0].ship.state()).ok()
}

fn setd_record(index: usize, trajectory: usize, instant: usize, g: SceneGeometry) -> Option<SetdRecord> {
    let label = label_of(&g)?;
    let scene = depict_unlabeled(&g.snapshot(&RiskThresholds::default()));
    Some(SetdRecord {
        index,
        trajectory,
        instant,
        instruction: format!("{SETD_QUESTION}\n\n{scene}"),
        output: label.phrase().to_string(),
        scene,
        label,
        geometry: g,
        provenance: PROVENANCE.to_string(),
    })
}

fn setd_trajectory(seed: u64, j: usize, k: usize) -> Result<Vec<(SceneGeometry, EncounterType)>, DatasetError> {
    let class = SETD_CLASSES[j % SETD_CLASSES.len()];
    let mut rng = rng_for(seed, j as u64);
    for _ in 0..MAX_ATTEMPTS {
        let g = sample_pair(class, &mut rng);
        if label_of(&g) != Some(class) {
            continue;
        }
        if k == 1 {
            return Ok(vec![(g, class)]);
        }
        let c = crate::kinematics::cpa(
            (g.own.state().pos, g.own.state().velocity()),
            (g.targets[0].ship.state().pos, g.targets[0].ship.state().velocity()),
        );
        // instants spread over the approach, stopping short of the closest point
        let span = c.tcpa.min(1800.0) * 0.8;
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let t = span * i as f64 / k as f64;
            let gi = SceneGeometry {
                own: g.own.advanced(t),
                goal: None,
                targets: vec![TargetGeometry {
                    id: "A".into(),
                    ship: g.targets[0].ship.advanced(t),
                }],
            };
            let Some(l) = label_of(&gi) else { break };
            out.push((gi, l));
        }
        if out.len() == k {
            return Ok(out);
        }
    }
    Err(DatasetError::Rejection {
        index: j,
        constraint: format!("classify = {}", class.as_str()),
        attempts: MAX_ATTEMPTS,
    })
}

/// `n` encounter-classification records, one per sampled instant, classes in round robin.
pub fn gen_setd(n: usize, seed: u64) -> Result<Vec<SetdRecord>, DatasetError> {
    gen_setd_with(n, seed, 1)
}

/// As [`gen_setd`], emitting `per_trajectory` instants along each sampled encounter.
/// Labels are re-derived at every instant, so only `per_trajectory = 1`
/// guarantees exact class balance.
pub fn gen_setd_with(n: usize, seed: u64, per_trajectory: usize) -> Result<Vec<SetdRecord>, DatasetError> {
    if n < 4 {
        return Err(DatasetError::TooFew { kind: "setd", n, min: 4 });
    }
    if per_trajectory == 0 {
        return Err(DatasetError::PerTrajectory);
    }
    let trajectories = n.div_ceil(per_trajectory);
    let groups: Vec<Vec<(SceneGeometry, EncounterType)>> = (0..trajectories)
        .into_par_iter()
        .map(|j| setd_trajectory(seed, j, per_trajectory))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(n);
    for (j, group) in groups.into_iter().enumerate() {
        for (i, (g, _)) in group.into_iter().enumerate() {
            if out.len() == n {
                break;
            }
            let index = out.len();
            out.push(setd_record(index, j, i, g).expect("label checked at sampling"));
        }
    }
    Ok(out)
}

/// Target whose straight track passes `miss` m abeam of the own ship `tc` s from now.
fn converging_target(own: &ShipGeometry, rng: &mut ChaCha8Rng) -> ShipGeometry {
    let tc: f64 = rng.random_range(300.0..1200.0);
    let miss: f64 = rng.random_range(-800.0..800.0);
    let course: f64 = rng.random_range(0.0..360.0);
    let speed: f64 = rng.random_range(5.0..18.0);
    let meet = own.state().extrapolate(tc);
    let abeam = meet.offset((own.course_deg + 90.0).to_radians(), miss);
    let back = abeam.offset(course.to_radians(), -knots_to_mps(speed) * tc);
    ShipGeometry {
        x: back.x,
        y: back.y,
        course_deg: course,
        speed_kn: speed,
    }
}

fn sample_three_ship(rng: &mut ChaCha8Rng) -> SceneGeometry {
    let own = sample_ship(rng);
    let goal = LocalPoint::default().offset(own.course_deg.to_radians(), 6.0 * METERS_PER_NM);
    let a = converging_target(&own, rng);
    let b = if rng.random_bool(0.5) {
        converging_target(&own, rng)
    } else {
        let beta: f64 = rng.random_range(0.0..360.0);
        let p = LocalPoint::default().offset(
            (own.course_deg + beta).to_radians(),
            rng.random_range(1.0..7.0) * METERS_PER_NM,
        );
        ShipGeometry {
            x: p.x,
            y: p.y,
            course_deg: rng.random_range(0.0..360.0),
            speed_kn: rng.random_range(5.0..18.0),
        }
    };
    SceneGeometry {
        own,
        goal: Some(goal),
        targets: vec![
            TargetGeometry { id: "A".into(), ship: a },
            TargetGeometry { id: "B".into(), ship: b },
        ],
    }
}

fn acceptable(g: &SceneGeometry, th: &RiskThresholds) -> bool {
    let own = g.own.state();
    let separated = g.targets.iter().all(|t| t.ship.state().pos.distance(&own.pos) >= th.r_critical)
        && g.targets[0]
            .ship
            .state()
            .pos
            .distance(&g.targets[1].ship.state().pos)
            >= th.d_safe;
    separated
        && g.snapshot(th)
            .targets
            .iter()
            .any(|t| t.assessment.risk.requires_action())
}

/// The validated rule-core decision for a scene.
pub fn label_decision(g: &SceneGeometry) -> DecisionCommand {
    let ctx = g.context();
    validate_decision(&ctx.rule_proposal(), &ctx).decision
}

fn scadd_record(seed: u64, index: usize) -> Result<ScaddRecord, DatasetError> {
    let th = RiskThresholds::default();
    let mut rng = rng_for(seed, index as u64);
    for _ in 0..MAX_ATTEMPTS {
        let g = sample_three_ship(&mut rng);
        if !acceptable(&g, &th) {
            continue;
        }
        let ctx = g.context();
        let decision = validate_decision(&ctx.rule_proposal(), &ctx).decision;
        let instruction = build_prompt(DEFAULT_SYSTEM_PROMPT, &ctx.snapshot, &[])
            .expect("default prompt is non-empty")
            .render();
        let output = format!(
            "Thought: {}\n{}",
            decision.rationale.replace('\n', " "),
            format_final_answer(&decision)
        );
        return Ok(ScaddRecord {
            index,
            instruction,
            output,
            geometry: g,
            provenance: PROVENANCE.to_string(),
        });
    }
    Err(DatasetError::Rejection {
        index,
        constraint: "at least one target at give-way or critical risk, initial ranges above the critical range".into(),
        attempts: MAX_ATTEMPTS,
    })
}

/// `n` three-ship avoidance records, each with at least one target obliging action.
pub fn gen_scadd(n: usize, seed: u64) -> Result<Vec<ScaddRecord>, DatasetError> {
    if n < 1 {
        return Err(DatasetError::TooFew { kind: "scadd", n, min: 1 });
    }
    (0..n).into_par_iter().map(|i| scadd_record(seed, i)).collect()
}

/// Header line plus one record per line.
pub fn to_jsonl<T: Serialize>(header: &DatasetHeader, records: &[T]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn setd_header(n: usize, seed: u64, per_trajectory: usize) -> DatasetHeader {
    DatasetHeader {
        schema: SETD_SCHEMA.into(),
        n,
        seed,
        per_trajectory: Some(per_trajectory),
        provenance: PROVENANCE.into(),
    }
}

pub fn scadd_header(n: usize, seed: u64) -> DatasetHeader {
    DatasetHeader {
        schema: SCADD_SCHEMA.into(),
        n,
        seed,
        per_trajectory: None,
        provenance: PROVENANCE.into(),
    }
}

/// Records per SETD class, in [`SETD_CLASSES`] order.
pub fn class_counts(records: &[SetdRecord]) -> [usize; 4] {
    let mut c = [0; 4];
    for r in records {
        if let Some(i) = SETD_CLASSES.iter().position(|k| *k == r.label) {
            c[i] += 1;
        }
    }
    c
}
