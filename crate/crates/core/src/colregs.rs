//! Encounter classification, collision-risk grading, target prioritization and
//! the deterministic rule-based avoidance decision.
//!
//! Sector table (β = relative bearing of the target from the own bow,
//! Δc = target course minus own course, α = relative bearing of the own ship
//! from the target's bow), evaluated in this order:
//!
//! | condition                                                    | label                    |
//! |--------------------------------------------------------------|--------------------------|
//! | not closing (tcpa ≤ 1e-6 s)                                   | `Clear`                  |
//! | β ∈ [354°, 360°) ∪ [0°, 6°] and \|Δc − 180°\| ≤ 6°            | `HeadOn`                 |
//! | β ∈ (112.5°, 247.5°) and target faster                       | `BeingOvertaken`         |
//! | α ∈ (112.5°, 247.5°) and own ship faster                     | `Overtaking`             |
//! | β ∈ (6°, 67.5°]                                              | `StarboardCrossingSmall` |
//! | β ∈ (67.5°, 112.5°]                                          | `StarboardCrossingLarge` |
//! | β ∈ [247.5°, 354°)                                           | `PortCrossing`           |
//! | anything else                                                | `Clear`                  |
//!
//! Angles are snapped to micro-degrees before the lookup so the table edges
//! are reproducible.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ShipState;
use crate::kinematics::{
    cpa, mps_to_knots, relative_bearing, wrap_180, wrap_2pi, wrap_360, CpaResult, KinematicsError,
    LocalPoint, METERS_PER_NM,
};

/// Minimum TCPA for a pair to count as closing, seconds.
pub const CLOSING_EPS_S: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColregsError {
    #[error(transparent)]
    Geometry(#[from] KinematicsError),
    #[error("invalid risk thresholds: {0}")]
    Thresholds(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EncounterType {
    HeadOn,
    StarboardCrossingSmall,
    StarboardCrossingLarge,
    PortCrossing,
    BeingOvertaken,
    Overtaking,
    Clear,
}

impl EncounterType {
    pub const ALL: [EncounterType; 7] = [
        EncounterType::HeadOn,
        EncounterType::StarboardCrossingSmall,
        EncounterType::StarboardCrossingLarge,
        EncounterType::PortCrossing,
        EncounterType::BeingOvertaken,
        EncounterType::Overtaking,
        EncounterType::Clear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EncounterType::HeadOn => "HeadOn",
            EncounterType::StarboardCrossingSmall => "StarboardCrossingSmall",
            EncounterType::StarboardCrossingLarge => "StarboardCrossingLarge",
            EncounterType::PortCrossing => "PortCrossing",
            EncounterType::BeingOvertaken => "BeingOvertaken",
            EncounterType::Overtaking => "Overtaking",
            EncounterType::Clear => "Clear",
        }
    }

    /// Phrase used in scene text.
    pub fn phrase(&self) -> &'static str {
        match self {
            EncounterType::HeadOn => "head-on",
            EncounterType::StarboardCrossingSmall => "starboard crossing (small angle)",
            EncounterType::StarboardCrossingLarge => "starboard crossing (large angle)",
            EncounterType::PortCrossing => "port crossing",
            EncounterType::BeingOvertaken => "being overtaken",
            EncounterType::Overtaking => "overtaking",
            EncounterType::Clear => "clear",
        }
    }

    pub fn from_phrase(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.phrase() == s)
    }
}

impl std::fmt::Display for EncounterType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EncounterType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown encounter type `{s}`"))
    }
}

/// Ordered by severity: `None < Watch < GiveWay < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLevel {
    None,
    Watch,
    GiveWay,
    Critical,
}

impl RiskLevel {
    pub fn is_at_risk(&self) -> bool {
        *self != RiskLevel::None
    }

    /// Risk high enough to require action from the own ship.
    pub fn requires_action(&self) -> bool {
        *self >= RiskLevel::GiveWay
    }

    pub fn phrase(&self) -> &'static str {
        match self {
            RiskLevel::None => "none",
            RiskLevel::Watch => "watch",
            RiskLevel::GiveWay => "give-way",
            RiskLevel::Critical => "critical",
        }
    }

    pub fn from_phrase(s: &str) -> Option<Self> {
        [
            RiskLevel::None,
            RiskLevel::Watch,
            RiskLevel::GiveWay,
            RiskLevel::Critical,
        ]
        .into_iter()
        .find(|r| r.phrase() == s)
    }
}

/// Side of the own ship.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Port,
    Starboard,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Port => Side::Starboard,
            Side::Starboard => Side::Port,
        }
    }

    /// Sign of a course change towards this side.
    pub fn sign(self) -> f64 {
        match self {
            Side::Port => -1.0,
            Side::Starboard => 1.0,
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Side::Port => "port",
            Side::Starboard => "starboard",
        }
    }

    /// Side of a relative bearing (radians); dead ahead and astern count as starboard.
    pub fn of_bearing(bearing: f64) -> Side {
        let b = wrap_2pi(bearing);
        if b > std::f64::consts::PI {
            Side::Port
        } else {
            Side::Starboard
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskThresholds {
    /// DCPA bound, m
    pub d_safe: f64,
    /// TCPA bound, s
    pub t_horizon: f64,
    /// range gate for give-way, m
    pub r_alert: f64,
    /// range below which a closing target is critical, m
    pub r_critical: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        Self {
            d_safe: 0.5 * METERS_PER_NM,
            t_horizon: 1200.0,
            r_alert: 6.0 * METERS_PER_NM,
            r_critical: 0.8 * METERS_PER_NM,
        }
    }
}

impl RiskThresholds {
    pub fn validate(&self) -> Result<(), ColregsError> {
        if !(self.d_safe > 0.0 && self.d_safe < self.r_alert) {
            return Err(ColregsError::Thresholds("require 0 < d_safe < r_alert"));
        }
        if !(self.r_critical > 0.0 && self.r_critical < self.r_alert) {
            return Err(ColregsError::Thresholds("require 0 < r_critical < r_alert"));
        }
        if !(self.t_horizon > 0.0) {
            return Err(ColregsError::Thresholds("require t_horizon > 0"));
        }
        Ok(())
    }
}

/// Classification of one target against the own ship at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterAssessment {
    pub target_id: String,
    pub encounter: EncounterType,
    pub cpa: CpaResult,
    pub risk: RiskLevel,
    /// 1 = most urgent; absent when `risk` is `None`
    pub priority: Option<u32>,
    /// Side of the own ship the target occupies at CPA.
    pub passing_side: Side,
}

/// Maneuver tags understood by the helm and by the answer grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Maneuver {
    StarboardTurn,
    PortTurn,
    SlowDown,
    Stop,
    StandOn,
    ResumeCourse,
}

impl Maneuver {
    pub const ALL: [Maneuver; 6] = [
        Maneuver::StarboardTurn,
        Maneuver::PortTurn,
        Maneuver::SlowDown,
        Maneuver::Stop,
        Maneuver::StandOn,
        Maneuver::ResumeCourse,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Maneuver::StarboardTurn => "StarboardTurn",
            Maneuver::PortTurn => "PortTurn",
            Maneuver::SlowDown => "SlowDown",
            Maneuver::Stop => "Stop",
            Maneuver::StandOn => "StandOn",
            Maneuver::ResumeCourse => "ResumeCourse",
        }
    }

    pub fn turn_side(&self) -> Option<Side> {
        match self {
            Maneuver::StarboardTurn => Some(Side::Starboard),
            Maneuver::PortTurn => Some(Side::Port),
            _ => None,
        }
    }
}

impl std::fmt::Display for Maneuver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Maneuver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown maneuver `{s}`"))
    }
}

/// A helm order with its justification.
///
/// Course orders are canonical: rounded to 0.1° and normalized to `[0, 2π)`.
/// Speed orders are rounded to 0.1 kn. [`DecisionCommand::new`] applies both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCommand {
    pub maneuver: Maneuver,
    /// radians
    pub course_order: Option<f64>,
    /// m/s
    pub speed_order: Option<f64>,
    pub rationale: String,
}

/// Rounds a course in radians to the nearest 0.1° in `[0°, 360°)`.
pub fn canonical_course(rad: f64) -> f64 {
    let deg = (wrap_360(rad.to_degrees()) * 10.0).round() / 10.0;
    wrap_360(deg).to_radians()
}

/// Rounds a speed in m/s to the nearest 0.1 kn.
pub fn canonical_speed(mps: f64) -> f64 {
    let kn = (mps_to_knots(mps.max(0.0)) * 10.0).round() / 10.0;
    crate::kinematics::knots_to_mps(kn)
}

impl DecisionCommand {
    pub fn new(
        maneuver: Maneuver,
        course_order: Option<f64>,
        speed_order: Option<f64>,
        rationale: impl Into<String>,
    ) -> Self {
        Self {
            maneuver,
            course_order: course_order.map(canonical_course),
            speed_order: speed_order.map(canonical_speed),
            rationale: rationale.into(),
        }
    }

    pub fn course_order_deg(&self) -> Option<f64> {
        self.course_order.map(|c| (c.to_degrees() * 10.0).round() / 10.0)
    }

    pub fn speed_order_kn(&self) -> Option<f64> {
        self.speed_order
            .map(|s| (mps_to_knots(s) * 10.0).round() / 10.0)
    }

    /// Checks the maneuver/order consistency rules against the current own state.
    pub fn check(&self, own: &ShipState, goal: Option<LocalPoint>) -> Result<(), String> {
        match self.maneuver {
            Maneuver::StarboardTurn | Maneuver::PortTurn => {
                let side = self.maneuver.turn_side().expect("turn maneuver");
                let course = self
                    .course_order
                    .ok_or_else(|| format!("{} requires course_order_deg", self.maneuver))?;
                let change = wrap_180((course - own.heading).to_degrees());
                if change * side.sign() <= 0.0 {
                    return Err(format!(
                        "{} course {:.1} deg is not to {} of heading {:.1} deg",
                        self.maneuver,
                        course.to_degrees(),
                        side.word(),
                        own.heading.to_degrees()
                    ));
                }
            }
            Maneuver::SlowDown => {
                let s = self
                    .speed_order
                    .ok_or("SlowDown requires speed_order_kn")?;
                if s >= own.speed {
                    return Err("SlowDown speed must be below the current speed".into());
                }
            }
            Maneuver::Stop => {
                if self.speed_order.is_some_and(|s| s != 0.0) {
                    return Err("Stop requires speed_order_kn 0".into());
                }
            }
            Maneuver::ResumeCourse => {
                if let (Some(goal), Some(course)) = (goal, self.course_order) {
                    let expected = canonical_course(own.pos.bearing_to(&goal));
                    if (course - expected).abs() > 1e-9 {
                        return Err("ResumeCourse course must be the bearing to the goal".into());
                    }
                }
            }
            Maneuver::StandOn => {}
        }
        Ok(())
    }
}

fn snap_deg(rad: f64) -> f64 {
    let d = (rad.to_degrees() * 1e6).round() / 1e6;
    wrap_360(d)
}

/// Encounter type of `ts` as seen from `os`.
pub fn classify(os: &ShipState, ts: &ShipState) -> Result<EncounterType, ColregsError> {
    let beta_rad = relative_bearing(os.heading, os.pos, ts.pos)?;
    let c = cpa((os.pos, os.velocity()), (ts.pos, ts.velocity()));
    Ok(classify_geometry(
        snap_deg(beta_rad),
        snap_deg(ts.heading - os.heading),
        ts.speed > os.speed,
        os.speed > ts.speed,
        c.tcpa > CLOSING_EPS_S,
    ))
}

/// Sector table lookup over angles in degrees.
pub(crate) fn classify_geometry(
    beta: f64,
    delta_course: f64,
    target_faster: bool,
    own_faster: bool,
    closing: bool,
) -> EncounterType {
    if !closing {
        return EncounterType::Clear;
    }
    let ahead = beta >= 354.0 || beta <= 6.0;
    if ahead && wrap_180(delta_course - 180.0).abs() <= 6.0 {
        return EncounterType::HeadOn;
    }
    let astern = |b: f64| b > 112.5 && b < 247.5;
    if astern(beta) && target_faster {
        return EncounterType::BeingOvertaken;
    }
    // bearing of the own ship from the target's bow
    let alpha = wrap_360(beta + 180.0 - delta_course);
    if astern(alpha) && own_faster {
        return EncounterType::Overtaking;
    }
    if beta > 6.0 && beta <= 67.5 {
        EncounterType::StarboardCrossingSmall
    } else if beta > 67.5 && beta <= 112.5 {
        EncounterType::StarboardCrossingLarge
    } else if (247.5..354.0).contains(&beta) {
        EncounterType::PortCrossing
    } else {
        EncounterType::Clear
    }
}

/// Risk grade for one CPA.
pub fn assess_risk(cpa: &CpaResult, th: &RiskThresholds) -> RiskLevel {
    let closing = cpa.tcpa > CLOSING_EPS_S;
    if !closing {
        return RiskLevel::None;
    }
    if cpa.range < th.r_critical {
        return RiskLevel::Critical;
    }
    if cpa.dcpa < th.d_safe && cpa.tcpa < th.t_horizon && cpa.range < th.r_alert {
        return RiskLevel::GiveWay;
    }
    if cpa.dcpa < 2.0 * th.d_safe && cpa.tcpa < 2.0 * th.t_horizon {
        return RiskLevel::Watch;
    }
    RiskLevel::None
}

/// Full assessment of one target, without priority.
pub fn assess_target(
    os: &ShipState,
    target_id: &str,
    ts: &ShipState,
    th: &RiskThresholds,
) -> Result<EncounterAssessment, ColregsError> {
    let encounter = classify(os, ts)?;
    let c = cpa((os.pos, os.velocity()), (ts.pos, ts.velocity()));
    Ok(EncounterAssessment {
        target_id: target_id.to_string(),
        encounter,
        cpa: c,
        risk: assess_risk(&c, th),
        priority: None,
        passing_side: passing_side(os, ts, &c),
    })
}

fn passing_side(os: &ShipState, ts: &ShipState, c: &CpaResult) -> Side {
    let t = c.tcpa.max(0.0);
    let o = os.extrapolate(t);
    let p = ts.extrapolate(t);
    let (dx, dy) = (p.x - o.x, p.y - o.y);
    // starboard unit vector of the own heading is (cos h, -sin h)
    let lateral = dx * os.heading.cos() - dy * os.heading.sin();
    if lateral.abs() < 1.0 {
        Side::of_bearing(c.relative_bearing)
    } else if lateral > 0.0 {
        Side::Starboard
    } else {
        Side::Port
    }
}

fn urgency_order(a: &EncounterAssessment, b: &EncounterAssessment) -> Ordering {
    b.risk
        .cmp(&a.risk)
        .then(a.cpa.tcpa.total_cmp(&b.cpa.tcpa))
        .then(a.cpa.dcpa.total_cmp(&b.cpa.dcpa))
        .then(a.cpa.range.total_cmp(&b.cpa.range))
        .then(a.target_id.cmp(&b.target_id))
}

/// Assigns priority ranks 1..n to at-risk targets; clears it on the rest.
/// The returned list is ordered by priority, then the risk-free targets by id.
pub fn prioritize(mut assessments: Vec<EncounterAssessment>) -> Vec<EncounterAssessment> {
    assessments.sort_by(|a, b| match (a.risk.is_at_risk(), b.risk.is_at_risk()) {
        (true, true) => urgency_order(a, b),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.target_id.cmp(&b.target_id),
    });
    let mut rank = 0;
    for a in &mut assessments {
        a.priority = if a.risk.is_at_risk() {
            rank += 1;
            Some(rank)
        } else {
            None
        };
    }
    assessments
}

/// Tunables of the rule core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidanceConfig {
    /// course change per decision cycle, degrees
    pub turn_increment_deg: f64,
    /// consecutive risk-free cycles required before resuming the goal course
    pub clear_cycles: u32,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self {
            turn_increment_deg: 30.0,
            clear_cycles: 3,
        }
    }
}

/// The own-ship situation the rule core decides on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwnSituation {
    pub state: ShipState,
    pub goal: Option<LocalPoint>,
    /// speed to resume once risk clears, m/s
    pub cruise_speed: f64,
    /// consecutive decision cycles, including this one, with no target at risk
    pub clear_streak: u32,
}

fn turn(
    os: &ShipState,
    side: Side,
    cfg: &AvoidanceConfig,
    why: String,
) -> DecisionCommand {
    let course = os.heading + side.sign() * cfg.turn_increment_deg.to_radians();
    let maneuver = match side {
        Side::Starboard => Maneuver::StarboardTurn,
        Side::Port => Maneuver::PortTurn,
    };
    DecisionCommand::new(maneuver, Some(course), None, why)
}

/// Deterministic rule-based decision for the prioritized assessments.
pub fn rule_decision(
    own: &OwnSituation,
    assessments: &[EncounterAssessment],
    cfg: &AvoidanceConfig,
) -> DecisionCommand {
    let os = &own.state;
    let top = assessments
        .iter()
        .filter(|a| a.risk.is_at_risk())
        .min_by_key(|a| a.priority.unwrap_or(u32::MAX));

    let Some(top) = top else {
        if own.clear_streak < cfg.clear_cycles {
            return DecisionCommand::new(
                Maneuver::StandOn,
                None,
                None,
                format!(
                    "No collision risk for {} of {} cycles; holding course until the situation is confirmed clear.",
                    own.clear_streak, cfg.clear_cycles
                ),
            );
        }
        return match own.goal {
            Some(goal) => DecisionCommand::new(
                Maneuver::ResumeCourse,
                Some(os.pos.bearing_to(&goal)),
                Some(own.cruise_speed),
                "No collision risk; resume course toward the goal.",
            ),
            None => DecisionCommand::new(
                Maneuver::StandOn,
                None,
                None,
                "No collision risk and no goal; maintain course and speed.",
            ),
        };
    };

    let id = &top.target_id;
    if !top.risk.requires_action() {
        return DecisionCommand::new(
            Maneuver::StandOn,
            None,
            None,
            format!("Target {id} under watch (Rule 7); maintain course and speed."),
        );
    }
    let critical = top.risk == RiskLevel::Critical;
    match top.encounter {
        EncounterType::HeadOn => turn(
            os,
            Side::Starboard,
            cfg,
            format!("Head-on with target {id} (Rule 14): alter course to starboard and pass port to port."),
        ),
        EncounterType::StarboardCrossingSmall | EncounterType::StarboardCrossingLarge => turn(
            os,
            Side::Starboard,
            cfg,
            format!("Target {id} crossing from starboard (Rules 15, 16): give way by altering course to starboard."),
        ),
        EncounterType::Overtaking => turn(
            os,
            Side::Starboard,
            cfg,
            format!("Overtaking target {id} (Rule 13): keep clear by altering course to starboard."),
        ),
        EncounterType::PortCrossing if critical => turn(
            os,
            Side::Starboard,
            cfg,
            format!("Target {id} crossing from port has not given way and collision cannot be avoided by her action alone (Rule 17(b)): alter course to starboard."),
        ),
        EncounterType::PortCrossing => DecisionCommand::new(
            Maneuver::StandOn,
            None,
            None,
            format!("Target {id} crossing from port is the give-way vessel (Rule 17(a)): stand on."),
        ),
        EncounterType::BeingOvertaken if critical => {
            let away = top.passing_side.opposite();
            turn(
                os,
                away,
                cfg,
                format!(
                    "Overtaking target {id} closing on the {} side without keeping clear (Rule 17(b)): turn to {} to open the distance.",
                    top.passing_side.word(),
                    away.word()
                ),
            )
        }
        EncounterType::BeingOvertaken => DecisionCommand::new(
            Maneuver::StandOn,
            None,
            None,
            format!("Being overtaken by target {id}, which must keep clear (Rule 13): stand on."),
        ),
        EncounterType::Clear => turn(
            os,
            Side::Starboard,
            cfg,
            format!("Risk of collision with target {id} in an unclassified geometry (Rules 2, 8): alter course to starboard."),
        ),
    }
}
