//! Forward-simulation check of a proposed decision.
//!
//! The own ship is stepped through the ship model under the candidate's
//! orders; targets keep course and speed. A candidate fails when the
//! predicted track enters a no-go zone or passes a target closer than half
//! the safe DCPA. Stand-on orders are only checked against zones: holding
//! course is the rule-mandated behavior and the extremis case is handled by
//! the critical-range gate of the rule core.
//!
//! On failure the alternatives are tried in order: the same-side turn
//! deepened in 15° steps up to 60°, a 30° turn to the other side, half speed
//! on the current heading, and finally stop.

use serde::{Deserialize, Serialize};

use crate::colregs::{DecisionCommand, Maneuver, Side};
use crate::dynamics::{step_towards, ShipState};
use crate::kinematics::wrap_180;

use super::DecisionContext;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    /// prediction horizon, s
    pub lookahead: f64,
    /// integration step of the prediction, s
    pub dt: f64,
    /// extra turn per deepening attempt, degrees
    pub deepen_step_deg: f64,
    /// largest course change tried on the same side, degrees
    pub max_turn_deg: f64,
    /// course change tried on the other side, degrees
    pub opposite_turn_deg: f64,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        Self {
            lookahead: 600.0,
            dt: 1.0,
            deepen_step_deg: 15.0,
            max_turn_deg: 60.0,
            opposite_turn_deg: 30.0,
        }
    }
}

/// Result of predicting one decision forward.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCheck {
    /// smallest predicted distance to any target, m (infinite with no targets)
    pub min_separation: f64,
    pub closest_target: Option<String>,
    /// first zone entered and when
    pub zone_entry: Option<(String, f64)>,
}

impl ForwardCheck {
    pub fn passes(&self, d_safe: f64, check_targets: bool) -> bool {
        self.zone_entry.is_none() && (!check_targets || self.min_separation >= d_safe / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub decision: DecisionCommand,
    /// false when the candidate was replaced
    pub accepted: bool,
}

fn orders(decision: &DecisionCommand, ctx: &DecisionContext) -> (f64, f64) {
    let own = &ctx.snapshot.own;
    (
        decision.course_order.unwrap_or(own.course_order),
        decision.speed_order.unwrap_or(own.speed_order),
    )
}

/// Predicts `decision` over the configured lookahead.
pub fn forward_check(decision: &DecisionCommand, ctx: &DecisionContext) -> ForwardCheck {
    let cfg = &ctx.validator;
    let (course, speed) = orders(decision, ctx);
    let mut own: ShipState = ctx.snapshot.own.state;
    let targets = &ctx.snapshot.targets;
    let zones = &ctx.snapshot.zones;
    let steps = (cfg.lookahead / cfg.dt).ceil() as usize;

    let mut min_sep = f64::INFINITY;
    let mut closest = None;
    let mut zone_entry = None;
    for k in 1..=steps {
        own = step_towards(&own, course, speed, &ctx.params, &ctx.gains, cfg.dt);
        let t = k as f64 * cfg.dt;
        for tgt in targets {
            let d = own.pos.distance(&tgt.state.extrapolate(t));
            if d < min_sep {
                min_sep = d;
                closest = Some(tgt.id.clone());
            }
        }
        if zone_entry.is_none() {
            if let Some(z) = zones.iter().find(|z| z.zone.contains(&own.pos)) {
                zone_entry = Some((z.zone.id.clone(), t));
            }
        }
    }
    ForwardCheck {
        min_separation: min_sep,
        closest_target: closest,
        zone_entry,
    }
}

fn checks_targets(d: &DecisionCommand) -> bool {
    d.maneuver != Maneuver::StandOn
}

fn passes(d: &DecisionCommand, ctx: &DecisionContext) -> bool {
    forward_check(d, ctx).passes(ctx.thresholds.d_safe, checks_targets(d))
}

fn describe_failure(d: &DecisionCommand, ctx: &DecisionContext) -> String {
    let fc = forward_check(d, ctx);
    if let Some((zone, t)) = fc.zone_entry {
        format!("{} would enter no-go area {zone} in {:.0} s", d.maneuver, t)
    } else {
        format!(
            "{} would pass target {} at {:.0} m",
            d.maneuver,
            fc.closest_target.unwrap_or_default(),
            fc.min_separation
        )
    }
}

/// Alternatives to `candidate`, in the order they are tried.
fn alternatives(candidate: &DecisionCommand, ctx: &DecisionContext) -> Vec<DecisionCommand> {
    let cfg = &ctx.validator;
    let own = &ctx.snapshot.own.state;
    let heading = own.heading;
    let change = candidate
        .course_order
        .map(|c| wrap_180((c - heading).to_degrees()))
        .unwrap_or(0.0);
    let side = candidate.maneuver.turn_side().unwrap_or(if change < 0.0 {
        Side::Port
    } else {
        Side::Starboard
    });
    let turn_cmd = |side: Side, deg: f64, why: String| {
        let maneuver = match side {
            Side::Starboard => Maneuver::StarboardTurn,
            Side::Port => Maneuver::PortTurn,
        };
        DecisionCommand::new(
            maneuver,
            Some(heading + side.sign() * deg.to_radians()),
            None,
            why,
        )
    };

    let mut out = Vec::new();
    let base = change.abs();
    let mut k = 1.0;
    while base + k * cfg.deepen_step_deg <= cfg.max_turn_deg + 1e-9 {
        let deg = base + k * cfg.deepen_step_deg;
        out.push(turn_cmd(
            side,
            deg,
            format!(
                "{} Validator: deepened to a {deg:.0} deg {} turn to clear the hazard.",
                candidate.rationale,
                side.word()
            ),
        ));
        k += 1.0;
    }
    out.push(turn_cmd(
        side.opposite(),
        cfg.opposite_turn_deg,
        format!(
            "{} Validator: {} side blocked; {:.0} deg {} turn instead.",
            candidate.rationale,
            side.word(),
            cfg.opposite_turn_deg,
            side.opposite().word()
        ),
    ));
    let half = DecisionCommand::new(
        Maneuver::SlowDown,
        Some(heading),
        Some(own.speed / 2.0),
        format!(
            "{} Validator: both turns unsafe; abandon the turn and reduce to half speed.",
            candidate.rationale
        ),
    );
    if half.speed_order.is_some_and(|s| s < own.speed) {
        out.push(half);
    }
    out.push(stop(candidate, heading));
    out
}

fn stop(candidate: &DecisionCommand, heading: f64) -> DecisionCommand {
    DecisionCommand::new(
        Maneuver::Stop,
        Some(heading),
        Some(0.0),
        format!(
            "{} Validator: no safe alteration found; stop the ship.",
            candidate.rationale
        ),
    )
}

/// Returns `candidate` unchanged when it passes the forward check, otherwise
/// the first passing alternative, otherwise `Stop`.
pub fn validate_decision(candidate: &DecisionCommand, ctx: &DecisionContext) -> Validation {
    if passes(candidate, ctx) {
        return Validation {
            decision: candidate.clone(),
            accepted: true,
        };
    }
    let reason = describe_failure(candidate, ctx);
    for alt in alternatives(candidate, ctx) {
        if passes(&alt, ctx) {
            let mut decision = alt;
            decision.rationale = format!("{} ({reason}.)", decision.rationale);
            return Validation {
                decision,
                accepted: false,
            };
        }
    }
    let mut decision = stop(candidate, ctx.snapshot.own.state.heading);
    decision.rationale = format!("{} ({reason}.)", decision.rationale);
    Validation {
        decision,
        accepted: false,
    }
}
