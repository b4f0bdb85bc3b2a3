//! Time-stepped scenario engine.
//!
//! Each step at time `t`: fire due events, decide if a decision is due,
//! log all ship states, check the goal, integrate every ship by `dt`.
//! Targets hold their initial course and speed; only the own ship is
//! steered, through the course keeper.

pub mod config;
pub mod log;
pub mod metrics;

use std::collections::BTreeMap;
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{run_react, DecisionContext, DecisionCore, ReactConfig, ToolRegistry};
use crate::colregs::RiskLevel;
use crate::depiction::{depict, Contact, OwnSnapshot, SceneSnapshot, ZoneSnapshot};
use crate::dynamics::{state_from_nav, step_towards, ShipModelParams, ShipState};
use crate::kinematics::{knots_to_mps, project};
use crate::zones::Zone;

pub use config::{ConfigError, Event, Role, ScenarioConfig, ShipSpec};
pub use log::{
    AssessmentRecord, DecisionRecord, DecisionTrigger, EndReason, LatencyRecord, LogError,
    LogRecord, ShipRecord, SimulationLog, LOG_SCHEMA,
};
pub use metrics::{compute_metrics, maneuver_complies, ColregsFlag, Metrics, PairDistance};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scene assembly failed at t = {t} s: {message}")]
    Scene { t: f64, message: String },
}

struct Vessel {
    id: String,
    state: ShipState,
    params: ShipModelParams,
    /// course and speed orders, rad and m/s
    course_order: f64,
    speed_order: f64,
}

impl Vessel {
    fn new(spec: &ShipSpec, origin: crate::kinematics::GeoPosition) -> Result<Self, ConfigError> {
        let pos = project(origin, spec.start)
            .map_err(|e| ConfigError::Invalid(format!("ship `{}`: {e}", spec.id)))?;
        let state = state_from_nav(pos, spec.course_deg, spec.speed_kn);
        Ok(Self {
            id: spec.id.clone(),
            state,
            params: spec.params,
            course_order: state.heading,
            speed_order: state.speed,
        })
    }

    fn record(&self) -> ShipRecord {
        ShipRecord {
            id: self.id.clone(),
            state: self.state,
        }
    }
}

/// Hex SHA-256 of a scene text.
pub fn scene_digest(scene: &str) -> String {
    hex::encode(Sha256::digest(scene.as_bytes()))
}

/// Runs a scenario with the standard tools and loop settings.
pub fn run(config: &ScenarioConfig, core: &dyn DecisionCore) -> Result<SimulationLog, SimError> {
    run_with(config, core, &ToolRegistry::standard(), &ReactConfig::default())
}

pub fn run_with(
    config: &ScenarioConfig,
    core: &dyn DecisionCore,
    registry: &ToolRegistry,
    react: &ReactConfig,
) -> Result<SimulationLog, SimError> {
    config.validate()?;
    let origin = config.origin;
    let own_spec = config.own_spec();
    let mut own = Vessel::new(own_spec, origin)?;
    let goal = config.own_goal();
    let cruise_speed = knots_to_mps(own_spec.speed_kn);
    let mut targets: Vec<Vessel> = config
        .ships
        .iter()
        .filter(|s| s.role == Role::Target)
        .map(|s| Vessel::new(s, origin))
        .collect::<Result<_, _>>()?;

    let mut pending: Vec<&Event> = config.events.iter().collect();
    // stable: simultaneous events keep file order
    pending.sort_by(|a, b| a.at().total_cmp(&b.at()));
    let mut pending = pending.into_iter().peekable();

    let mut zones: BTreeMap<String, Zone> = BTreeMap::new();
    let mut new_zones: Vec<String> = Vec::new();
    let mut new_contacts: Vec<String> = Vec::new();

    let steps = config::whole_steps(config.duration, config.dt).expect("validated");
    let interval_steps = config::whole_steps(config.decision_interval, config.dt).expect("validated");
    let mut records = vec![LogRecord::Header {
        schema: LOG_SCHEMA.to_string(),
        config: config.clone(),
    }];
    let mut latencies = Vec::new();
    let mut clear_streak = config.avoidance.clear_cycles;
    let mut last_risk: BTreeMap<String, RiskLevel> = BTreeMap::new();
    let mut end = EndReason::Duration;
    let mut t_end = config.duration;

    for k in 0..=steps {
        let t = k as f64 * config.dt;

        let mut fired = false;
        while let Some(e) = pending.next_if(|e| e.at() <= t + 1e-9) {
            fired = true;
            match e {
                Event::PopUpShip { ship, .. } => {
                    targets.push(Vessel::new(ship, origin)?);
                    new_contacts.push(ship.id.clone());
                }
                Event::ZoneAppears { zone, .. } => {
                    zones.insert(zone.id.clone(), zone.clone());
                    new_zones.push(zone.id.clone());
                }
                Event::ZoneClears { id, .. } => {
                    zones.remove(id);
                    new_zones.retain(|z| z != id);
                }
            }
            records.push(LogRecord::Event {
                t,
                event: e.clone(),
            });
        }

        let scheduled = k % interval_steps == 0;
        let trigger = if scheduled {
            Some(DecisionTrigger::Interval)
        } else if config.decide_on_event && fired {
            Some(DecisionTrigger::Event)
        } else if config.decide_on_event
            && escalated(&own, &targets, &last_risk, config)
        {
            Some(DecisionTrigger::RiskEscalation)
        } else {
            None
        };

        if let Some(trigger) = trigger {
            let started = Instant::now();
            let contacts: Vec<Contact> = targets
                .iter()
                .map(|v| Contact {
                    id: v.id.clone(),
                    state: v.state,
                    new_contact: new_contacts.contains(&v.id),
                })
                .collect();
            let zone_snaps = zones
                .values()
                .map(|z| ZoneSnapshot {
                    zone: z.clone(),
                    newly_appeared: new_zones.contains(&z.id),
                })
                .collect();
            let snapshot = SceneSnapshot::assemble(
                t,
                origin,
                OwnSnapshot {
                    state: own.state,
                    goal,
                    course_order: own.course_order,
                    speed_order: own.speed_order,
                    cruise_speed,
                },
                &contacts,
                zone_snaps,
                &config.thresholds,
            )
            .map_err(|e| SimError::Scene {
                t,
                message: e.to_string(),
            })?;
            clear_streak = if snapshot.any_at_risk() {
                0
            } else {
                clear_streak.saturating_add(1)
            };
            let ctx = DecisionContext {
                snapshot,
                thresholds: config.thresholds,
                avoidance: config.avoidance,
                params: own.params,
                gains: config.gains,
                validator: config.validator,
                clear_streak,
            };
            let outcome = run_react(&ctx, core, registry, react);
            let decision = &outcome.trace.final_decision;
            if let Some(c) = decision.course_order {
                own.course_order = c;
            }
            if let Some(s) = decision.speed_order {
                own.speed_order = s;
            }
            last_risk = ctx
                .snapshot
                .targets
                .iter()
                .map(|t| (t.id.clone(), t.assessment.risk))
                .collect();
            let assessments = ctx.snapshot.assessments().iter().map(AssessmentRecord::from).collect();
            let digest = scene_digest(&depict(&ctx.snapshot));
            let elapsed = started.elapsed();
            latencies.push(LatencyRecord {
                t,
                core_s: outcome.core_latency.as_secs_f64(),
                pipeline_s: elapsed.saturating_sub(outcome.core_latency).as_secs_f64(),
            });
            records.push(LogRecord::Decision(DecisionRecord {
                t,
                trigger,
                scene_digest: digest,
                assessments,
                trace: outcome.trace,
            }));
            new_contacts.clear();
            new_zones.clear();
        }

        let mut ships = vec![own.record()];
        ships.extend(targets.iter().map(Vessel::record));
        records.push(LogRecord::Step { t, ships });

        if config.stop_at_goal {
            if let Some(g) = goal {
                if own.state.pos.distance(&g) <= config.goal_radius {
                    end = EndReason::GoalReached;
                    t_end = t;
                    break;
                }
            }
        }
        if k == steps {
            break;
        }

        own.state = step_towards(
            &own.state,
            own.course_order,
            own.speed_order,
            &own.params,
            &config.gains,
            config.dt,
        );
        for v in &mut targets {
            v.state = step_towards(
                &v.state,
                v.course_order,
                v.speed_order,
                &v.params,
                &config.gains,
                config.dt,
            );
        }
    }
    records.push(LogRecord::End {
        t: t_end,
        reason: end,
    });
    Ok(SimulationLog { records, latencies })
}

/// A target obliges action now but did not at the last decision.
fn escalated(
    own: &Vessel,
    targets: &[Vessel],
    last: &BTreeMap<String, RiskLevel>,
    config: &ScenarioConfig,
) -> bool {
    targets.iter().any(|v| {
        let Ok(a) = crate::colregs::assess_target(&own.state, &v.id, &v.state, &config.thresholds) else {
            return false;
        };
        a.risk.requires_action() && last.get(&v.id).is_none_or(|prev| a.risk > *prev)
    })
}
