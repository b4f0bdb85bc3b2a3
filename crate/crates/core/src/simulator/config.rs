//! Scenario files (JSON).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{RemoteConfig, ValidatorConfig};
use crate::colregs::{AvoidanceConfig, RiskThresholds};
use crate::dynamics::{state_from_nav, CourseKeeperGains, ShipModelParams, ShipState};
use crate::kinematics::{project, GeoPosition, KinematicsError, LocalPoint, METERS_PER_NM};
use crate::zones::{is_simple, Zone};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "OS")]
    Own,
    #[serde(rename = "TS")]
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipSpec {
    pub id: String,
    pub role: Role,
    pub start: GeoPosition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GeoPosition>,
    pub speed_kn: f64,
    pub course_deg: f64,
    #[serde(default)]
    pub params: ShipModelParams,
}

impl ShipSpec {
    pub fn initial_state(&self, origin: GeoPosition) -> Result<ShipState, KinematicsError> {
        Ok(state_from_nav(
            project(origin, self.start)?,
            self.course_deg,
            self.speed_kn,
        ))
    }
}

/// Something that happens during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Event {
    /// a target is detected at `ship.start`
    PopUpShip { at: f64, ship: ShipSpec },
    ZoneAppears { at: f64, zone: Zone },
    ZoneClears { at: f64, id: String },
}

impl Event {
    pub fn at(&self) -> f64 {
        match self {
            Event::PopUpShip { at, .. } | Event::ZoneAppears { at, .. } | Event::ZoneClears { at, .. } => *at,
        }
    }
}

fn d_dt() -> f64 {
    0.5
}
fn d_interval() -> f64 {
    30.0
}
fn d_duration() -> f64 {
    3600.0
}
fn d_true() -> bool {
    true
}
fn d_goal_radius() -> f64 {
    0.1 * METERS_PER_NM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// origin of the local frame
    pub origin: GeoPosition,
    /// integration step, s
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// decision cadence, s
    #[serde(default = "d_interval")]
    pub decision_interval: f64,
    /// s
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// also decide when an event fires or a target's risk escalates
    #[serde(default = "d_true")]
    pub decide_on_event: bool,
    /// end the run once the own ship is within `goal_radius` of its goal
    #[serde(default = "d_true")]
    pub stop_at_goal: bool,
    /// m
    #[serde(default = "d_goal_radius")]
    pub goal_radius: f64,
    #[serde(default)]
    pub thresholds: RiskThresholds,
    #[serde(default)]
    pub avoidance: AvoidanceConfig,
    #[serde(default)]
    pub validator: ValidatorConfig,
    #[serde(default)]
    pub gains: CourseKeeperGains,
    /// endpoint used when the remote core is selected
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteConfig>,
    pub ships: Vec<ShipSpec>,
    #[serde(default)]
    pub events: Vec<Event>,
}

/// Whole number of `step`s in `span`, if it is one.
pub(crate) fn whole_steps(span: f64, step: f64) -> Option<u64> {
    let n = (span / step).round();
    ((n * step - span).abs() <= 1e-9 * span.abs().max(1.0)).then_some(n as u64)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn own_spec(&self) -> &ShipSpec {
        self.ships
            .iter()
            .find(|s| s.role == Role::Own)
            .expect("validated config has an own ship")
    }

    pub fn own_goal(&self) -> Option<LocalPoint> {
        self.own_spec()
            .goal
            .and_then(|g| project(self.origin, g).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        GeoPosition::new(self.origin.lon, self.origin.lat)
            .map_err(|e| invalid(format!("origin: {e}")))?;
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(invalid(format!("dt must be in (0, 1] s, got {}", self.dt)));
        }
        if !(self.duration > 0.0) || whole_steps(self.duration, self.dt).is_none() {
            return Err(invalid(format!(
                "duration {} is not a positive multiple of dt {}",
                self.duration, self.dt
            )));
        }
        if !(self.decision_interval > 0.0) || whole_steps(self.decision_interval, self.dt).is_none() {
            return Err(invalid(format!(
                "decision_interval {} is not a positive multiple of dt {}",
                self.decision_interval, self.dt
            )));
        }
        if !(self.goal_radius > 0.0) {
            return Err(invalid("goal_radius must be positive"));
        }
        self.thresholds
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        let v = &self.validator;
        if !(v.lookahead > 0.0 && v.dt > 0.0 && v.dt <= v.lookahead) {
            return Err(invalid("validator needs 0 < dt <= lookahead"));
        }
        if !(self.avoidance.turn_increment_deg > 0.0 && self.avoidance.turn_increment_deg < 180.0) {
            return Err(invalid("turn_increment_deg must be in (0, 180)"));
        }

        let own = self.ships.iter().filter(|s| s.role == Role::Own).count();
        if own != 1 {
            return Err(invalid(format!("exactly one OS ship required, found {own}")));
        }
        let mut ids = BTreeSet::new();
        let popups = self.events.iter().filter_map(|e| match e {
            Event::PopUpShip { ship, .. } => Some(ship),
            _ => None,
        });
        for s in self.ships.iter().chain(popups) {
            if !ids.insert(s.id.as_str()) {
                return Err(invalid(format!("duplicate ship id `{}`", s.id)));
            }
            self.check_ship(s)?;
        }

        let mut zone_ids = BTreeSet::new();
        for e in &self.events {
            let at = e.at();
            if !(0.0..=self.duration).contains(&at) {
                return Err(invalid(format!("event at {at} s outside [0, {}]", self.duration)));
            }
            match e {
                Event::PopUpShip { ship, .. } => {
                    if ship.role != Role::Target {
                        return Err(invalid(format!("pop-up ship `{}` must be a TS", ship.id)));
                    }
                }
                Event::ZoneAppears { zone, .. } => {
                    if zone.polygon.len() < 3 || !is_simple(&zone.polygon) {
                        return Err(invalid(format!("zone `{}` polygon is not simple", zone.id)));
                    }
                    if !zone_ids.insert(zone.id.as_str()) {
                        return Err(invalid(format!("duplicate zone id `{}`", zone.id)));
                    }
                }
                Event::ZoneClears { id, .. } => {
                    if !zone_ids.contains(id.as_str()) {
                        return Err(invalid(format!("zone_clears names unknown zone `{id}`")));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_ship(&self, s: &ShipSpec) -> Result<(), ConfigError> {
        let ctx = |e: String| invalid(format!("ship `{}`: {e}", s.id));
        GeoPosition::new(s.start.lon, s.start.lat).map_err(|e| ctx(e.to_string()))?;
        project(self.origin, s.start).map_err(|e| ctx(e.to_string()))?;
        if let Some(g) = s.goal {
            project(self.origin, g).map_err(|e| ctx(format!("goal: {e}")))?;
        }
        if !(s.speed_kn.is_finite() && s.speed_kn >= 0.0) {
            return Err(ctx("speed_kn must be finite and non-negative".into()));
        }
        if !s.course_deg.is_finite() {
            return Err(ctx("course_deg must be finite".into()));
        }
        s.params.validate().map_err(|e| ctx(e.to_string()))
    }
}
