//! Local tangent-plane projection, bearings and closest-point-of-approach math.
//!
//! All angles are radians internally. Headings and courses are measured
//! clockwise from true north, so a unit vector for course `c` is
//! `(sin c, cos c)` in the east/north plane.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spherical Earth radius used by the projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per nautical mile.
pub const METERS_PER_NM: f64 = 1852.0;

/// Meters per second in one knot.
pub const MPS_PER_KNOT: f64 = METERS_PER_NM / 3600.0;

/// Relative speeds below this are treated as zero relative motion.
pub const REL_SPEED_EPS: f64 = 1e-6;

/// Largest lat/lon offset from the origin the projection accepts, degrees.
pub const PROJECTION_LIMIT_DEG: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("position ({lon}, {lat}) is outside the local projection range of the origin")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("invalid geographic position ({lon}, {lat})")]
    InvalidPosition { lon: f64, lat: f64 },
    #[error("degenerate geometry: positions coincide")]
    Coincident,
}

pub fn knots_to_mps(knots: f64) -> f64 {
    knots * MPS_PER_KNOT
}

pub fn mps_to_knots(mps: f64) -> f64 {
    mps / MPS_PER_KNOT
}

/// Normalizes an angle to `[0, 2π)`.
pub fn wrap_2pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Normalizes an angle to `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let a = wrap_2pi(angle);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Normalizes degrees to `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Normalizes degrees to `(-180, 180]`.
pub fn wrap_180(deg: f64) -> f64 {
    let a = wrap_360(deg);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// Geographic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPosition {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPosition {
    /// Builds a position, normalizing longitude to `[-180, 180)`.
    pub fn new(lon: f64, lat: f64) -> Result<Self, KinematicsError> {
        if !lon.is_finite() || !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(KinematicsError::InvalidPosition { lon, lat });
        }
        let lon = if (-180.0..180.0).contains(&lon) {
            lon
        } else {
            (lon + 180.0).rem_euclid(360.0) - 180.0
        };
        Ok(Self { lon, lat })
    }
}

/// Point in the scenario's local frame: meters east (`x`) and north (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// True bearing from `self` to `other`, radians clockwise from north.
    pub fn bearing_to(&self, other: &LocalPoint) -> f64 {
        wrap_2pi((other.x - self.x).atan2(other.y - self.y))
    }

    /// Point reached by moving `distance` meters along true `course`.
    pub fn offset(&self, course: f64, distance: f64) -> LocalPoint {
        LocalPoint::new(
            self.x + distance * course.sin(),
            self.y + distance * course.cos(),
        )
    }
}

/// Speed and course over ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    /// m/s, never negative
    pub sog: f64,
    /// radians in `[0, 2π)`
    pub cog: f64,
}

impl Velocity {
    pub fn new(sog: f64, cog: f64) -> Self {
        Self {
            sog: sog.max(0.0),
            cog: wrap_2pi(cog),
        }
    }

    /// Cartesian components `(east, north)` in m/s.
    pub fn components(&self) -> (f64, f64) {
        (self.sog * self.cog.sin(), self.sog * self.cog.cos())
    }
}

/// Closest point of approach between an ordered (own, target) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaResult {
    /// current distance, meters
    pub range: f64,
    /// clockwise from own course to the target, radians `[0, 2π)`
    pub relative_bearing: f64,
    /// meters, never larger than `range`
    pub dcpa: f64,
    /// seconds, negative once the pair is opening
    pub tcpa: f64,
}

impl CpaResult {
    /// The pair is approaching each other.
    pub fn is_closing(&self) -> bool {
        self.tcpa > 0.0
    }
}

/// Equirectangular projection of `p` around `origin`.
pub fn project(origin: GeoPosition, p: GeoPosition) -> Result<LocalPoint, KinematicsError> {
    let dlat = p.lat - origin.lat;
    let dlon = wrap_180(p.lon - origin.lon);
    if dlat.abs() >= PROJECTION_LIMIT_DEG || dlon.abs() >= PROJECTION_LIMIT_DEG {
        return Err(KinematicsError::OutOfRange {
            lon: p.lon,
            lat: p.lat,
        });
    }
    let x = EARTH_RADIUS_M * origin.lat.to_radians().cos() * dlon.to_radians();
    let y = EARTH_RADIUS_M * dlat.to_radians();
    Ok(LocalPoint { x, y })
}

/// Inverse of [`project`].
pub fn unproject(origin: GeoPosition, p: LocalPoint) -> GeoPosition {
    let dlat = (p.y / EARTH_RADIUS_M).to_degrees();
    let dlon = (p.x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    let lon = origin.lon + dlon;
    GeoPosition {
        lon: if (-180.0..180.0).contains(&lon) {
            lon
        } else {
            (lon + 180.0).rem_euclid(360.0) - 180.0
        },
        lat: origin.lat + dlat,
    }
}

/// Clockwise angle from the own bow to the line of sight towards `target_pos`.
pub fn relative_bearing(
    own_heading: f64,
    own_pos: LocalPoint,
    target_pos: LocalPoint,
) -> Result<f64, KinematicsError> {
    if own_pos == target_pos {
        return Err(KinematicsError::Coincident);
    }
    Ok(wrap_2pi(own_pos.bearing_to(&target_pos) - own_heading))
}

/// Closed-form CPA under straight-line extrapolation of both ships.
///
/// The relative bearing is measured from the own course over ground. For
/// coincident positions it is reported as zero.
pub fn cpa(own: (LocalPoint, Velocity), target: (LocalPoint, Velocity)) -> CpaResult {
    let (own_pos, own_vel) = own;
    let (tgt_pos, tgt_vel) = target;
    let rx = tgt_pos.x - own_pos.x;
    let ry = tgt_pos.y - own_pos.y;
    let (ovx, ovy) = own_vel.components();
    let (tvx, tvy) = tgt_vel.components();
    let vx = tvx - ovx;
    let vy = tvy - ovy;

    let range = rx.hypot(ry);
    let relative_bearing = relative_bearing(own_vel.cog, own_pos, tgt_pos).unwrap_or(0.0);

    let v2 = vx * vx + vy * vy;
    if v2.sqrt() < REL_SPEED_EPS {
        return CpaResult {
            range,
            relative_bearing,
            dcpa: range,
            tcpa: 0.0,
        };
    }
    let tcpa = -(rx * vx + ry * vy) / v2;
    let t = tcpa.max(0.0);
    let dcpa = if t == 0.0 {
        range
    } else {
        (rx + vx * t).hypot(ry + vy * t).min(range)
    };
    CpaResult {
        range,
        relative_bearing,
        dcpa,
        tcpa,
    }
}
