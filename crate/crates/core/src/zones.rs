//! Polygonal no-go zones (fishing nets, restricted areas).

use serde::{Deserialize, Serialize};

use crate::kinematics::LocalPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    /// vertices in order, implicitly closed
    pub polygon: Vec<LocalPoint>,
    /// side word used in scene text, e.g. "starboard"
    pub side: String,
    /// noun phrase used in scene text, e.g. "A large area of fishing nets"
    #[serde(default = "default_description")]
    pub description: String,
}

fn default_description() -> String {
    "A no-go area".to_string()
}

impl Zone {
    pub fn contains(&self, p: &LocalPoint) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    /// Distance from `p` to the zone; zero inside.
    pub fn distance(&self, p: &LocalPoint) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        edges(&self.polygon)
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

fn edges(poly: &[LocalPoint]) -> impl Iterator<Item = (&LocalPoint, &LocalPoint)> {
    let n = poly.len();
    (0..n).map(move |i| (&poly[i], &poly[(i + 1) % n]))
}

/// Even-odd ray casting.
pub fn point_in_polygon(p: &LocalPoint, poly: &[LocalPoint]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(p: &LocalPoint, a: &LocalPoint, b: &LocalPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&LocalPoint::new(a.x + t * dx, a.y + t * dy))
}

fn orient(a: &LocalPoint, b: &LocalPoint, c: &LocalPoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: &LocalPoint, b: &LocalPoint, c: &LocalPoint, d: &LocalPoint) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

/// At least three vertices and no two non-adjacent edges crossing.
pub fn is_simple(poly: &[LocalPoint]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            let (c, d) = (&poly[j], &poly[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
