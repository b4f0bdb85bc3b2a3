//! Scene snapshots and their canonical text rendering.
//!
//! Template, one line per entity:
//!
//! ```text
//! [Own Ship] position: (<lon>, <lat>); speed: <kn> kn; course: <ddd.d> deg.
//! [Own Ship] goal: (<lon>, <lat>); distance: <nm> nm; bearing: <ddd.d> deg.
//! [Target <id>] position: (<lon>, <lat>); speed: <kn> kn; course: <ddd.d> deg; range: <nm> nm; relative bearing: <ddd.d> deg; DCPA: <nm> nm; TCPA: <min> min; encounter: <phrase>; risk: <phrase>[; priority: <n>].
//! ```
//!
//! followed by one sentence per newly detected target and one per no-go zone.
//! Coordinates carry 6 decimals, distances 2, speeds, angles and minutes 1.
//! Angles are zero-padded to three integer digits and stay in `[000.0, 360.0)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colregs::{assess_target, prioritize, ColregsError, EncounterAssessment, RiskThresholds};
use crate::dynamics::ShipState;
use crate::kinematics::{mps_to_knots, unproject, wrap_360, GeoPosition, LocalPoint, METERS_PER_NM};
use crate::zones::Zone;

/// The system prompt shipped with the crate.
pub const DEFAULT_SYSTEM_PROMPT: &str = include_str!("../assets/system_prompt.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepictionError {
    #[error("system prompt template is empty")]
    EmptyTemplate,
    #[error(transparent)]
    Colregs(#[from] ColregsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnSnapshot {
    pub state: ShipState,
    pub goal: Option<LocalPoint>,
    /// active course order, radians
    pub course_order: f64,
    /// active speed order, m/s
    pub speed_order: f64,
    /// service speed to resume after avoidance, m/s
    pub cruise_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSnapshot {
    pub id: String,
    pub state: ShipState,
    pub assessment: EncounterAssessment,
    /// first snapshot in which this target is present
    pub new_contact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSnapshot {
    pub zone: Zone,
    /// first snapshot in which this zone is present
    pub newly_appeared: bool,
}

/// Observation of the scene from the own ship at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    /// seconds since scenario start
    pub time: f64,
    pub origin: GeoPosition,
    pub own: OwnSnapshot,
    /// ordered by id
    pub targets: Vec<TargetSnapshot>,
    pub zones: Vec<ZoneSnapshot>,
}

/// A target as seen by sensors, before assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub id: String,
    pub state: ShipState,
    pub new_contact: bool,
}

impl SceneSnapshot {
    /// Builds a snapshot, computing CPA, encounter, risk and priority for every target.
    pub fn assemble(
        time: f64,
        origin: GeoPosition,
        own: OwnSnapshot,
        contacts: &[Contact],
        zones: Vec<ZoneSnapshot>,
        thresholds: &RiskThresholds,
    ) -> Result<Self, ColregsError> {
        let mut assessments = Vec::with_capacity(contacts.len());
        for c in contacts {
            assessments.push(assess_target(&own.state, &c.id, &c.state, thresholds)?);
        }
        let assessments = prioritize(assessments);
        let mut targets: Vec<TargetSnapshot> = contacts
            .iter()
            .map(|c| TargetSnapshot {
                id: c.id.clone(),
                state: c.state,
                assessment: assessments
                    .iter()
                    .find(|a| a.target_id == c.id)
                    .cloned()
                    .expect("every contact assessed"),
                new_contact: c.new_contact,
            })
            .collect();
        targets.sort_by(|a, b| a.id.cmp(&b.id));
        let mut zones = zones;
        zones.sort_by(|a, b| a.zone.id.cmp(&b.zone.id));
        Ok(Self {
            time,
            origin,
            own,
            targets,
            zones,
        })
    }

    pub fn target(&self, id: &str) -> Option<&TargetSnapshot> {
        self.targets.iter().find(|t| t.id == id)
    }

    /// Assessments in priority order (at-risk first).
    pub fn assessments(&self) -> Vec<EncounterAssessment> {
        let mut v: Vec<_> = self.targets.iter().map(|t| t.assessment.clone()).collect();
        v.sort_by_key(|a| (a.priority.unwrap_or(u32::MAX), a.target_id.clone()));
        v
    }

    pub fn any_at_risk(&self) -> bool {
        self.targets.iter().any(|t| t.assessment.risk.is_at_risk())
    }
}

fn no_neg_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

pub(crate) fn fmt_deg(rad: f64) -> String {
    let d = (wrap_360(rad.to_degrees()) * 10.0).round() / 10.0;
    format!("{:05.1}", no_neg_zero(wrap_360(d)))
}

pub(crate) fn fmt_nm(m: f64) -> String {
    format!("{:.2}", no_neg_zero((m / METERS_PER_NM * 100.0).round() / 100.0))
}

pub(crate) fn fmt_kn(mps: f64) -> String {
    format!("{:.1}", no_neg_zero((mps_to_knots(mps) * 10.0).round() / 10.0))
}

fn fmt_min(s: f64) -> String {
    format!("{:.1}", no_neg_zero((s / 60.0 * 10.0).round() / 10.0))
}

fn fmt_geo(g: GeoPosition) -> String {
    format!("({:.6}, {:.6})", no_neg_zero(g.lon), no_neg_zero(g.lat))
}

fn nav_fields(origin: GeoPosition, s: &ShipState) -> String {
    format!(
        "position: {}; speed: {} kn; course: {} deg",
        fmt_geo(unproject(origin, s.pos)),
        fmt_kn(s.speed),
        fmt_deg(s.heading)
    )
}

/// Canonical text for a snapshot. Lines are joined by `\n`, no trailing newline.
pub fn depict(snapshot: &SceneSnapshot) -> String {
    render(snapshot, true)
}

/// [`depict`] without the `encounter` field, for encounter-classification inputs.
pub fn depict_unlabeled(snapshot: &SceneSnapshot) -> String {
    render(snapshot, false)
}

fn render(snapshot: &SceneSnapshot, with_encounter: bool) -> String {
    let o = snapshot.origin;
    let own = &snapshot.own;
    let mut lines = vec![format!("[Own Ship] {}.", nav_fields(o, &own.state))];
    if let Some(goal) = own.goal {
        lines.push(format!(
            "[Own Ship] goal: {}; distance: {} nm; bearing: {} deg.",
            fmt_geo(unproject(o, goal)),
            fmt_nm(own.state.pos.distance(&goal)),
            fmt_deg(own.state.pos.bearing_to(&goal))
        ));
    }
    let mut targets: Vec<&TargetSnapshot> = snapshot.targets.iter().collect();
    targets.sort_by(|a, b| a.id.cmp(&b.id));
    for t in &targets {
        let a = &t.assessment;
        let mut line = format!(
            "[Target {}] {}; range: {} nm; relative bearing: {} deg; DCPA: {} nm; TCPA: {} min",
            t.id,
            nav_fields(o, &t.state),
            fmt_nm(a.cpa.range),
            fmt_deg(a.cpa.relative_bearing),
            fmt_nm(a.cpa.dcpa),
            fmt_min(a.cpa.tcpa),
        );
        if with_encounter {
            line.push_str(&format!("; encounter: {}", a.encounter.phrase()));
        }
        line.push_str(&format!("; risk: {}", a.risk.phrase()));
        if let Some(p) = a.priority {
            line.push_str(&format!("; priority: {p}"));
        }
        line.push('.');
        lines.push(line);
    }
    for t in targets.iter().filter(|t| t.new_contact) {
        lines.push(format!(
            "An unplanned ship, Target {}, is suddenly detected.",
            t.id
        ));
    }
    let mut zones: Vec<&ZoneSnapshot> = snapshot.zones.iter().collect();
    zones.sort_by(|a, b| a.zone.id.cmp(&b.zone.id));
    for z in zones {
        if z.newly_appeared {
            lines.push(format!(
                "{} suddenly appears on the {} side.",
                z.zone.description, z.zone.side
            ));
        } else {
            lines.push(format!(
                "{} remains on the {} side; nearest edge: {} nm.",
                z.zone.description,
                z.zone.side,
                fmt_nm(z.zone.distance(&own.state.pos))
            ));
        }
    }
    lines.join("\n")
}

/// System prompt, scene text and tool feedback, in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub scene: String,
    pub tool_feedback: Vec<String>,
}

impl PromptBundle {
    /// All blocks in their fixed order.
    pub fn blocks(&self) -> Vec<&str> {
        let mut v = vec![self.system.as_str(), self.scene.as_str()];
        v.extend(self.tool_feedback.iter().map(String::as_str));
        v
    }

    /// Text of the user turn: scene followed by the feedback blocks.
    pub fn user_message(&self) -> String {
        let mut v = vec![self.scene.as_str()];
        v.extend(self.tool_feedback.iter().map(String::as_str));
        v.join("\n\n")
    }

    pub fn render(&self) -> String {
        self.blocks().join("\n\n")
    }
}

pub fn build_prompt(
    system_template: &str,
    snapshot: &SceneSnapshot,
    feedback: &[String],
) -> Result<PromptBundle, DepictionError> {
    if system_template.trim().is_empty() {
        return Err(DepictionError::EmptyTemplate);
    }
    Ok(PromptBundle {
        system: system_template.to_string(),
        scene: depict(snapshot),
        tool_feedback: feedback.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colregs::EncounterType;
    use crate::dynamics::state_from_nav;
    use crate::kinematics::knots_to_mps;

    const ORIGIN: GeoPosition = GeoPosition {
        lon: 122.445374,
        lat: 31.257936,
    };

    fn own_only() -> SceneSnapshot {
        let state = state_from_nav(LocalPoint::default(), 0.0, 8.0);
        SceneSnapshot {
            time: 0.0,
            origin: ORIGIN,
            own: OwnSnapshot {
                state,
                goal: None,
                course_order: 0.0,
                speed_order: state.speed,
                cruise_speed: state.speed,
            },
            targets: vec![],
            zones: vec![],
        }
    }

    #[test]
    fn own_ship_line_golden() {
        assert_eq!(
            depict(&own_only()),
            "[Own Ship] position: (122.445374, 31.257936); speed: 8.0 kn; course: 000.0 deg."
        );
    }

    #[test]
    fn angle_formatting_edges() {
        assert_eq!(fmt_deg(359.96f64.to_radians()), "000.0");
        assert_eq!(fmt_deg(48.64f64.to_radians()), "048.6");
        assert_eq!(fmt_deg(-0.0), "000.0");
        assert_eq!(fmt_kn(knots_to_mps(-0.0)), "0.0");
    }

    fn with_target(beta_deg: f64, course: f64) -> SceneSnapshot {
        let s = own_only();
        let p = LocalPoint::default().offset(beta_deg.to_radians(), 4000.0);
        let contacts = vec![Contact {
            id: "A".into(),
            state: state_from_nav(p, course, 10.0),
            new_contact: false,
        }];
        SceneSnapshot::assemble(
            0.0,
            ORIGIN,
            s.own,
            &contacts,
            vec![],
            &RiskThresholds::default(),
        )
        .unwrap()
    }

    #[test]
    fn crossing_phrase_present() {
        let snap = with_target(45.0, 270.0);
        assert_eq!(
            snap.targets[0].assessment.encounter,
            EncounterType::StarboardCrossingSmall
        );
        let text = depict(&snap);
        assert!(text.contains("encounter: starboard crossing (small angle)"), "{text}");
    }

    #[test]
    fn zone_sentence_on_appearance() {
        let mut snap = own_only();
        snap.zones.push(ZoneSnapshot {
            zone: Zone {
                id: "nets".into(),
                polygon: vec![
                    LocalPoint::new(300.0, -500.0),
                    LocalPoint::new(2000.0, -500.0),
                    LocalPoint::new(2000.0, 1500.0),
                    LocalPoint::new(300.0, 1500.0),
                ],
                side: "starboard".into(),
                description: "A large area of fishing nets".into(),
            },
            newly_appeared: true,
        });
        let text = depict(&snap);
        assert!(text
            .lines()
            .any(|l| l == "A large area of fishing nets suddenly appears on the starboard side."));
        snap.zones[0].newly_appeared = false;
        assert!(depict(&snap).contains("remains on the starboard side; nearest edge: 0.16 nm."));
    }

    #[test]
    fn prompt_bundle_order() {
        let snap = with_target(45.0, 270.0);
        let b = build_prompt("sys", &snap, &[]).unwrap();
        assert_eq!(b.blocks().len(), 2);
        let b2 = build_prompt("sys", &snap, &[]).unwrap();
        assert_eq!(b.render(), b2.render());
        let fb = vec!["cpa block".to_string(), "risk block".to_string()];
        let b = build_prompt("sys", &snap, &fb).unwrap();
        let r = b.render();
        assert!(r.starts_with("sys\n\n[Own Ship]"));
        assert!(r.find("cpa block").unwrap() < r.find("risk block").unwrap());
        assert_eq!(build_prompt("  ", &snap, &[]), Err(DepictionError::EmptyTemplate));
    }
}
