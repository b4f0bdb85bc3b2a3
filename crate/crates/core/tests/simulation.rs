mod common;

use common::{fixture, fixture_names, own_min, run_rule, NM};

use navagent::agent::RuleCore;
use navagent::colregs::{EncounterType, Maneuver, RiskLevel};
use navagent::kinematics::{unproject, wrap_180, LocalPoint};
use navagent::simulator::{
    compute_metrics, maneuver_complies, run, ConfigError, DecisionTrigger, EndReason, Event,
    LogError, LogRecord, Role, ScenarioConfig, SimulationLog,
};
use navagent::zones::Zone;

fn own_track(log: &SimulationLog) -> Vec<(f64, navagent::dynamics::ShipState)> {
    log.steps().map(|(t, ships)| (t, ships[0].state)).collect()
}

fn box_zone(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Zone {
    Zone {
        id: id.into(),
        polygon: vec![
            LocalPoint::new(x0, y0),
            LocalPoint::new(x1, y0),
            LocalPoint::new(x1, y1),
            LocalPoint::new(x0, y1),
        ],
        side: "starboard".into(),
        description: "A large area of fishing nets".into(),
    }
}

#[test]
fn open_water_goes_straight_to_the_goal() {
    let r = run_rule("no_risk");
    let maneuvers: Vec<Maneuver> = r.log.decisions().map(|d| d.applied().maneuver).collect();
    assert!(!maneuvers.is_empty());
    assert!(maneuvers.iter().all(|m| *m == Maneuver::ResumeCourse), "{maneuvers:?}");
    for (_, s) in own_track(&r.log) {
        assert!(wrap_180(s.heading.to_degrees()).abs() < 0.01);
    }
    assert!(r.metrics.goal_reached);
    assert!(r.metrics.colregs_flags.is_empty());
    assert_eq!(r.log.end().unwrap().1, EndReason::GoalReached);
}

#[test]
fn three_ship_scene_keeps_half_the_safe_distance() {
    let r = run_rule("three_ship");
    let cfg = r.log.config();
    let half = cfg.thresholds.d_safe / 2.0;
    for ts in ["A", "B"] {
        let d = own_min(&r.metrics, "OS", ts);
        assert!(d >= half, "{ts}: {:.3} nm", d / NM);
    }
    assert!(r.metrics.goal_reached);
    assert!(r.metrics.goal_time.unwrap() <= cfg.duration);
}

#[test]
fn targets_hold_course_and_speed() {
    for name in fixture_names() {
        let r = run_rule(&name);
        let mut first: std::collections::BTreeMap<String, (f64, navagent::dynamics::ShipState)> =
            Default::default();
        for (t, ships) in r.log.steps() {
            for s in &ships[1..] {
                let (t0, s0) = *first.entry(s.id.clone()).or_insert((t, s.state));
                assert_eq!(s.state.heading, s0.heading, "{name}/{}", s.id);
                assert_eq!(s.state.speed, s0.speed, "{name}/{}", s.id);
                assert_eq!(s.state.rudder, 0.0);
                let p = s0.extrapolate(t - t0);
                assert!(p.distance(&s.state.pos) < 1e-6, "{name}/{} at {t}", s.id);
            }
        }
    }
}

#[test]
fn rudder_limits_hold_everywhere() {
    for name in fixture_names() {
        let r = run_rule(&name);
        let cfg = r.log.config();
        let p = cfg.own_spec().params;
        let max = p.max_rudder_angle.to_radians() + 1e-12;
        let step = p.max_rudder_rate.to_radians() * cfg.dt + 1e-12;
        let track = own_track(&r.log);
        for w in track.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            assert!(b.rudder.abs() <= max, "{name} at {}", w[1].0);
            assert!((b.rudder - a.rudder).abs() <= step, "{name} at {}", w[1].0);
            assert!((0.0..std::f64::consts::TAU).contains(&b.heading));
            assert!(b.speed >= 0.0);
        }
    }
}

#[test]
fn events_wait_for_the_next_step() {
    let mut cfg = fixture("head_on");
    cfg.decide_on_event = false;
    let mut late = cfg.ships.iter().find(|s| s.role == Role::Target).unwrap().clone();
    late.id = "L".into();
    late.start.lat -= 0.01;
    cfg.events.push(Event::PopUpShip { at: 47.3, ship: late });
    cfg.validate().unwrap();

    let log = run(&cfg, &RuleCore).unwrap();
    let (t_event, _) = log.events().next().unwrap();
    assert_eq!(t_event, 47.5);
    for d in log.decisions() {
        assert_eq!(d.trigger, DecisionTrigger::Interval);
        let sees = d.assessments.iter().any(|a| a.target == "L");
        assert_eq!(sees, d.t >= 47.3, "decision at {}", d.t);
    }
    let first_step_with = log
        .steps()
        .find(|(_, ships)| ships.iter().any(|s| s.id == "L"))
        .unwrap()
        .0;
    assert_eq!(first_step_with, 47.5);

    cfg.decide_on_event = true;
    let log = run(&cfg, &RuleCore).unwrap();
    let d = log.decisions().find(|d| d.trigger == DecisionTrigger::Event).unwrap();
    assert_eq!(d.t, 47.5);
}

#[test]
fn halving_the_step_barely_moves_the_track() {
    let mut fine = fixture("head_on");
    fine.stop_at_goal = false;
    fine.duration = 1800.0;
    let mut coarse = fine.clone();
    coarse.dt = 1.0;

    let end = |cfg: &ScenarioConfig| {
        let log = run(cfg, &RuleCore).unwrap();
        let track = own_track(&log);
        (track[0].1.pos, track.last().unwrap().1.pos)
    };
    let (start, a) = end(&fine);
    let (_, b) = end(&coarse);
    let travelled = start.distance(&a);
    let rel = a.distance(&b) / travelled;
    assert!(rel < 0.01, "{:.4}% of {travelled:.0} m", rel * 100.0);
}

fn geo(cfg: &ScenarioConfig, x: f64, y: f64) -> navagent::kinematics::GeoPosition {
    unproject(cfg.origin, LocalPoint::new(x, y))
}

#[test]
fn stationary_pair_distance() {
    let mut cfg = fixture("no_risk");
    cfg.duration = 60.0;
    cfg.ships[0].speed_kn = 0.0;
    cfg.ships[0].goal = None;
    let mut other = cfg.ships[0].clone();
    other.id = "B".into();
    other.role = Role::Target;
    other.start = geo(&cfg, 600.0, 800.0);
    cfg.ships.push(other);

    let m = compute_metrics(&run(&cfg, &RuleCore).unwrap());
    let p = m.pair("OS", "B").unwrap();
    assert!((p.min_distance - 1000.0).abs() < 1e-6, "{}", p.min_distance);
    assert_eq!(m.min_own_distance, Some(p.min_distance));
    assert!(!m.goal_reached);
    assert_eq!(m.zone_incursions, 0);
}

#[test]
fn head_on_decision_is_flagged_compliant() {
    let m = run_rule("head_on").metrics;
    let first = &m.colregs_flags[0];
    assert_eq!(first.encounter, EncounterType::HeadOn);
    assert_eq!(first.maneuver, Maneuver::StarboardTurn);
    assert!(first.compliant);
    assert!(m.colregs_compliant);
    assert_eq!(m.first_avoidance.as_ref().unwrap().target, "A");
}

#[test]
fn a_zone_dropped_on_the_track_is_an_incursion() {
    let mut cfg = fixture("no_risk");
    cfg.decide_on_event = false;
    cfg.decision_interval = cfg.duration;
    cfg.events.push(Event::ZoneAppears {
        at: 100.0,
        zone: box_zone("nets", -200.0, 1000.0, 200.0, 1400.0),
    });
    let log = run(&cfg, &RuleCore).unwrap();
    assert_eq!(log.decisions().count(), 1);
    let m = compute_metrics(&log);
    assert_eq!(m.zone_incursions, 1);
    assert!(m.goal_reached);
}

#[test]
fn compliance_table() {
    use EncounterType::*;
    use Maneuver::*;
    let gw = RiskLevel::GiveWay;
    let cr = RiskLevel::Critical;
    let rows = [
        (HeadOn, gw, StarboardTurn, true),
        (HeadOn, gw, PortTurn, false),
        (HeadOn, gw, StandOn, false),
        (HeadOn, cr, Stop, true),
        (StarboardCrossingSmall, gw, SlowDown, true),
        (StarboardCrossingLarge, gw, PortTurn, false),
        (Overtaking, gw, StarboardTurn, true),
        (PortCrossing, gw, StandOn, true),
        (PortCrossing, gw, StarboardTurn, false),
        (PortCrossing, cr, StarboardTurn, true),
        (PortCrossing, cr, PortTurn, false),
        (BeingOvertaken, gw, StandOn, true),
        (BeingOvertaken, gw, PortTurn, false),
        (BeingOvertaken, cr, PortTurn, true),
    ];
    for (e, r, m, want) in rows {
        assert_eq!(maneuver_complies(e, r, m), want, "{e} {r:?} {m}");
    }
}

#[test]
fn saved_logs_reload_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["three_ship", "fishing_nets", "popup"] {
        let r = run_rule(name);
        let a = dir.path().join(format!("{name}.jsonl"));
        r.log.save(&a).unwrap();
        assert!(SimulationLog::latency_path(&a).exists());
        let back = SimulationLog::load(&a).unwrap();
        assert_eq!(back.records, r.log.records);
        assert_eq!(back.latencies.len(), r.log.latencies.len());
        let b = dir.path().join(format!("{name}.again.jsonl"));
        back.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(compute_metrics(&back), r.metrics);
    }
}

#[test]
fn damaged_logs_name_the_line() {
    let text = run_rule("head_on").log.to_jsonl();
    let lines: Vec<&str> = text.lines().collect();

    let truncated = lines[..lines.len() - 1].join("\n");
    match SimulationLog::from_jsonl(&truncated) {
        Err(LogError::Schema { line, message }) => {
            assert_eq!(line, lines.len() - 1);
            assert!(message.contains("truncated"), "{message}");
        }
        other => panic!("{other:?}"),
    }

    let mut broken: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    broken[5] = broken[5].replacen("\"t\":", "\"time\":", 1);
    match SimulationLog::from_jsonl(&broken.join("\n")) {
        Err(LogError::Schema { line, .. }) => assert_eq!(line, 6),
        other => panic!("{other:?}"),
    }

    assert!(matches!(
        SimulationLog::from_jsonl(&lines[1..].join("\n")),
        Err(LogError::Schema { line: 1, .. })
    ));
}

#[test]
fn plot_tables_have_headers() {
    let log = run_rule("three_ship").log;
    let mut track = Vec::new();
    log.write_track_csv(&mut track).unwrap();
    let track = String::from_utf8(track).unwrap();
    assert_eq!(
        track.lines().next().unwrap(),
        "time_s,ship,x_m,y_m,lon,lat,heading_deg,speed_kn,rudder_deg"
    );
    assert_eq!(track.lines().count(), 1 + 3 * log.steps().count());

    let mut dist = Vec::new();
    log.write_distance_csv(&mut dist).unwrap();
    let dist = String::from_utf8(dist).unwrap();
    assert_eq!(dist.lines().next().unwrap(), "time_s,ship_a,ship_b,distance_m");
}

#[test]
fn live_header_carries_the_config() {
    let cfg = fixture("popup");
    let log = run(&cfg, &RuleCore).unwrap();
    match &log.records[0] {
        LogRecord::Header { schema, config } => {
            assert_eq!(schema, navagent::simulator::LOG_SCHEMA);
            assert_eq!(config, &cfg);
        }
        other => panic!("{other:?}"),
    }
}

fn rejects(cfg: &ScenarioConfig, needle: &str) {
    match cfg.validate() {
        Err(ConfigError::Invalid(msg)) => assert!(msg.contains(needle), "{msg}"),
        other => panic!("expected rejection mentioning `{needle}`, got {other:?}"),
    }
}

#[test]
fn bad_configs_are_rejected() {
    let base = fixture("three_ship");

    let mut c = base.clone();
    c.dt = 0.0;
    rejects(&c, "dt");

    let mut c = base.clone();
    c.duration = 100.25;
    rejects(&c, "duration");

    let mut c = base.clone();
    c.decision_interval = 7.3;
    rejects(&c, "decision_interval");

    let mut c = base.clone();
    c.ships[1].role = Role::Own;
    rejects(&c, "exactly one OS");

    let mut c = base.clone();
    c.ships[2].id = c.ships[1].id.clone();
    rejects(&c, "duplicate ship id");

    let mut c = base.clone();
    c.ships[1].speed_kn = -1.0;
    rejects(&c, "speed_kn");

    let mut c = base.clone();
    c.events.push(Event::ZoneClears {
        at: c.duration + 1.0,
        id: "x".into(),
    });
    rejects(&c, "outside");

    let mut c = base.clone();
    let mut bow = box_zone("bow", 0.0, 0.0, 100.0, 100.0);
    bow.polygon.swap(1, 2);
    c.events.push(Event::ZoneAppears { at: 0.0, zone: bow });
    rejects(&c, "not simple");

    let mut c = base.clone();
    c.events.push(Event::ZoneClears { at: 5.0, id: "ghost".into() });
    rejects(&c, "unknown zone");

    assert!(matches!(
        ScenarioConfig::from_json("{\"name\": \"x\"}"),
        Err(ConfigError::Parse(_))
    ));
    assert!(matches!(
        ScenarioConfig::load(std::path::Path::new("/nonexistent/scenario.json")),
        Err(ConfigError::Io { .. })
    ));
}
