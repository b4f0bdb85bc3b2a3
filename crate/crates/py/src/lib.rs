//! Python bindings. Angles cross the boundary in degrees, speeds in knots,
//! distances in meters; structured results travel as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use navagent::agent::{format_final_answer, parse_action as parse_response, ParsedResponse, ScriptedCore, RuleCore, DecisionCore};
use navagent::colregs::{self, RiskThresholds};
use navagent::datasets::{self, SceneGeometry};
use navagent::depiction;
use navagent::dynamics::{state_from_nav, ShipState};
use navagent::kinematics::{self, GeoPosition, LocalPoint};
use navagent::simulator::{self, ScenarioConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ship(x: f64, y: f64, course_deg: f64, speed_kn: f64) -> ShipState {
    state_from_nav(LocalPoint::new(x, y), course_deg, speed_kn)
}

/// Local east/north meters of `(lon, lat)` around the origin.
#[pyfunction]
fn project(origin_lon: f64, origin_lat: f64, lon: f64, lat: f64) -> PyResult<(f64, f64)> {
    let origin = GeoPosition::new(origin_lon, origin_lat).map_err(value_err)?;
    let p = GeoPosition::new(lon, lat).map_err(value_err)?;
    let q = kinematics::project(origin, p).map_err(value_err)?;
    Ok((q.x, q.y))
}

#[pyfunction]
fn unproject(origin_lon: f64, origin_lat: f64, x: f64, y: f64) -> PyResult<(f64, f64)> {
    let origin = GeoPosition::new(origin_lon, origin_lat).map_err(value_err)?;
    let g = kinematics::unproject(origin, LocalPoint::new(x, y));
    Ok((g.lon, g.lat))
}

/// `(range_m, relative_bearing_deg, dcpa_m, tcpa_s)` for own and target
/// given as `(x, y, course_deg, speed_kn)`.
#[pyfunction]
fn cpa(own: (f64, f64, f64, f64), target: (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    let o = ship(own.0, own.1, own.2, own.3);
    let t = ship(target.0, target.1, target.2, target.3);
    let c = kinematics::cpa((o.pos, o.velocity()), (t.pos, t.velocity()));
    (c.range, c.relative_bearing.to_degrees(), c.dcpa, c.tcpa)
}

/// Encounter type name of the target as seen from the own ship.
#[pyfunction]
fn classify(own: (f64, f64, f64, f64), target: (f64, f64, f64, f64)) -> PyResult<&'static str> {
    let o = ship(own.0, own.1, own.2, own.3);
    let t = ship(target.0, target.1, target.2, target.3);
    colregs::classify(&o, &t).map(|e| e.as_str()).map_err(value_err)
}

/// Risk grade name with default thresholds.
#[pyfunction]
fn assess_risk(range_m: f64, dcpa_m: f64, tcpa_s: f64) -> &'static str {
    let c = kinematics::CpaResult {
        range: range_m,
        relative_bearing: 0.0,
        dcpa: dcpa_m,
        tcpa: tcpa_s,
    };
    match colregs::assess_risk(&c, &RiskThresholds::default()) {
        colregs::RiskLevel::None => "None",
        colregs::RiskLevel::Watch => "Watch",
        colregs::RiskLevel::GiveWay => "GiveWay",
        colregs::RiskLevel::Critical => "Critical",
    }
}

fn geometry(json: &str) -> PyResult<SceneGeometry> {
    let g: SceneGeometry = serde_json::from_str(json).map_err(value_err)?;
    if g.targets.iter().any(|t| t.ship.x == g.own.x && t.ship.y == g.own.y) {
        return Err(PyValueError::new_err("a target coincides with the own ship"));
    }
    Ok(g)
}

/// Scene text for a geometry JSON object (`own`, optional `goal`, `targets`).
#[pyfunction]
#[pyo3(signature = (geometry_json, labeled = true))]
fn depict(geometry_json: &str, labeled: bool) -> PyResult<String> {
    let snap = geometry(geometry_json)?.snapshot(&RiskThresholds::default());
    Ok(if labeled {
        depiction::depict(&snap)
    } else {
        depiction::depict_unlabeled(&snap)
    })
}

/// Rule-based final answer for a geometry, after forward validation.
#[pyfunction]
fn rule_decision(geometry_json: &str) -> PyResult<String> {
    let g = geometry(geometry_json)?;
    Ok(format_final_answer(&datasets::label_decision(&g)))
}

/// Parses one core response. Returns a JSON object with `kind` set to
/// `action` or `final`; grammar violations raise `ValueError`.
#[pyfunction]
fn parse_action(response: &str) -> PyResult<String> {
    let v = match parse_response(response).map_err(value_err)? {
        ParsedResponse::Action { thought, call } => serde_json::json!({
            "kind": "action",
            "thought": thought,
            "tool": call.tool,
            "args": call.args,
        }),
        ParsedResponse::Final { thought, decision } => serde_json::json!({
            "kind": "final",
            "thought": thought,
            "maneuver": decision.maneuver.as_str(),
            "course_order_deg": decision.course_order_deg(),
            "speed_order_kn": decision.speed_order_kn(),
            "rationale": decision.rationale,
        }),
    };
    Ok(v.to_string())
}

/// Runs a scenario config (JSON text). `script` is a JSON array of core
/// replies for a scripted core; without it the rule core decides.
/// Returns `(log_jsonl, metrics_json)`.
#[pyfunction]
#[pyo3(signature = (config_json, script = None))]
fn simulate(py: Python<'_>, config_json: &str, script: Option<&str>) -> PyResult<(String, String)> {
    let config = ScenarioConfig::from_json(config_json).map_err(value_err)?;
    let core: Box<dyn DecisionCore> = match script {
        Some(s) => Box::new(ScriptedCore::from_json(s).map_err(value_err)?),
        None => Box::new(RuleCore),
    };
    let log = py
        .detach(|| simulator::run(&config, core.as_ref()))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let metrics = simulator::compute_metrics(&log);
    Ok((log.to_jsonl(), metrics.to_json()))
}

/// SETD records as JSONL with a header line.
#[pyfunction]
#[pyo3(signature = (n, seed, per_trajectory = 1))]
fn gen_setd(py: Python<'_>, n: usize, seed: u64, per_trajectory: usize) -> PyResult<String> {
    let records = py
        .detach(|| datasets::gen_setd_with(n, seed, per_trajectory))
        .map_err(value_err)?;
    Ok(datasets::to_jsonl(&datasets::setd_header(n, seed, per_trajectory), &records))
}

/// SCADD records as JSONL with a header line.
#[pyfunction]
fn gen_scadd(py: Python<'_>, n: usize, seed: u64) -> PyResult<String> {
    let records = py.detach(|| datasets::gen_scadd(n, seed)).map_err(value_err)?;
    Ok(datasets::to_jsonl(&datasets::scadd_header(n, seed), &records))
}

#[pymodule]
fn navagent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(unproject, m)?)?;
    m.add_function(wrap_pyfunction!(cpa, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(assess_risk, m)?)?;
    m.add_function(wrap_pyfunction!(depict, m)?)?;
    m.add_function(wrap_pyfunction!(rule_decision, m)?)?;
    m.add_function(wrap_pyfunction!(parse_action, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_setd, m)?)?;
    m.add_function(wrap_pyfunction!(gen_scadd, m)?)?;
    m.add("LOG_SCHEMA", simulator::LOG_SCHEMA)?;
    Ok(())
}
