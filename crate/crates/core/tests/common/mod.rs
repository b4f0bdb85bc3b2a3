#![allow(dead_code)]

use std::path::PathBuf;
use std::time::{Duration, Instant};

use navagent::agent::RuleCore;
use navagent::simulator::{compute_metrics, run, Metrics, ScenarioConfig, SimulationLog};

pub const NM: f64 = 1852.0;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            if p.extension()? != "json" {
                return None;
            }
            Some(p.file_stem()?.to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn fixture(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&fixtures_dir().join(format!("{name}.json"))).expect("fixture loads")
}

pub struct RuleRun {
    pub log: SimulationLog,
    pub metrics: Metrics,
    pub elapsed: Duration,
}

pub fn run_rule(name: &str) -> RuleRun {
    let config = fixture(name);
    let started = Instant::now();
    let log = run(&config, &RuleCore).expect("fixture runs");
    let elapsed = started.elapsed();
    let metrics = compute_metrics(&log);
    RuleRun { log, metrics, elapsed }
}

/// Smallest own-ship distance to `target`, m.
pub fn own_min(m: &Metrics, own: &str, target: &str) -> f64 {
    m.pair(own, target).expect("pair present").min_distance
}
