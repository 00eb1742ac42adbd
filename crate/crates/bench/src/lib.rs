//! Shared fixtures for the criterion benches.

use std::path::PathBuf;

use crowdroute::reward::{build_reward, Occupancy};
use crowdroute::scaling::bench_sources;
use crowdroute::{RewardField, RoadNetwork, ScenarioConfig, SourcePolicy};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// The campus network with `sources` route sources and an empty-lot reward
/// covering `horizon` steps.
pub fn campus_fixture(sources: usize, horizon: usize) -> (RoadNetwork, Vec<SourcePolicy>, RewardField) {
    let net = RoadNetwork::load(scenarios_dir().join("campus.json")).expect("campus network");
    let policies = bench_sources(&net, sources).expect("bench sources");
    let reward = build_reward(&net, &Occupancy::empty(&net), &[], horizon).expect("reward");
    (net, policies, reward)
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(scenarios_dir().join(name)).expect("scenario")
}
