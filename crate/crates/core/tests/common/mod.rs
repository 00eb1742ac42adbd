#![allow(dead_code)]

use std::path::PathBuf;

use crowdroute::{LinkIdx, RewardField, RoadNetwork, ScenarioConfig, SourcePolicy};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn campus() -> RoadNetwork {
    RoadNetwork::load(scenarios_dir().join("campus.json")).expect("campus fixture")
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(scenarios_dir().join(name)).expect("scenario fixture")
}

/// A small random planning problem.
pub struct Instance {
    pub net: RoadNetwork,
    pub sources: Vec<SourcePolicy>,
    pub target: Option<SourcePolicy>,
    pub reward: RewardField,
    pub initial: LinkIdx,
    pub horizon: usize,
}

/// Random graph with `links` links, out-degree 1 to 3, one lot.
pub fn random_network(rng: &mut ChaCha8Rng, links: usize) -> RoadNetwork {
    let ids: Vec<String> = (0..links).map(|i| format!("l{i}")).collect();
    let records: Vec<_> = ids
        .iter()
        .map(|id| {
            let degree = rng.gen_range(1..=3.min(links));
            let out: Vec<&String> = ids.choose_multiple(rng, degree).collect();
            json!({
                "id": id,
                "length_m": rng.gen_range(10.0..100.0),
                "speed_mps": 10.0,
                "out": out,
            })
        })
        .collect();
    let doc = json!({
        "links": records,
        "lots": [{"id": "lot", "capacity": 5, "adjacent": [ids[0]]}],
    });
    RoadNetwork::from_json(&doc.to_string()).expect("generated network")
}

/// Strictly positive rows drawn uniformly and normalized.
pub fn random_policy(rng: &mut ChaCha8Rng, net: &RoadNetwork, name: &str) -> SourcePolicy {
    let rows = net
        .links()
        .map(|(x, _)| {
            let raw: Vec<f64> = net.outgoing(x).iter().map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    SourcePolicy::from_rows(net, name, rows).expect("valid rows")
}

pub fn random_reward(rng: &mut ChaCha8Rng, net: &RoadNetwork, horizon: usize) -> RewardField {
    let mut reward = RewardField::zero(horizon);
    for k in 1..=horizon {
        for (x, _) in net.links() {
            reward.set(k, x, rng.gen_range(-100.0..100.0));
        }
    }
    reward
}

/// Size of the per-state assignment space for `(initial, horizon, S)`.
pub fn table_count(net: &RoadNetwork, initial: LinkIdx, horizon: usize, sources: usize) -> f64 {
    let frontiers = net.reachable_frontiers(initial, horizon);
    let digits: usize = frontiers[..horizon].iter().map(Vec::len).sum();
    (sources as f64).powi(digits as i32)
}

/// Draws instances until one has at most `limit` assignments.
pub fn random_instance(rng: &mut ChaCha8Rng, max_links: usize, limit: f64) -> Instance {
    loop {
        let links = rng.gen_range(2..=max_links);
        let net = random_network(rng, links);
        let s = rng.gen_range(1..=3);
        let horizon = rng.gen_range(1..=4);
        let initial = net.idx(&format!("l{}", rng.gen_range(0..links))).expect("generated id");
        if table_count(&net, initial, horizon, s) > limit {
            continue;
        }
        let sources = (0..s).map(|i| random_policy(rng, &net, &format!("s{i}"))).collect();
        let target = rng.gen_bool(0.5).then(|| random_policy(rng, &net, "target"));
        let reward = random_reward(rng, &net, horizon);
        return Instance {
            net,
            sources,
            target,
            reward,
            initial,
            horizon,
        };
    }
}
