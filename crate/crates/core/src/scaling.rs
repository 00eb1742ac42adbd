//! Wall-clock timing of [`plan`] across source counts and horizons.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{LinkIdx, RoadNetwork};
use crate::planner::{plan, PlanRequest, RewardSign};
use crate::policy::{make_route_source, SourcePolicy, DEFAULT_EPSILON};
use crate::reward::{build_reward, Occupancy};

/// Fewest repetitions accepted per grid cell.
pub const MIN_REPETITIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchCell {
    pub sources: usize,
    pub horizon: usize,
    /// Mean seconds per `plan()` call over every link and repetition.
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub cells: Vec<BenchCell>,
}

impl BenchResult {
    pub fn get(&self, sources: usize, horizon: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.sources == sources && c.horizon == horizon)
            .map(|c| c.mean_seconds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sources,horizon,mean_seconds\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{:.9e}", c.sources, c.horizon, c.mean_seconds);
        }
        out
    }
}

/// Destinations for benchmark sources: lot-adjacent links first, then links
/// spread evenly over the index range.
pub fn bench_destinations(net: &RoadNetwork, count: usize) -> Vec<LinkIdx> {
    let mut picked: Vec<LinkIdx> = Vec::with_capacity(count);
    for lot in net.lots() {
        for &x in &lot.adjacent {
            if picked.len() < count && !picked.contains(&x) {
                picked.push(x);
            }
        }
    }
    let n = net.len();
    let mut step = 0;
    while picked.len() < count && picked.len() < n {
        let x = LinkIdx::new((step * 7919 + 1) % n);
        if !picked.contains(&x) {
            picked.push(x);
        }
        step += 1;
    }
    picked
}

pub fn bench_sources(net: &RoadNetwork, count: usize) -> Result<Vec<SourcePolicy>> {
    bench_destinations(net, count)
        .into_iter()
        .enumerate()
        .map(|(i, d)| make_route_source(net, d, DEFAULT_EPSILON, format!("bench_{i}")))
        .collect()
}

/// Times `plan()` from every link of `net` for each `(S, N)` pair.
pub fn bench_planner(
    net: &RoadNetwork,
    source_counts: &[usize],
    horizons: &[usize],
    repetitions: usize,
) -> Result<BenchResult> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::InvalidBench(format!(
            "need at least {MIN_REPETITIONS} repetitions, got {repetitions}"
        )));
    }
    if source_counts.is_empty() || horizons.is_empty() {
        return Err(Error::InvalidBench("empty source or horizon range".into()));
    }
    if source_counts.contains(&0) || horizons.contains(&0) {
        return Err(Error::InvalidBench("source counts and horizons must be positive".into()));
    }
    if net.is_empty() {
        return Err(Error::InvalidBench("network has no links".into()));
    }
    let max_s = *source_counts.iter().max().expect("non-empty");
    let all_sources = bench_sources(net, max_s)?;
    if all_sources.len() < max_s {
        return Err(Error::InvalidBench(format!(
            "network supports at most {} distinct sources",
            all_sources.len()
        )));
    }
    let occupancy = Occupancy::empty(net);
    let rewards = horizons
        .iter()
        .map(|&n| build_reward(net, &occupancy, &[], n))
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<(usize, usize)> = (0..horizons.len())
        .flat_map(|h| source_counts.iter().map(move |&s| (h, s)))
        .collect();
    // repetitions sweep the whole grid so slow periods hit every cell alike
    let mut totals = vec![0.0; grid.len()];
    for _ in 0..repetitions {
        for (cell, &(h, s)) in grid.iter().enumerate() {
            let started = Instant::now();
            for (x, _) in net.links() {
                let p = plan(&PlanRequest {
                    network: net,
                    initial: x,
                    horizon: horizons[h],
                    sources: &all_sources[..s],
                    target: None,
                    reward: &rewards[h],
                    sign: RewardSign::Subtract,
                })?;
                black_box(p);
            }
            totals[cell] += started.elapsed().as_secs_f64();
        }
    }
    let cells = grid
        .iter()
        .zip(totals)
        .map(|(&(h, s), total)| BenchCell {
            sources: s,
            horizon: horizons[h],
            mean_seconds: total / (repetitions * net.len()) as f64,
        })
        .collect();
    Ok(BenchResult { cells })
}

/// Least-squares line through the points: `(slope, intercept, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Statistics("linear fit needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Statistics("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}
