use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use crowdroute::metrics::{aggregate, summarize, welch_ttest, RunSummary};
use crowdroute::scaling::bench_planner;
use crowdroute::sim::{init_scenario, ScenarioConfig};
use crowdroute::RoadNetwork;
use serde_json::json;

#[derive(Parser)]
#[command(name = "crowdroute", version, about = "Crowdsourced routing planner, simulator and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace and summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Seed of the first run; defaults to the scenario's seed.
        #[arg(long, env = "CRAWL_SEED")]
        seed: Option<u64>,
        /// Number of controlled vehicles among the grouped fleet.
        #[arg(long)]
        controlled: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Runs with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeat: u64,
    },
    /// Time the planner over a grid of source counts and horizons.
    Bench {
        #[arg(long)]
        network: PathBuf,
        /// Inclusive range such as `1..6`.
        #[arg(long, default_value = "1..6")]
        sources: String,
        #[arg(long, default_value = "1..5")]
        horizons: String,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Welch's t-test between two files of numbers.
    Ttest { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            controlled,
            horizon,
            out,
            repeat,
        } => cmd_run(&scenario, seed, controlled, horizon, &out, repeat),
        Command::Bench {
            network,
            sources,
            horizons,
            reps,
            out,
        } => cmd_bench(&network, &sources, &horizons, reps, &out),
        Command::Ttest { a, b } => cmd_ttest(&a, &b),
    }
}

fn cmd_run(
    scenario: &Path,
    seed: Option<u64>,
    controlled: Option<usize>,
    horizon: Option<usize>,
    out: &Path,
    repeat: u64,
) -> Result<()> {
    if repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let mut cfg =
        ScenarioConfig::load(scenario).with_context(|| format!("loading scenario {}", scenario.display()))?;
    if let Some(c) = controlled {
        cfg.controlled_count = Some(c);
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    cfg.check()?;
    let first_seed = seed.unwrap_or(cfg.seed);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut summaries: Vec<RunSummary> = Vec::new();
    let mut runs = Vec::new();
    for r in 0..repeat {
        cfg.seed = first_seed + r;
        let outcome = init_scenario(&cfg)?.run_to_end()?;
        let name = if repeat == 1 {
            "trace.csv".to_string()
        } else {
            format!("trace_seed{}.csv", cfg.seed)
        };
        outcome.log.write_csv(out.join(&name))?;
        let summary = summarize(&outcome.log)?;
        println!(
            "seed {}: parked {}/{}, mean time-to-parking {:.1} s, mean obstruction {:.1} s",
            cfg.seed,
            summary.parked_count,
            summary.total_count,
            summary.mean_time_to_parking,
            summary.mean_obstruction_time
        );
        runs.push(json!({
            "seed": cfg.seed,
            "trace": name,
            "mean_time_to_parking_s": summary.mean_time_to_parking,
            "mean_obstruction_time_s": summary.mean_obstruction_time,
            "parked_count": summary.parked_count,
            "total_count": summary.total_count,
            "censored_count": summary.censored_count,
        }));
        summaries.push(summary);
    }

    let n = summaries.len() as f64;
    let ttp: Vec<f64> = summaries.iter().map(|s| s.mean_time_to_parking).collect();
    let obstruction: Vec<f64> = summaries.iter().map(|s| s.mean_obstruction_time).collect();
    let mut doc = json!({
        "scenario": scenario.display().to_string(),
        "controlled_count": cfg.controlled_count,
        "vehicle_count": cfg.vehicle_count(),
        "horizon": cfg.horizon,
        "runs": runs,
        "mean_time_to_parking_s": ttp.iter().sum::<f64>() / n,
        "mean_obstruction_time_s": obstruction.iter().sum::<f64>() / n,
        "all_parked_runs": summaries.iter().filter(|s| s.censored_count == 0).count(),
    });
    if ttp.len() >= 4 {
        let (a, b) = ttp.split_at(ttp.len() / 2);
        let t = welch_ttest(a, b)?;
        doc["first_vs_second_half"] = serde_json::to_value(t)?;
    }
    if summaries.len() > 1 {
        fs::write(out.join("bands.csv"), aggregate(&summaries)?.to_csv())?;
    }
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Parses `A..B` (inclusive) or a single number.
fn parse_range(text: &str) -> Result<Vec<usize>> {
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a.trim().parse::<usize>()?, b.trim_start_matches('=').trim().parse::<usize>()?),
        None => {
            let v = text.trim().parse::<usize>()?;
            (v, v)
        }
    };
    if lo > hi {
        bail!("empty range `{text}`");
    }
    Ok((lo..=hi).collect())
}

fn cmd_bench(network: &Path, sources: &str, horizons: &str, reps: usize, out: &Path) -> Result<()> {
    let net = RoadNetwork::load(network).with_context(|| format!("loading network {}", network.display()))?;
    let s = parse_range(sources).with_context(|| format!("bad --sources `{sources}`"))?;
    let h = parse_range(horizons).with_context(|| format!("bad --horizons `{horizons}`"))?;
    let result = bench_planner(&net, &s, &h, reps)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv = result.to_csv();
    fs::write(out.join("bench.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("{}: `{t}` is not a number", path.display()))
        })
        .collect()
}

fn cmd_ttest(a: &Path, b: &Path) -> Result<()> {
    let r = welch_ttest(&read_numbers(a)?, &read_numbers(b)?)?;
    println!("t = {:.6}", r.t_statistic);
    println!("df = {:.6}", r.degrees_of_freedom);
    println!("p = {:.6}", r.p_value);
    Ok(())
}
