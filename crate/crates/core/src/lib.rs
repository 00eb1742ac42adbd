//! Reward-driven selection among crowdsourced routing behaviors, with the
//! tooling needed to exercise it: a road graph, policy algebra, a reward
//! builder, a road-closure feed parser, a discrete-event parking simulator,
//! run statistics, and a planner timing harness.

pub mod error;
pub mod feed;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod planner;
pub mod policy;
pub mod reward;
pub mod scaling;
pub mod sim;

pub use error::{Error, Result};
pub use feed::{AliasTable, BlockEvent, FeedMessage, IgnoreReason, ParseOutcome, ReplayFeed};
pub use metrics::{aggregate, summarize, welch_ttest, Bands, RunSummary, TTestResult};
pub use network::{LinkId, LinkIdx, LotId, LotIdx, RoadNetwork};
pub use oracle::{brute_force_plan, brute_force_step_sequences, BruteForceResult};
pub use planner::{plan, receding_horizon_step, sample_next, Plan, PlanRequest, RewardSign};
pub use policy::{kl_divergence, make_route_source, merge_sources, uniform_target, SourcePolicy};
pub use reward::{build_reward, LinkCondition, LinkStatus, Occupancy, RewardField};
pub use sim::{run, ScenarioConfig, SimState, TraceLog};
