use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::planner::RewardSign;
use crate::policy::DEFAULT_EPSILON;
use crate::reward::LinkStatus;

/// Route-following source towards a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSourceSpec {
    pub name: String,
    pub destination: String,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

/// Weighted mix of previously declared sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergedSourceSpec {
    pub name: String,
    pub parts: Vec<(String, f64)>,
}

/// `count` identical vehicles entering at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetGroup {
    pub origin: String,
    pub count: usize,
    /// Lot an uncontrolled vehicle drives to.
    pub destination_lot: String,
    /// Target behavior of a controlled vehicle.
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Controlled,
    Uncontrolled,
}

impl VehicleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Controlled => "controlled",
            VehicleKind::Uncontrolled => "uncontrolled",
        }
    }
}

/// A single scheduled vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrival {
    pub time_s: f64,
    pub origin: String,
    pub destination_lot: String,
    pub kind: VehicleKind,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionSpec {
    pub link: String,
    pub status: LinkStatus,
    /// Required for slowed links.
    #[serde(default)]
    pub speed_mps: Option<f64>,
    #[serde(default)]
    pub from_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedSpec {
    pub file: PathBuf,
    pub aliases: PathBuf,
}

fn default_start() -> DateTime<Utc> {
    "2022-06-01T08:00:00Z".parse().expect("valid literal")
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Everything needed to reproduce one simulation run.
///
/// Vehicles come either from `groups` (shuffled, then released every
/// `headway_s` seconds) or from an explicit `arrivals` list. Relative paths
/// are resolved against the scenario file's directory by [`ScenarioConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: PathBuf,
    /// Overrides the capacity of every lot.
    #[serde(default)]
    pub lot_capacity: Option<u32>,
    pub sources: Vec<RouteSourceSpec>,
    #[serde(default)]
    pub merged_sources: Vec<MergedSourceSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub groups: Vec<FleetGroup>,
    #[serde(default)]
    pub headway_s: f64,
    /// Vehicles from `groups` that are controlled; all of them when absent.
    #[serde(default)]
    pub controlled_count: Option<usize>,
    #[serde(default)]
    pub arrivals: Vec<Arrival>,
    #[serde(default)]
    pub obstructions: Vec<ObstructionSpec>,
    #[serde(default)]
    pub feed: Option<FeedSpec>,
    #[serde(default = "default_start")]
    pub start_time: DateTime<Utc>,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub sign: RewardSign,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "scenario".into(),
            source,
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_str(&read_file(path)?).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.network);
        if let Some(feed) = &mut self.feed {
            fix(&mut feed.file);
            fix(&mut feed.aliases);
        }
    }

    /// Number of vehicles the scenario will release.
    pub fn vehicle_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum::<usize>() + self.arrivals.len()
    }

    /// Structural checks that need no network.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration {} is not a non-negative number", self.duration_s));
        }
        if !(self.headway_s.is_finite() && self.headway_s >= 0.0) {
            return bad(format!("headway {} is not a non-negative number", self.headway_s));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if !self.groups.is_empty() && !self.arrivals.is_empty() {
            return bad("use either `groups` or `arrivals`, not both".into());
        }
        let grouped: usize = self.groups.iter().map(|g| g.count).sum();
        if let Some(c) = self.controlled_count {
            if c > grouped {
                return bad(format!("controlled_count {c} exceeds the {grouped} grouped vehicles"));
            }
        }
        if self
            .arrivals
            .windows(2)
            .any(|w| w[1].time_s < w[0].time_s)
        {
            return bad("arrival times must be non-decreasing".into());
        }
        if self.arrivals.iter().any(|a| !(a.time_s.is_finite() && a.time_s >= 0.0)) {
            return bad("arrival times must be non-negative".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for name in self
            .sources
            .iter()
            .map(|s| &s.name)
            .chain(self.merged_sources.iter().map(|m| &m.name))
        {
            if !names.insert(name.as_str()) {
                return bad(format!("source `{name}` declared twice"));
            }
        }
        if names.is_empty() {
            return bad("at least one source is required".into());
        }
        let targets = self
            .groups
            .iter()
            .map(|g| &g.target)
            .chain(self.arrivals.iter().map(|a| &a.target));
        for t in targets {
            if !names.contains(t.as_str()) {
                return bad(format!("target `{t}` is not a declared source"));
            }
        }
        for o in &self.obstructions {
            if !(o.from_s.is_finite() && o.from_s >= 0.0) {
                return bad(format!("obstruction on `{}` has a bad start time", o.link));
            }
            if o.status == LinkStatus::Slowed && o.speed_mps.is_none() {
                return bad(format!("slowed obstruction on `{}` needs speed_mps", o.link));
            }
        }
        Ok(())
    }
}
