//! Per-step link rewards built from parking availability and road conditions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feed::BlockEvent;
use crate::network::{LinkIdx, LotIdx, RoadNetwork};

/// Reward on a link next to a lot with free spaces.
pub const VACANT_LOT_REWARD: f64 = 100.0;
/// Reward on a link next to a full lot.
pub const FULL_LOT_REWARD: f64 = -10.0;
/// Extra reward on a heavily slowed link.
pub const SLOWED_PENALTY: f64 = -20.0;
/// Extra reward on a blocked link.
pub const BLOCKED_PENALTY: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Normal,
    Slowed,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCondition {
    pub link: LinkIdx,
    pub status: LinkStatus,
    /// Speed imposed on the link; ignored for blocked links.
    pub effective_speed: f64,
}

impl LinkCondition {
    pub fn slowed(net: &RoadNetwork, link: LinkIdx, speed_mps: f64) -> Result<Self> {
        let limit = net.link(link).speed_mps;
        if !(speed_mps > 0.0 && speed_mps < limit) {
            return Err(Error::InvalidReward(format!(
                "slowed speed {speed_mps} on `{}` must be in (0, {limit})",
                net.id(link)
            )));
        }
        Ok(Self {
            link,
            status: LinkStatus::Slowed,
            effective_speed: speed_mps,
        })
    }

    pub fn blocked(link: LinkIdx) -> Self {
        Self {
            link,
            status: LinkStatus::Blocked,
            effective_speed: 0.0,
        }
    }
}

/// Cars parked per lot, indexed by lot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy(Vec<u32>);

impl Occupancy {
    pub fn empty(net: &RoadNetwork) -> Self {
        Self(vec![0; net.lots().len()])
    }

    pub fn from_map(net: &RoadNetwork, counts: &HashMap<String, u32>) -> Result<Self> {
        let mut occ = Self::empty(net);
        for (id, &n) in counts {
            let lot = net.lot_idx(id)?;
            occ.0[lot.index()] = n;
        }
        occ.check(net)?;
        Ok(occ)
    }

    pub fn check(&self, net: &RoadNetwork) -> Result<()> {
        if self.0.len() != net.lots().len() {
            return Err(Error::InvalidReward("occupancy does not match the lot list".into()));
        }
        for (lot, (&n, l)) in self.0.iter().zip(net.lots()).enumerate() {
            if n > l.capacity {
                return Err(Error::InvalidReward(format!(
                    "lot #{lot} `{}` holds {n} cars over capacity {}",
                    l.id, l.capacity
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, lot: LotIdx) -> u32 {
        self.0[lot.index()]
    }

    pub fn has_vacancy(&self, net: &RoadNetwork, lot: LotIdx) -> bool {
        self.0[lot.index()] < net.lot(lot).capacity
    }

    pub(crate) fn increment(&mut self, lot: LotIdx) {
        self.0[lot.index()] += 1;
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct StepRewards {
    /// Added to every link at this step.
    base: f64,
    /// Dense by link index; missing tail entries are zero.
    values: Vec<f64>,
}

impl StepRewards {
    fn slot(&mut self, x: LinkIdx) -> &mut f64 {
        if self.values.len() <= x.index() {
            self.values.resize(x.index() + 1, 0.0);
        }
        &mut self.values[x.index()]
    }
}

/// `r_k(x)` for steps `k = 1..=horizon`; unlisted links get the step's base
/// value, which starts at zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardField {
    steps: Vec<StepRewards>,
    blocked: BTreeSet<LinkIdx>,
}

impl RewardField {
    pub fn zero(horizon: usize) -> Self {
        Self {
            steps: vec![StepRewards::default(); horizon],
            blocked: BTreeSet::new(),
        }
    }

    /// The same link values at every step.
    pub fn constant(values: impl IntoIterator<Item = (LinkIdx, f64)>, horizon: usize) -> Self {
        let mut step = StepRewards::default();
        for (x, v) in values {
            *step.slot(x) = v;
        }
        Self {
            steps: vec![step; horizon],
            blocked: BTreeSet::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// `r_k(x)` with `k` starting at 1.
    #[inline]
    pub fn get(&self, k: usize, x: LinkIdx) -> f64 {
        let step = &self.steps[k - 1];
        step.base + step.values.get(x.index()).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, k: usize, x: LinkIdx, value: f64) {
        let step = &mut self.steps[k - 1];
        let base = step.base;
        *step.slot(x) = value - base;
    }

    pub fn add(&mut self, k: usize, x: LinkIdx, delta: f64) {
        *self.steps[k - 1].slot(x) += delta;
    }

    /// Adds `c` to the reward of every link at step `k`.
    pub fn shift_step(&mut self, k: usize, c: f64) {
        self.steps[k - 1].base += c;
    }

    pub fn is_blocked(&self, x: LinkIdx) -> bool {
        self.blocked.contains(&x)
    }

    /// Links carrying a non-zero value at step `k`, sorted.
    pub fn nonzero(&self, k: usize) -> BTreeMap<LinkIdx, f64> {
        let step = &self.steps[k - 1];
        step.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (LinkIdx::new(i), v + step.base))
            .filter(|(_, v)| *v != 0.0)
            .collect()
    }

    fn block(&mut self, x: LinkIdx) {
        if self.blocked.insert(x) {
            for k in 1..=self.steps.len() {
                self.add(k, x, BLOCKED_PENALTY);
            }
        }
    }

    pub fn to_audit_json(&self, net: &RoadNetwork) -> serde_json::Value {
        let steps: Vec<_> = (1..=self.horizon())
            .map(|k| {
                let values: BTreeMap<&str, f64> = self
                    .nonzero(k)
                    .into_iter()
                    .map(|(x, v)| (net.id(x).as_str(), v))
                    .collect();
                serde_json::json!({"k": k, "base": self.steps[k - 1].base, "rewards": values})
            })
            .collect();
        serde_json::json!({ "steps": steps })
    }
}

/// Builds the reward field for one planning call. The same values apply at
/// every step of the horizon; a link matching several rules gets the sum.
pub fn build_reward(
    net: &RoadNetwork,
    occupancy: &Occupancy,
    conditions: &[LinkCondition],
    horizon: usize,
) -> Result<RewardField> {
    occupancy.check(net)?;
    let mut values: BTreeMap<LinkIdx, f64> = BTreeMap::new();
    for lot in net.lot_indices() {
        let r = if occupancy.has_vacancy(net, lot) {
            VACANT_LOT_REWARD
        } else {
            FULL_LOT_REWARD
        };
        for &x in &net.lot(lot).adjacent {
            *values.entry(x).or_insert(0.0) += r;
        }
    }
    let mut seen = BTreeSet::new();
    let mut blocked = Vec::new();
    for c in conditions {
        if c.link.index() >= net.len() {
            return Err(Error::UnknownLink(format!("#{}", c.link.index())));
        }
        if !seen.insert((c.link, c.status)) {
            continue;
        }
        match c.status {
            LinkStatus::Normal => {}
            LinkStatus::Slowed => *values.entry(c.link).or_insert(0.0) += SLOWED_PENALTY,
            LinkStatus::Blocked => blocked.push(c.link),
        }
    }
    let mut field = RewardField::constant(values, horizon);
    for x in blocked {
        field.block(x);
    }
    Ok(field)
}

/// Adds the blocked-link penalty for `event` at every step. Applying the same
/// block twice has no further effect.
pub fn apply_event(net: &RoadNetwork, mut field: RewardField, event: &BlockEvent) -> Result<RewardField> {
    if event.link.index() >= net.len() {
        return Err(Error::UnknownLink(format!("#{}", event.link.index())));
    }
    field.block(event.link);
    Ok(field)
}
