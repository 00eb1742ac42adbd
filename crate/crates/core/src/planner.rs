//! Reward-driven source selection with a KL penalty towards a target
//! behavior.
//!
//! Given `S` candidate sources and a horizon `N`, [`plan`] runs a backward
//! recursion over the links reachable from the current one. At step `k` and
//! for every conditioning link `x` it scores each source as
//!
//! ```text
//! a_k^i(x) = KL(π^i(·|x) || p(·|x)) - E_{π^i(·|x)}[ r_k(X) - r̂_k(X) ]
//! ```
//!
//! where `r̂_k(y)` is the cost of the source selected at `(k + 1, y)` (zero
//! past the horizon). The cheapest source wins, lowest index on ties, and its
//! row becomes the turning distribution at `(k, x)`.

use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::network::{LinkIdx, RoadNetwork};
use crate::policy::{kl_slices, kl_to_uniform, SourcePolicy};
use crate::reward::{build_reward, LinkCondition, Occupancy, RewardField};

/// How the expected net reward enters a source's cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSign {
    /// `KL - E[r̄]`: minimizing cost maximizes reward.
    #[default]
    Subtract,
    /// `KL + E[r̄]`, kept for comparison runs.
    Add,
}

impl RewardSign {
    #[inline]
    fn apply(self, kl: f64, expected: f64) -> f64 {
        match self {
            RewardSign::Subtract => kl - expected,
            RewardSign::Add => kl + expected,
        }
    }
}

/// Inputs of one planning call.
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    pub network: &'a RoadNetwork,
    pub initial: LinkIdx,
    pub horizon: usize,
    pub sources: &'a [SourcePolicy],
    /// Uniform over outgoing neighbors when absent.
    pub target: Option<&'a SourcePolicy>,
    pub reward: &'a RewardField,
    pub sign: RewardSign,
}

impl PlanRequest<'_> {
    pub(crate) fn validate(&self) -> Result<()> {
        let net = self.network;
        if self.initial.index() >= net.len() {
            return Err(Error::UnknownLink(format!("#{}", self.initial.index())));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidRequest("horizon must be at least 1".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::InvalidRequest("at least one source is required".into()));
        }
        if self.reward.horizon() < self.horizon {
            return Err(Error::InvalidRequest(format!(
                "reward covers {} steps, horizon is {}",
                self.reward.horizon(),
                self.horizon
            )));
        }
        for s in self.sources.iter().chain(self.target) {
            s.ensure_network(net)?;
        }
        Ok(())
    }

    /// `D_KL(π^i(·|x) || p(·|x))`, surfacing support violations as errors.
    #[inline]
    pub(crate) fn kl(&self, source: &SourcePolicy, x: LinkIdx) -> Result<f64> {
        let row = source.probs_of(x);
        match self.target {
            None => Ok(kl_to_uniform(row)),
            Some(t) => kl_slices(row, t.probs_of(x)).map_err(|j| Error::AbsoluteContinuity {
                given: self.network.id(x).to_string(),
                neighbor: self.network.id(self.network.outgoing(x)[j]).to_string(),
            }),
        }
    }
}

/// Recursion quantities for one step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub k: usize,
    /// Links the car may occupy before the move (`frontier[k - 1]`).
    pub conditioning: Vec<LinkIdx>,
    /// Row-major `conditioning.len() × S` source costs `a_k^i(x)`.
    pub costs: Vec<f64>,
    /// Selected source per conditioning link.
    pub chosen: Vec<usize>,
    /// Links the car may occupy after the move (`frontier[k]`).
    pub successors: Vec<LinkIdx>,
    /// `r̂_k(y)` per successor.
    pub reward_to_go: Vec<f64>,
    /// `r̄_k(y) = r_k(y) - r̂_k(y)` per successor.
    pub net_reward: Vec<f64>,
    policy: Vec<f64>,
    policy_offsets: Vec<usize>,
}

impl PlanStep {
    pub fn costs_of(&self, pos: usize) -> &[f64] {
        let s = self.costs.len() / self.conditioning.len();
        &self.costs[pos * s..(pos + 1) * s]
    }

    pub fn position(&self, x: LinkIdx) -> Option<usize> {
        self.conditioning.iter().position(|&c| c == x)
    }

    /// Turning distribution selected at `(k, x)`, aligned with `outgoing(x)`.
    pub fn policy_row(&self, x: LinkIdx) -> Option<&[f64]> {
        let pos = self.position(x)?;
        Some(&self.policy[self.policy_offsets[pos]..self.policy_offsets[pos + 1]])
    }
}

/// Output of [`plan`]: the selected turning distributions over the horizon
/// plus the full recursion table.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub initial: LinkIdx,
    pub horizon: usize,
    pub sign: RewardSign,
    /// `steps[k - 1]` holds step `k`.
    pub steps: Vec<PlanStep>,
}

impl Plan {
    /// Cost of the selected source at the initial link, i.e. the optimal
    /// value of the whole-horizon objective.
    pub fn objective(&self) -> f64 {
        let first = &self.steps[0];
        first.costs_of(0)[first.chosen[0]]
    }

    pub fn step(&self, k: usize) -> &PlanStep {
        &self.steps[k - 1]
    }

    /// Selected source index at `(k, x)`.
    pub fn chosen_at(&self, k: usize, x: LinkIdx) -> Option<usize> {
        let step = self.step(k);
        step.position(x).map(|p| step.chosen[p])
    }

    /// First-step turning distribution at the initial link.
    pub fn first_row(&self) -> &[f64] {
        self.steps[0].policy_row(self.initial).expect("initial link conditions step 1")
    }

    /// JSON dump of the recursion for debugging and cross-checks.
    pub fn to_audit_json(&self, net: &RoadNetwork) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                let entries: Vec<_> = s
                    .conditioning
                    .iter()
                    .enumerate()
                    .map(|(p, &x)| {
                        json!({
                            "link": net.id(x).as_str(),
                            "costs": s.costs_of(p),
                            "chosen": s.chosen[p],
                        })
                    })
                    .collect();
                let successors: Vec<_> = s
                    .successors
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| {
                        json!({
                            "link": net.id(y).as_str(),
                            "reward_to_go": s.reward_to_go[j],
                            "net_reward": s.net_reward[j],
                        })
                    })
                    .collect();
                json!({"k": s.k, "entries": entries, "successors": successors})
            })
            .collect();
        json!({
            "initial": net.id(self.initial).as_str(),
            "horizon": self.horizon,
            "sign": self.sign,
            "objective": self.objective(),
            "steps": steps,
        })
    }
}

/// Backward recursion over the reachable frontiers of `req.initial`.
pub fn plan(req: &PlanRequest<'_>) -> Result<Plan> {
    req.validate()?;
    let net = req.network;
    let n = req.horizon;
    let s_count = req.sources.len();
    let frontiers = net.reachable_frontiers(req.initial, n);

    // position of a link inside the successor frontier of the current step
    let mut pos = vec![u32::MAX; net.len()];
    // selected cost-to-go over frontier[k]; zero beyond the horizon
    let mut next_value = vec![0.0; frontiers[n].len()];
    let mut steps = Vec::with_capacity(n);

    for k in (1..=n).rev() {
        let successors = &frontiers[k];
        let conditioning = &frontiers[k - 1];
        for (j, &y) in successors.iter().enumerate() {
            pos[y.index()] = j as u32;
        }
        let reward_to_go = next_value;
        let net_reward: Vec<f64> = successors
            .iter()
            .zip(&reward_to_go)
            .map(|(&y, &rhat)| req.reward.get(k, y) - rhat)
            .collect();

        let mut costs = Vec::with_capacity(conditioning.len() * s_count);
        let mut chosen = Vec::with_capacity(conditioning.len());
        let mut value = Vec::with_capacity(conditioning.len());
        let mut policy = Vec::new();
        let mut policy_offsets = Vec::with_capacity(conditioning.len() + 1);
        policy_offsets.push(0);

        for &x in conditioning {
            let out = net.outgoing(x);
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for (i, source) in req.sources.iter().enumerate() {
                let row = source.probs_of(x);
                let kl = req.kl(source, x)?;
                let mut expected = 0.0;
                for (&p, &y) in row.iter().zip(out) {
                    expected += p * net_reward[pos[y.index()] as usize];
                }
                let a = req.sign.apply(kl, expected);
                if a < best_cost {
                    best_cost = a;
                    best = i;
                }
                costs.push(a);
            }
            chosen.push(best);
            value.push(best_cost);
            policy.extend_from_slice(req.sources[best].probs_of(x));
            policy_offsets.push(policy.len());
        }

        steps.push(PlanStep {
            k,
            conditioning: conditioning.clone(),
            costs,
            chosen,
            successors: successors.clone(),
            reward_to_go,
            net_reward,
            policy,
            policy_offsets,
        });
        next_value = value;
    }
    steps.reverse();
    Ok(Plan {
        initial: req.initial,
        horizon: n,
        sign: req.sign,
        steps,
    })
}

/// Draws the next link from the first-step distribution at `current`.
pub fn sample_next<R: Rng + ?Sized>(net: &RoadNetwork, plan: &Plan, current: LinkIdx, rng: &mut R) -> Result<LinkIdx> {
    let row = plan.steps[0]
        .policy_row(current)
        .ok_or_else(|| Error::UnknownLink(format!("`{}` is not planned for", net.id(current))))?;
    draw(net.outgoing(current), row, rng, |_| false)
        .ok_or_else(|| Error::InvalidRequest("empty turning distribution".into()))
}

/// Like [`sample_next`] but with `exclude`d neighbors removed and the rest
/// renormalized. `None` when no allowed neighbor has mass.
pub fn sample_next_excluding<R: Rng + ?Sized>(
    net: &RoadNetwork,
    plan: &Plan,
    current: LinkIdx,
    rng: &mut R,
    exclude: impl Fn(LinkIdx) -> bool,
) -> Result<Option<LinkIdx>> {
    let row = plan.steps[0]
        .policy_row(current)
        .ok_or_else(|| Error::UnknownLink(format!("`{}` is not planned for", net.id(current))))?;
    Ok(draw(net.outgoing(current), row, rng, exclude))
}

pub(crate) fn draw<R: Rng + ?Sized>(
    out: &[LinkIdx],
    row: &[f64],
    rng: &mut R,
    exclude: impl Fn(LinkIdx) -> bool,
) -> Option<LinkIdx> {
    let total: f64 = out
        .iter()
        .zip(row)
        .filter(|(&y, _)| !exclude(y))
        .map(|(_, &p)| p)
        .sum();
    if total <= 0.0 {
        return None;
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (&y, &p) in out.iter().zip(row) {
        if p <= 0.0 || exclude(y) {
            continue;
        }
        acc += p;
        last = Some(y);
        if u < acc {
            return Some(y);
        }
    }
    // u landed in the rounding gap above the cumulative sum
    last
}

/// What a controlled car knows about the world when it replans.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    pub occupancy: &'a Occupancy,
    pub conditions: &'a [LinkCondition],
}

/// Planner settings for one controlled car.
#[derive(Debug, Clone, Copy)]
pub struct RecedingConfig<'a> {
    pub horizon: usize,
    pub sources: &'a [SourcePolicy],
    pub target: Option<&'a SourcePolicy>,
    pub sign: RewardSign,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub next: LinkIdx,
    pub plan: Plan,
}

/// One receding-horizon decision: rebuild the reward from the environment,
/// plan over the next `horizon` links, and sample the next link.
pub fn receding_horizon_step<R: Rng + ?Sized>(
    net: &RoadNetwork,
    current: LinkIdx,
    env: &Environment<'_>,
    cfg: &RecedingConfig<'_>,
    rng: &mut R,
) -> Result<Decision> {
    let reward = build_reward(net, env.occupancy, env.conditions, cfg.horizon)?;
    let plan = plan(&PlanRequest {
        network: net,
        initial: current,
        horizon: cfg.horizon,
        sources: cfg.sources,
        target: cfg.target,
        reward: &reward,
        sign: cfg.sign,
    })?;
    let next = sample_next(net, &plan, current, rng)?;
    Ok(Decision { next, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{make_route_source, uniform_target};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A → {B, C}; B → {D}; C → {D}; D → {D}.
    fn diamond() -> RoadNetwork {
        RoadNetwork::from_json(
            r#"{"links":[
                {"id":"A","length_m":10,"speed_mps":10,"out":["B","C"]},
                {"id":"B","length_m":10,"speed_mps":10,"out":["D"]},
                {"id":"C","length_m":10,"speed_mps":10,"out":["D"]},
                {"id":"D","length_m":10,"speed_mps":10,"out":[]}
            ]}"#,
        )
        .unwrap()
    }

    fn rows(net: &RoadNetwork, a_row: [f64; 2]) -> SourcePolicy {
        SourcePolicy::from_rows(net, "s", vec![a_row.to_vec(), vec![1.0], vec![1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn single_source_is_always_chosen() {
        let net = diamond();
        let a = net.idx("A").unwrap();
        let mut reward = RewardField::zero(3);
        reward.set(2, net.idx("D").unwrap(), 42.0);
        let sources = [rows(&net, [0.3, 0.7])];
        let p = plan(&PlanRequest {
            network: &net,
            initial: a,
            horizon: 3,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap();
        for step in &p.steps {
            assert!(step.chosen.iter().all(|&j| j == 0));
        }
    }

    #[test]
    fn hand_computed_two_step_diamond() {
        let net = diamond();
        let a = net.idx("A").unwrap();
        let b = net.idx("B").unwrap();
        let mut reward = RewardField::zero(2);
        reward.set(1, b, 10.0);
        let sources = [rows(&net, [0.9, 0.1]), rows(&net, [0.2, 0.8])];
        let p = plan(&PlanRequest {
            network: &net,
            initial: a,
            horizon: 2,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap();
        // step 2: single-neighbor rows, zero reward, zero KL vs uniform
        assert_eq!(p.step(2).costs, vec![0.0; 4]);
        let kl1 = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        let kl2 = 0.2 * 0.4f64.ln() + 0.8 * 1.6f64.ln();
        let a1 = p.step(1).costs_of(0);
        assert_abs_diff_eq!(a1[0], kl1 - 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a1[1], kl2 - 2.0, epsilon = 1e-12);
        assert_eq!(p.chosen_at(1, a), Some(0));
        assert_abs_diff_eq!(p.objective(), kl1 - 9.0, epsilon = 1e-12);
        assert_eq!(p.first_row(), &[0.9, 0.1]);

        // the other sign prefers low reward
        let q = plan(&PlanRequest {
            network: &net,
            initial: a,
            horizon: 2,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Add,
        })
        .unwrap();
        assert_eq!(q.chosen_at(1, a), Some(1));
    }

    #[test]
    fn zero_reward_prefers_source_equal_to_target() {
        let net = diamond();
        let target = rows(&net, [0.6, 0.4]);
        let sources = [rows(&net, [0.1, 0.9]), target.clone()];
        let reward = RewardField::zero(2);
        let p = plan(&PlanRequest {
            network: &net,
            initial: net.idx("A").unwrap(),
            horizon: 2,
            sources: &sources,
            target: Some(&target),
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap();
        assert_eq!(p.step(1).chosen, vec![1]);
        assert_eq!(p.objective(), 0.0);
    }

    #[test]
    fn continuity_violation_surfaces() {
        let net = diamond();
        let target = rows(&net, [1.0, 0.0]);
        let sources = [rows(&net, [0.5, 0.5])];
        let reward = RewardField::zero(1);
        let err = plan(&PlanRequest {
            network: &net,
            initial: net.idx("A").unwrap(),
            horizon: 1,
            sources: &sources,
            target: Some(&target),
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap_err();
        assert!(matches!(err, Error::AbsoluteContinuity { .. }));
    }

    #[test]
    fn request_validation() {
        let net = diamond();
        let reward = RewardField::zero(1);
        let sources = [uniform_target(&net)];
        let base = PlanRequest {
            network: &net,
            initial: net.idx("A").unwrap(),
            horizon: 1,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Subtract,
        };
        assert!(plan(&PlanRequest { horizon: 0, ..base }).is_err());
        assert!(plan(&PlanRequest { horizon: 2, ..base }).is_err());
        assert!(plan(&PlanRequest { sources: &[], ..base }).is_err());
        assert!(plan(&base).is_ok());
    }

    #[test]
    fn sampler_degenerate_and_deterministic() {
        let net = diamond();
        let a = net.idx("A").unwrap();
        let b = net.idx("B").unwrap();
        let reward = RewardField::zero(1);
        let sources = [rows(&net, [1.0, 0.0])];
        let p = plan(&PlanRequest {
            network: &net,
            initial: a,
            horizon: 1,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_next(&net, &p, a, &mut rng).unwrap(), b);
        }
        assert!(sample_next(&net, &p, b, &mut rng).is_err());
        assert_eq!(
            sample_next_excluding(&net, &p, a, &mut rng, |y| y == b).unwrap(),
            None
        );

        let half = [rows(&net, [0.5, 0.5])];
        let p = plan(&PlanRequest { sources: &half, ..PlanRequest {
            network: &net,
            initial: a,
            horizon: 1,
            sources: &sources,
            target: None,
            reward: &reward,
            sign: RewardSign::Subtract,
        } })
        .unwrap();
        let draw_seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_next(&net, &p, a, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw_seq(11), draw_seq(11));
    }

    #[test]
    fn horizon_one_with_flat_reward_is_pure_kl() {
        let net = diamond();
        let a = net.idx("A").unwrap();
        let mut reward = RewardField::zero(1);
        reward.shift_step(1, 55.0);
        let target = rows(&net, [0.7, 0.3]);
        let sources = [rows(&net, [0.2, 0.8]), rows(&net, [0.6, 0.4]), rows(&net, [0.9, 0.1])];
        let p = plan(&PlanRequest {
            network: &net,
            initial: a,
            horizon: 1,
            sources: &sources,
            target: Some(&target),
            reward: &reward,
            sign: RewardSign::Subtract,
        })
        .unwrap();
        let kls: Vec<f64> = sources
            .iter()
            .map(|s| kl_slices(s.probs_of(a), target.probs_of(a)).unwrap())
            .collect();
        let best = kls
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert_eq!(p.chosen_at(1, a), Some(best));
        for (c, kl) in p.step(1).costs_of(0).iter().zip(&kls) {
            assert_abs_diff_eq!(*c, kl - 55.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn route_source_target_keeps_heading() {
        let net = diamond();
        let d = net.idx("D").unwrap();
        let src = make_route_source(&net, d, 0.1, "to_d").unwrap();
        let occupancy = Occupancy::empty(&net);
        let env = Environment {
            occupancy: &occupancy,
            conditions: &[],
        };
        let sources = [src.clone()];
        let cfg = RecedingConfig {
            horizon: 2,
            sources: &sources,
            target: Some(&src),
            sign: RewardSign::Subtract,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dec = receding_horizon_step(&net, net.idx("A").unwrap(), &env, &cfg, &mut rng).unwrap();
        assert!(dec.next == net.idx("B").unwrap() || dec.next == net.idx("C").unwrap());
        assert_eq!(dec.plan.horizon, 2);
        let audit = dec.plan.to_audit_json(&net);
        assert_eq!(audit["steps"].as_array().unwrap().len(), 2);
    }
}
