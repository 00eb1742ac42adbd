//! Exhaustive reference solvers for small planning problems.
//!
//! [`brute_force_plan`] enumerates every one-hot assignment of a source to
//! each `(k, x)` pair on the reachable frontiers and scores it by pushing the
//! state distribution forward from a point mass at the initial link:
//!
//! ```text
//! J = Σ_k Σ_x m_{k-1}(x) [ KL(π^{j_k(x)}(·|x) || p(·|x)) - Σ_y π^{j_k(x)}(y|x) r_k(y) ]
//! ```
//!
//! [`brute_force_step_sequences`] restricts the choice to one source per step
//! shared by every link, which is a subset of the tables above.

use crate::error::{Error, Result};
use crate::network::LinkIdx;
use crate::planner::PlanRequest;

/// Maximum number of candidates either solver will enumerate.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Relative margin a later candidate must beat the incumbent by.
const TIE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub objective: f64,
    /// `chosen[k - 1][p]` is the source used at `conditioning[k - 1][p]`.
    pub chosen: Vec<Vec<usize>>,
    pub conditioning: Vec<Vec<LinkIdx>>,
    pub enumerated: u64,
}

/// Per-(k, x, i) quantities that do not depend on the assignment.
struct Tables {
    conditioning: Vec<Vec<LinkIdx>>,
    /// `local[k - 1][p * S + i]`: KL minus expected immediate reward.
    local: Vec<Vec<f64>>,
    /// `next_pos[k - 1][p]`: frontier[k] positions of outgoing(x) entries.
    next_pos: Vec<Vec<Vec<usize>>>,
    frontier_len: Vec<usize>,
}

fn tables(req: &PlanRequest<'_>) -> Result<Tables> {
    req.validate()?;
    let net = req.network;
    let s = req.sources.len();
    let frontiers = net.reachable_frontiers(req.initial, req.horizon);
    let mut pos = vec![usize::MAX; net.len()];
    let mut local = Vec::with_capacity(req.horizon);
    let mut next_pos = Vec::with_capacity(req.horizon);
    for k in 1..=req.horizon {
        for (j, &y) in frontiers[k].iter().enumerate() {
            pos[y.index()] = j;
        }
        let mut loc = Vec::with_capacity(frontiers[k - 1].len() * s);
        let mut nxt = Vec::with_capacity(frontiers[k - 1].len());
        for &x in &frontiers[k - 1] {
            let out = net.outgoing(x);
            for source in req.sources {
                let kl = req.kl(source, x)?;
                let expected: f64 = source
                    .probs_of(x)
                    .iter()
                    .zip(out)
                    .map(|(&p, &y)| p * req.reward.get(k, y))
                    .sum();
                loc.push(kl - expected);
            }
            nxt.push(out.iter().map(|y| pos[y.index()]).collect());
        }
        local.push(loc);
        next_pos.push(nxt);
    }
    Ok(Tables {
        frontier_len: frontiers.iter().map(Vec::len).collect(),
        conditioning: frontiers.into_iter().take(req.horizon).collect(),
        local,
        next_pos,
    })
}

fn guard(s: usize, digits: usize) -> Result<u64> {
    let count = (s as f64).powi(digits as i32);
    if count > ENUMERATION_LIMIT as f64 {
        return Err(Error::GuardExceeded {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(count as u64)
}

/// Objective of a fixed assignment, `chosen[k - 1][p]` per conditioning link.
fn evaluate(req: &PlanRequest<'_>, t: &Tables, chosen: &[Vec<usize>], mass: &mut [Vec<f64>]) -> f64 {
    let s = req.sources.len();
    for m in mass.iter_mut() {
        m.iter_mut().for_each(|v| *v = 0.0);
    }
    mass[0][0] = 1.0;
    let mut total = 0.0;
    for k in 0..req.horizon {
        let (head, tail) = mass.split_at_mut(k + 1);
        let (cur, next) = (&head[k], &mut tail[0]);
        for (p, &x) in t.conditioning[k].iter().enumerate() {
            let m = cur[p];
            if m == 0.0 {
                continue;
            }
            let i = chosen[k][p];
            total += m * t.local[k][p * s + i];
            for (&prob, &q) in req.sources[i].probs_of(x).iter().zip(&t.next_pos[k][p]) {
                next[q] += m * prob;
            }
        }
    }
    total
}

fn better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - TIE_MARGIN * incumbent.abs().max(1.0)
}

fn search(
    req: &PlanRequest<'_>,
    t: Tables,
    count: u64,
    mut decode: impl FnMut(u64, &mut [Vec<usize>]),
) -> BruteForceResult {
    let mut mass: Vec<Vec<f64>> = t.frontier_len.iter().map(|&n| vec![0.0; n]).collect();
    let mut chosen: Vec<Vec<usize>> = t.conditioning.iter().map(|c| vec![0; c.len()]).collect();
    let mut best = chosen.clone();
    let mut best_value = f64::INFINITY;
    for code in 0..count {
        decode(code, &mut chosen);
        let value = evaluate(req, &t, &chosen, &mut mass);
        if best_value.is_infinite() || better(value, best_value) {
            best_value = value;
            best.clone_from(&chosen);
        }
    }
    BruteForceResult {
        objective: best_value,
        chosen: best,
        conditioning: t.conditioning,
        enumerated: count,
    }
}

/// Minimizes the objective over every per-link source table. Candidates are
/// visited in lexicographic order of the flattened table (step-major, then
/// frontier order, most significant first) and the earliest minimizer is
/// kept.
pub fn brute_force_plan(req: &PlanRequest<'_>) -> Result<BruteForceResult> {
    let t = tables(req)?;
    let s = req.sources.len();
    let digits: usize = t.conditioning.iter().map(Vec::len).sum();
    let count = guard(s, digits)?;
    Ok(search(req, t, count, |mut code, chosen| {
        for row in chosen.iter_mut().rev() {
            for slot in row.iter_mut().rev() {
                *slot = (code % s as u64) as usize;
                code /= s as u64;
            }
        }
    }))
}

/// Minimizes the objective over the `S^N` tables that use a single source
/// per step.
pub fn brute_force_step_sequences(req: &PlanRequest<'_>) -> Result<BruteForceResult> {
    let t = tables(req)?;
    let s = req.sources.len();
    let count = guard(s, req.horizon)?;
    Ok(search(req, t, count, |mut code, chosen| {
        for row in chosen.iter_mut().rev() {
            let i = (code % s as u64) as usize;
            code /= s as u64;
            row.iter_mut().for_each(|slot| *slot = i);
        }
    }))
}

/// Objective of a caller-supplied table, laid out like
/// [`BruteForceResult::chosen`].
pub fn evaluate_assignment(req: &PlanRequest<'_>, chosen: &[Vec<usize>]) -> Result<f64> {
    let t = tables(req)?;
    let shape_ok = chosen.len() == t.conditioning.len()
        && chosen
            .iter()
            .zip(&t.conditioning)
            .all(|(row, c)| row.len() == c.len() && row.iter().all(|&i| i < req.sources.len()));
    if !shape_ok {
        return Err(Error::InvalidRequest("assignment does not match the frontiers".into()));
    }
    let mut mass: Vec<Vec<f64>> = t.frontier_len.iter().map(|&n| vec![0.0; n]).collect();
    Ok(evaluate(req, &t, chosen, &mut mass))
}
