//! Conditional turning-probability tables over a road network.
//!
//! A [`SourcePolicy`] stores one row per link; row `x` is a distribution over
//! `outgoing(x)`, laid out in the network's neighbor order. Keeping rows
//! aligned with the adjacency makes "support within the outgoing neighbors"
//! hold by construction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{LinkIdx, RoadNetwork};

/// Rows must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Default mass spread over the non-routed neighbors of a route source.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Borrowed view of one conditional distribution `π(· | given)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalRow<'a> {
    pub given: LinkIdx,
    /// Probabilities aligned with `outgoing(given)`.
    pub probs: &'a [f64],
}

/// A full conditional table, one row per network link.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePolicy {
    name: String,
    fingerprint: u64,
    offsets: Vec<usize>,
    probs: Vec<f64>,
}

impl SourcePolicy {
    /// Builds a policy from per-link rows, validating each one.
    pub fn from_rows(net: &RoadNetwork, name: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        if rows.len() != net.len() {
            return Err(Error::InvalidPolicy {
                policy: name,
                reason: format!("{} rows for {} links", rows.len(), net.len()),
            });
        }
        let mut offsets = Vec::with_capacity(net.len() + 1);
        let mut probs = Vec::new();
        offsets.push(0);
        for ((x, _), row) in net.links().zip(rows) {
            if row.len() != net.outgoing(x).len() {
                return Err(Error::InvalidPolicy {
                    policy: name,
                    reason: format!(
                        "row for `{}` has {} entries, link has {} neighbors",
                        net.id(x),
                        row.len(),
                        net.outgoing(x).len()
                    ),
                });
            }
            check_row(&name, net, x, &row)?;
            probs.extend_from_slice(&row);
            offsets.push(probs.len());
        }
        Ok(Self {
            name,
            fingerprint: net.fingerprint(),
            offsets,
            probs,
        })
    }

    fn from_fn(net: &RoadNetwork, name: impl Into<String>, mut row: impl FnMut(LinkIdx, &mut [f64])) -> Self {
        let mut offsets = Vec::with_capacity(net.len() + 1);
        let mut probs = Vec::new();
        offsets.push(0);
        for (x, link) in net.links() {
            let start = probs.len();
            probs.resize(start + link.outgoing.len(), 0.0);
            row(x, &mut probs[start..]);
            offsets.push(probs.len());
        }
        Self {
            name: name.into(),
            fingerprint: net.fingerprint(),
            offsets,
            probs,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn row(&self, x: LinkIdx) -> ConditionalRow<'_> {
        ConditionalRow {
            given: x,
            probs: self.probs_of(x),
        }
    }

    #[inline]
    pub fn probs_of(&self, x: LinkIdx) -> &[f64] {
        &self.probs[self.offsets[x.index()]..self.offsets[x.index() + 1]]
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Serializes as `{link_id: {neighbor_id: prob}}`; zero entries are omitted.
    pub fn to_json(&self, net: &RoadNetwork) -> Result<String> {
        self.ensure_network(net)?;
        let mut doc: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for (x, link) in net.links() {
            let row = doc.entry(link.id.as_str()).or_default();
            for (&y, &p) in net.outgoing(x).iter().zip(self.probs_of(x)) {
                if p > 0.0 {
                    row.insert(net.id(y).as_str(), p);
                }
            }
        }
        serde_json::to_string_pretty(&doc).map_err(|source| Error::Json {
            context: format!("policy `{}`", self.name),
            source,
        })
    }

    /// Parses the `{link_id: {neighbor_id: prob}}` form. Every link needs a
    /// row; neighbors left out get probability zero.
    pub fn from_json(net: &RoadNetwork, name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let doc: BTreeMap<String, BTreeMap<String, f64>> =
            serde_json::from_str(text).map_err(|source| Error::Json {
                context: format!("policy `{name}`"),
                source,
            })?;
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; net.len()];
        for (link, entries) in &doc {
            let x = net.idx(link)?;
            let out = net.outgoing(x);
            let mut row = vec![0.0; out.len()];
            for (neighbor, &p) in entries {
                let y = net.idx(neighbor)?;
                let pos = out.iter().position(|&o| o == y).ok_or_else(|| Error::InvalidPolicy {
                    policy: name.clone(),
                    reason: format!("`{neighbor}` is not an outgoing neighbor of `{link}`"),
                })?;
                row[pos] = p;
            }
            rows[x.index()] = Some(row);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| Error::InvalidPolicy {
                    policy: name.clone(),
                    reason: format!("missing row for `{}`", net.links().nth(i).unwrap().1.id),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(net, name, rows)
    }

    pub(crate) fn ensure_network(&self, net: &RoadNetwork) -> Result<()> {
        if self.fingerprint != net.fingerprint() {
            return Err(Error::InvalidPolicy {
                policy: self.name.clone(),
                reason: "built for a different network".into(),
            });
        }
        Ok(())
    }
}

fn check_row(name: &str, net: &RoadNetwork, x: LinkIdx, row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidPolicy {
                policy: name.to_string(),
                reason: format!("row `{}` has probability {p} outside [0, 1]", net.id(x)),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidPolicy {
            policy: name.to_string(),
            reason: format!("row `{}` sums to {sum}", net.id(x)),
        });
    }
    Ok(())
}

/// `D_KL(a || b)` in nats over aligned probability slices, with `0 log 0 = 0`.
///
/// Returns the position of the first entry where `a` has mass and `b` does
/// not.
#[inline]
pub(crate) fn kl_slices(a: &[f64], b: &[f64]) -> std::result::Result<f64, usize> {
    debug_assert_eq!(a.len(), b.len());
    let mut kl = 0.0;
    for (j, (&p, &q)) in a.iter().zip(b).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(j);
            }
            kl += p * (p / q).ln();
        }
    }
    // rounding can leave a tiny negative sum when a == b up to ulp
    Ok(kl.max(0.0))
}

/// KL divergence against the uniform row of the same width.
#[inline]
pub(crate) fn kl_to_uniform(a: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mut kl = 0.0;
    for &p in a {
        if p > 0.0 {
            kl += p * (p * n).ln();
        }
    }
    kl.max(0.0)
}

/// `D_KL(a || b)` in nats.
pub fn kl_divergence(net: &RoadNetwork, a: &ConditionalRow<'_>, b: &ConditionalRow<'_>) -> Result<f64> {
    if a.given != b.given {
        return Err(Error::InvalidPolicy {
            policy: "kl".into(),
            reason: format!(
                "rows condition on different links `{}` and `{}`",
                net.id(a.given),
                net.id(b.given)
            ),
        });
    }
    if a.probs.len() != b.probs.len() {
        return Err(Error::InvalidPolicy {
            policy: "kl".into(),
            reason: "rows have different widths".into(),
        });
    }
    kl_slices(a.probs, b.probs).map_err(|j| Error::AbsoluteContinuity {
        given: net.id(a.given).to_string(),
        neighbor: net.id(net.outgoing(a.given)[j]).to_string(),
    })
}

/// Route-following source: from every link, the first hop of the cheapest
/// route to `destination` gets `1 - epsilon` and the other neighbors share
/// `epsilon` evenly. Links with a single neighbor put all mass on it; links
/// that cannot reach the destination get the uniform row.
pub fn make_route_source(
    net: &RoadNetwork,
    destination: LinkIdx,
    epsilon: f64,
    name: impl Into<String>,
) -> Result<SourcePolicy> {
    if destination.index() >= net.len() {
        return Err(Error::UnknownLink(format!("#{}", destination.index())));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidPolicy {
            policy: name.into(),
            reason: format!("epsilon {epsilon} outside (0, 1)"),
        });
    }
    let dist = net.distances_to(destination, |_| false);
    Ok(SourcePolicy::from_fn(net, name, |x, row| {
        let out = net.outgoing(x);
        let d = out.len();
        if d == 1 {
            row[0] = 1.0;
            return;
        }
        match net.next_hop(x, &dist, |_| false) {
            Some(hop) => {
                let other = epsilon / (d - 1) as f64;
                for (p, &y) in row.iter_mut().zip(out) {
                    *p = if y == hop { 1.0 - epsilon } else { other };
                }
            }
            None => row.fill(1.0 / d as f64),
        }
    }))
}

/// Row-wise convex combination of sources built on the same network.
pub fn merge_sources(
    net: &RoadNetwork,
    sources: &[&SourcePolicy],
    weights: &[f64],
    name: impl Into<String>,
) -> Result<SourcePolicy> {
    let name = name.into();
    if sources.is_empty() || sources.len() != weights.len() {
        return Err(Error::InvalidPolicy {
            policy: name,
            reason: format!("{} sources with {} weights", sources.len(), weights.len()),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
        || (weights.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL
    {
        return Err(Error::InvalidPolicy {
            policy: name,
            reason: format!("merge weights {weights:?} are not a probability vector"),
        });
    }
    for s in sources {
        s.ensure_network(net)?;
    }
    Ok(SourcePolicy::from_fn(net, name, |x, row| {
        for (s, &w) in sources.iter().zip(weights) {
            for (acc, &p) in row.iter_mut().zip(s.probs_of(x)) {
                *acc += w * p;
            }
        }
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }))
}

/// Uniform distribution over each link's outgoing neighbors.
pub fn uniform_target(net: &RoadNetwork) -> SourcePolicy {
    SourcePolicy::from_fn(net, "uniform", |_, row| {
        let p = 1.0 / row.len() as f64;
        row.fill(p);
    })
}

/// Outcome of an absolute-continuity check.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContinuityReport {
    /// `(given, neighbor)` pairs where the source has mass and the target has none.
    pub violations: Vec<(LinkIdx, LinkIdx)>,
}

impl ContinuityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every source row is supported inside the target row.
pub fn validate_absolute_continuity(
    net: &RoadNetwork,
    source: &SourcePolicy,
    target: &SourcePolicy,
) -> Result<ContinuityReport> {
    source.ensure_network(net)?;
    target.ensure_network(net)?;
    let mut report = ContinuityReport::default();
    for (x, _) in net.links() {
        let out = net.outgoing(x);
        for ((&p, &q), &y) in source.probs_of(x).iter().zip(target.probs_of(x)).zip(out) {
            if p > 0.0 && q <= 0.0 {
                report.violations.push((x, y));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fork() -> RoadNetwork {
        RoadNetwork::from_json(
            r#"{"links":[
                {"id":"a","length_m":10,"speed_mps":10,"out":["b","c","d"]},
                {"id":"b","length_m":10,"speed_mps":10,"out":["e"]},
                {"id":"c","length_m":50,"speed_mps":10,"out":["e"]},
                {"id":"d","length_m":90,"speed_mps":10,"out":["e"]},
                {"id":"e","length_m":10,"speed_mps":10,"out":["e","a"]},
                {"id":"z","length_m":10,"speed_mps":10,"out":["z"]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn kl_known_values() {
        let net = RoadNetwork::from_json(
            r#"{"links":[
                {"id":"x","length_m":1,"speed_mps":1,"out":["u","v"]},
                {"id":"u","length_m":1,"speed_mps":1,"out":[]},
                {"id":"v","length_m":1,"speed_mps":1,"out":[]}
            ]}"#,
        )
        .unwrap();
        let x = net.idx("x").unwrap();
        let row = |p: &'static [f64]| ConditionalRow { given: x, probs: p };
        assert_eq!(kl_divergence(&net, &row(&[0.3, 0.7]), &row(&[0.3, 0.7])).unwrap(), 0.0);
        // 0.9 ln 1.8 + 0.1 ln 0.2
        let kl = kl_divergence(&net, &row(&[0.9, 0.1]), &row(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(kl, 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(kl, 0.368_064, epsilon = 1e-6);
        let err = kl_divergence(&net, &row(&[1.0, 0.0]), &row(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::AbsoluteContinuity { ref neighbor, .. } if neighbor == "u"));
        // zero mass in `a` contributes nothing even where `b` is zero
        assert_eq!(kl_divergence(&net, &row(&[0.0, 1.0]), &row(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn route_source_shapes() {
        let net = fork();
        let e = net.idx("e").unwrap();
        let src = make_route_source(&net, e, 0.1, "to_e").unwrap();
        let a = net.idx("a").unwrap();
        assert_eq!(src.probs_of(a), &[0.9, 0.05, 0.05]);
        assert_eq!(src.probs_of(net.idx("b").unwrap()), &[1.0]);
        // z cannot reach e
        let z = net.idx("z").unwrap();
        assert_eq!(src.probs_of(z), &[1.0]);
        assert!(make_route_source(&net, e, 0.0, "bad").is_err());
        assert!(make_route_source(&net, e, 1.0, "bad").is_err());
    }

    #[test]
    fn unreachable_rows_fall_back_to_uniform() {
        let net = fork();
        let z = net.idx("z").unwrap();
        let src = make_route_source(&net, z, 0.2, "to_z").unwrap();
        let a = net.idx("a").unwrap();
        for &p in src.probs_of(a) {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn merge_identity_and_halves() {
        let net = fork();
        let a = net.idx("a").unwrap();
        let s1 = make_route_source(&net, net.idx("b").unwrap(), 0.1, "b").unwrap();
        let s2 = make_route_source(&net, net.idx("d").unwrap(), 0.1, "d").unwrap();
        let same = merge_sources(&net, &[&s1], &[1.0], "b").unwrap();
        assert_eq!(same, s1);
        let half = merge_sources(&net, &[&s1, &s2], &[0.5, 0.5], "m").unwrap();
        assert_abs_diff_eq!(half.probs_of(a)[0], 0.475, epsilon = 1e-15);
        assert_abs_diff_eq!(half.probs_of(a)[2], 0.475, epsilon = 1e-15);
        assert!(merge_sources(&net, &[&s1, &s2], &[0.7, 0.7], "m").is_err());
        assert!(merge_sources(&net, &[&s1], &[0.5, 0.5], "m").is_err());
    }

    #[test]
    fn merge_of_point_masses() {
        let net = RoadNetwork::from_json(
            r#"{"links":[
                {"id":"x","length_m":1,"speed_mps":1,"out":["u","v"]},
                {"id":"u","length_m":1,"speed_mps":1,"out":[]},
                {"id":"v","length_m":1,"speed_mps":1,"out":[]}
            ]}"#,
        )
        .unwrap();
        let s1 = SourcePolicy::from_rows(&net, "1", vec![vec![1.0, 0.0], vec![1.0], vec![1.0]]).unwrap();
        let s2 = SourcePolicy::from_rows(&net, "2", vec![vec![0.0, 1.0], vec![1.0], vec![1.0]]).unwrap();
        let m = merge_sources(&net, &[&s1, &s2], &[0.5, 0.5], "m").unwrap();
        assert_eq!(m.probs_of(net.idx("x").unwrap()), &[0.5, 0.5]);
    }

    #[test]
    fn merge_rejects_foreign_network() {
        let net = fork();
        let other = RoadNetwork::from_json(r#"{"links":[{"id":"q","length_m":1,"speed_mps":1}]}"#).unwrap();
        let s = uniform_target(&other);
        assert!(merge_sources(&net, &[&s], &[1.0], "m").is_err());
    }

    #[test]
    fn uniform_rows() {
        let net = fork();
        let u = uniform_target(&net);
        assert_eq!(u.probs_of(net.idx("e").unwrap()), &[0.5, 0.5]);
        assert_eq!(u.probs_of(net.idx("z").unwrap()), &[1.0]);
    }

    #[test]
    fn continuity_report_lists_pairs() {
        let net = fork();
        let u = uniform_target(&net);
        let src = make_route_source(&net, net.idx("c").unwrap(), 0.1, "c").unwrap();
        assert!(validate_absolute_continuity(&net, &src, &u).unwrap().is_ok());

        let mut rows: Vec<Vec<f64>> = net.links().map(|(x, _)| u.probs_of(x).to_vec()).collect();
        rows[0] = vec![1.0, 0.0, 0.0];
        let peaked = SourcePolicy::from_rows(&net, "peaked", rows).unwrap();
        let report = validate_absolute_continuity(&net, &u, &peaked).unwrap();
        let a = net.idx("a").unwrap();
        assert_eq!(
            report.violations,
            vec![(a, net.idx("c").unwrap()), (a, net.idx("d").unwrap())]
        );
    }

    #[test]
    fn json_round_trip_and_errors() {
        let net = fork();
        let src = make_route_source(&net, net.idx("e").unwrap(), 0.1, "to_e").unwrap();
        let text = src.to_json(&net).unwrap();
        let back = SourcePolicy::from_json(&net, "to_e", &text).unwrap();
        assert_eq!(back, src);

        let bad = r#"{"a":{"e":1.0}}"#;
        assert!(SourcePolicy::from_json(&net, "bad", bad).is_err());
    }

    #[test]
    fn from_rows_validates_sums() {
        let net = fork();
        let mut rows: Vec<Vec<f64>> = net.links().map(|(x, _)| vec![1.0 / net.outgoing(x).len() as f64; net.outgoing(x).len()]).collect();
        rows[0] = vec![0.5, 0.5, 0.5];
        assert!(SourcePolicy::from_rows(&net, "bad", rows).is_err());
    }
}
