//! Immutable road-link graph.
//!
//! Links are the states of the routing problem: a car sits on exactly one
//! link and moves to one of that link's outgoing neighbors. Links are kept in
//! file order, which is also the order used for deterministic tie-breaks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};

/// Relative slack under which two route costs are considered tied.
const COST_TIE_EPS: f64 = 1e-9;

/// External identifier of a road link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(String);

impl LinkId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for LinkId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// External identifier of a parking lot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LotId(String);

impl LotId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for LotId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dense position of a link inside its [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkIdx(u32);

impl LinkIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn new(i: usize) -> Self {
        Self::from_usize(i)
    }

    fn from_usize(i: usize) -> Self {
        Self(u32::try_from(i).expect("link count fits in u32"))
    }
}

/// Dense position of a parking lot inside its [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LotIdx(u32);

impl LotIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub id: LinkId,
    pub length_m: f64,
    pub speed_mps: f64,
    pub outgoing: Vec<LinkIdx>,
    /// Lots this link gives access to, in lot load order.
    pub lots: Vec<LotIdx>,
}

impl Link {
    /// Free-flow traversal time in seconds.
    pub fn free_flow_time(&self) -> f64 {
        self.length_m / self.speed_mps
    }
}

#[derive(Debug, Clone)]
pub struct ParkingLot {
    pub id: LotId,
    pub capacity: u32,
    pub adjacent: Vec<LinkIdx>,
}

/// On-disk network document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub links: Vec<LinkRecord>,
    #[serde(default)]
    pub lots: Vec<LotRecord>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: String,
    pub length_m: f64,
    pub speed_mps: f64,
    #[serde(default)]
    pub out: Vec<String>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LotRecord {
    pub id: String,
    pub capacity: u32,
    pub adjacent: Vec<String>,
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    links: Vec<Link>,
    by_id: HashMap<LinkId, LinkIdx>,
    incoming: Vec<Vec<LinkIdx>>,
    lots: Vec<ParkingLot>,
    lot_by_id: HashMap<LotId, LotIdx>,
    self_looped: Vec<LinkIdx>,
    warnings: Vec<String>,
    fingerprint: u64,
}

impl RoadNetwork {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_file(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "network document".into(),
            source,
        })?;
        Self::from_document(doc)
    }

    /// Builds a network, validating ids and references and adding a
    /// self-loop to every dead end.
    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        let mut warnings = Vec::new();
        for key in doc.unknown.keys() {
            warnings.push(format!("ignored unknown top-level field `{key}`"));
        }

        let mut by_id = HashMap::with_capacity(doc.links.len());
        for (i, rec) in doc.links.iter().enumerate() {
            if rec.id.is_empty() {
                return Err(Error::InvalidNetwork(format!("link #{i} has an empty id")));
            }
            if !(rec.length_m.is_finite() && rec.length_m > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "link `{}` has non-positive length {}",
                    rec.id, rec.length_m
                )));
            }
            if !(rec.speed_mps.is_finite() && rec.speed_mps > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "link `{}` has non-positive speed {}",
                    rec.id, rec.speed_mps
                )));
            }
            if by_id
                .insert(LinkId::new(rec.id.clone()), LinkIdx::from_usize(i))
                .is_some()
            {
                return Err(Error::InvalidNetwork(format!("duplicate link id `{}`", rec.id)));
            }
            for key in rec.unknown.keys() {
                warnings.push(format!("link `{}`: ignored unknown field `{key}`", rec.id));
            }
        }

        let mut links = Vec::with_capacity(doc.links.len());
        let mut self_looped = Vec::new();
        for (i, rec) in doc.links.iter().enumerate() {
            let mut outgoing = Vec::with_capacity(rec.out.len().max(1));
            for target in &rec.out {
                let idx = by_id.get(target.as_str()).copied().ok_or_else(|| {
                    Error::InvalidNetwork(format!(
                        "link `{}` references undefined neighbor `{target}`",
                        rec.id
                    ))
                })?;
                if outgoing.contains(&idx) {
                    return Err(Error::InvalidNetwork(format!(
                        "link `{}` lists neighbor `{target}` twice",
                        rec.id
                    )));
                }
                outgoing.push(idx);
            }
            if outgoing.is_empty() {
                outgoing.push(LinkIdx::from_usize(i));
                self_looped.push(LinkIdx::from_usize(i));
            }
            links.push(Link {
                id: LinkId::new(rec.id.clone()),
                length_m: rec.length_m,
                speed_mps: rec.speed_mps,
                outgoing,
                lots: Vec::new(),
            });
        }

        let mut lots = Vec::with_capacity(doc.lots.len());
        let mut lot_by_id = HashMap::new();
        for (j, rec) in doc.lots.iter().enumerate() {
            let lot_idx = LotIdx(u32::try_from(j).expect("lot count fits in u32"));
            if rec.id.is_empty() {
                return Err(Error::InvalidNetwork(format!("lot #{j} has an empty id")));
            }
            if lot_by_id.insert(LotId::new(rec.id.clone()), lot_idx).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate lot id `{}`", rec.id)));
            }
            if rec.adjacent.is_empty() {
                return Err(Error::InvalidNetwork(format!(
                    "lot `{}` has no adjacent links",
                    rec.id
                )));
            }
            let mut adjacent = Vec::with_capacity(rec.adjacent.len());
            for a in &rec.adjacent {
                let idx = by_id.get(a.as_str()).copied().ok_or_else(|| {
                    Error::InvalidNetwork(format!("lot `{}` references undefined link `{a}`", rec.id))
                })?;
                if !adjacent.contains(&idx) {
                    adjacent.push(idx);
                    links[idx.index()].lots.push(lot_idx);
                }
            }
            for key in rec.unknown.keys() {
                warnings.push(format!("lot `{}`: ignored unknown field `{key}`", rec.id));
            }
            lots.push(ParkingLot {
                id: LotId::new(rec.id.clone()),
                capacity: rec.capacity,
                adjacent,
            });
        }

        let mut incoming = vec![Vec::new(); links.len()];
        for (i, link) in links.iter().enumerate() {
            for &y in &link.outgoing {
                incoming[y.index()].push(LinkIdx::from_usize(i));
            }
        }

        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for link in &links {
            link.id.hash(&mut hasher);
            link.outgoing.hash(&mut hasher);
        }
        let fingerprint = hasher.finish();

        Ok(Self {
            links,
            by_id,
            incoming,
            lots,
            lot_by_id,
            self_looped,
            warnings,
            fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> impl ExactSizeIterator<Item = (LinkIdx, &Link)> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| (LinkIdx::from_usize(i), l))
    }

    pub fn link(&self, idx: LinkIdx) -> &Link {
        &self.links[idx.index()]
    }

    pub fn id(&self, idx: LinkIdx) -> &LinkId {
        &self.links[idx.index()].id
    }

    pub fn idx(&self, id: &str) -> Result<LinkIdx> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownLink(id.to_string()))
    }

    pub fn lots(&self) -> &[ParkingLot] {
        &self.lots
    }

    pub fn lot(&self, idx: LotIdx) -> &ParkingLot {
        &self.lots[idx.index()]
    }

    pub fn lot_idx(&self, id: &str) -> Result<LotIdx> {
        self.lot_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownLot(id.to_string()))
    }

    pub fn lot_indices(&self) -> impl ExactSizeIterator<Item = LotIdx> {
        (0..self.lots.len()).map(|j| LotIdx(j as u32))
    }

    /// Overrides lot capacities, e.g. to run the same map at a different scale.
    pub fn with_capacities(mut self, capacities: &BTreeMap<String, u32>) -> Result<Self> {
        for (id, &cap) in capacities {
            let idx = self.lot_idx(id)?;
            self.lots[idx.index()].capacity = cap;
        }
        Ok(self)
    }

    /// Outgoing neighbors of `x` in load order. Never empty.
    pub fn outgoing(&self, x: LinkIdx) -> &[LinkIdx] {
        &self.links[x.index()].outgoing
    }

    pub fn outgoing_by_id(&self, id: &str) -> Result<Vec<&LinkId>> {
        let x = self.idx(id)?;
        Ok(self.outgoing(x).iter().map(|&y| self.id(y)).collect())
    }

    pub fn incoming(&self, x: LinkIdx) -> &[LinkIdx] {
        &self.incoming[x.index()]
    }

    /// Dead-end links that received a self-loop at load time.
    pub fn self_looped(&self) -> &[LinkIdx] {
        &self.self_looped
    }

    /// Unknown fields dropped by the loader.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Identity of the link set and adjacency; policies built on one network
    /// carry it so they cannot be mixed with another.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn mean_out_degree(&self) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        let total: usize = self.links.iter().map(|l| l.outgoing.len()).sum();
        total as f64 / self.links.len() as f64
    }

    /// `frontiers[k]` is the set of links reachable in exactly `k` moves from
    /// `x0`, in first-discovery order.
    pub fn reachable_frontiers(&self, x0: LinkIdx, steps: usize) -> Vec<Vec<LinkIdx>> {
        let mut frontiers = Vec::with_capacity(steps + 1);
        frontiers.push(vec![x0]);
        // stamp[y] == k + 1 marks y as already in frontier k
        let mut stamp = vec![0u32; self.links.len()];
        for k in 1..=steps {
            let prev: &Vec<LinkIdx> = &frontiers[k - 1];
            let mut next = Vec::new();
            for &x in prev {
                for &y in self.outgoing(x) {
                    let s = &mut stamp[y.index()];
                    if *s != k as u32 {
                        *s = k as u32;
                        next.push(y);
                    }
                }
            }
            frontiers.push(next);
        }
        frontiers
    }

    pub fn reachable_frontiers_by_id(&self, x0: &str, steps: usize) -> Result<Vec<Vec<LinkIdx>>> {
        Ok(self.reachable_frontiers(self.idx(x0)?, steps))
    }

    /// Free-flow cost of following `path`: the traversal times of every link
    /// after the first one.
    pub fn path_cost(&self, path: &[LinkIdx]) -> f64 {
        path.iter()
            .skip(1)
            .map(|&x| self.link(x).free_flow_time())
            .sum()
    }

    /// Free-flow cost-to-go from every link to `target` (`0` at the target,
    /// infinite where unreachable). Links for which `avoid` returns true are
    /// never entered.
    pub fn distances_to(&self, target: LinkIdx, avoid: impl Fn(LinkIdx) -> bool) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.links.len()];
        dist[target.index()] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            cost: 0.0,
            link: target,
        });
        while let Some(HeapEntry { cost, link: y }) = heap.pop() {
            if cost > dist[y.index()] {
                continue;
            }
            if y != target && avoid(y) {
                continue;
            }
            let step = self.link(y).free_flow_time();
            for &x in self.incoming(y) {
                let candidate = cost + step;
                if candidate < dist[x.index()] {
                    dist[x.index()] = candidate;
                    heap.push(HeapEntry {
                        cost: candidate,
                        link: x,
                    });
                }
            }
        }
        if avoid(target) {
            // entering the target is itself forbidden; only staying put works
            for (i, d) in dist.iter_mut().enumerate() {
                if i != target.index() {
                    *d = f64::INFINITY;
                }
            }
        }
        dist
    }

    /// The neighbor of `x` that starts a cheapest continuation under `dist`.
    /// Ties go to the lexicographically smallest link id.
    pub fn next_hop(&self, x: LinkIdx, dist: &[f64], avoid: impl Fn(LinkIdx) -> bool) -> Option<LinkIdx> {
        let mut best: Option<(f64, LinkIdx)> = None;
        for &y in self.outgoing(x) {
            if avoid(y) || !dist[y.index()].is_finite() {
                continue;
            }
            let cost = self.link(y).free_flow_time() + dist[y.index()];
            best = match best {
                None => Some((cost, y)),
                Some((bc, by)) => {
                    let tol = COST_TIE_EPS * bc.abs().max(1.0);
                    if cost < bc - tol {
                        Some((cost, y))
                    } else if cost <= bc + tol && self.id(y) < self.id(by) {
                        Some((bc.min(cost), y))
                    } else {
                        Some((bc, by))
                    }
                }
            };
        }
        best.map(|(_, y)| y)
    }

    /// Cheapest free-flow route from `from` to `to`, both included.
    pub fn shortest_path(&self, from: LinkIdx, to: LinkIdx) -> Result<Vec<LinkIdx>> {
        self.shortest_path_avoiding(from, to, |_| false)
    }

    /// Like [`shortest_path`](Self::shortest_path) but never entering a link
    /// for which `avoid` returns true.
    pub fn shortest_path_avoiding(
        &self,
        from: LinkIdx,
        to: LinkIdx,
        avoid: impl Fn(LinkIdx) -> bool,
    ) -> Result<Vec<LinkIdx>> {
        if from == to {
            return Ok(vec![from]);
        }
        let dist = self.distances_to(to, &avoid);
        if !dist[from.index()].is_finite() {
            return Err(Error::Unreachable {
                from: self.id(from).to_string(),
                to: self.id(to).to_string(),
            });
        }
        let mut path = vec![from];
        let mut x = from;
        while x != to {
            x = self
                .next_hop(x, &dist, &avoid)
                .expect("finite distance implies a next hop");
            path.push(x);
            debug_assert!(path.len() <= self.links.len() + 1);
        }
        Ok(path)
    }

    pub fn shortest_path_by_id(&self, from: &str, to: &str) -> Result<Vec<LinkId>> {
        let path = self.shortest_path(self.idx(from)?, self.idx(to)?)?;
        Ok(path.into_iter().map(|x| self.id(x).clone()).collect())
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    cost: f64,
    link: LinkIdx,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // min-heap on cost, then on index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.link.cmp(&self.link))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> RoadNetwork {
        RoadNetwork::from_json(
            r#"{"links":[
                {"id":"A","length_m":100,"speed_mps":10,"out":["B"]},
                {"id":"B","length_m":100,"speed_mps":10,"out":["C"]},
                {"id":"C","length_m":100,"speed_mps":10,"out":[]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn dead_end_gets_self_loop() {
        let net = chain();
        let c = net.idx("C").unwrap();
        assert_eq!(net.outgoing(c), &[c]);
        assert_eq!(net.self_looped(), &[c]);
        let a = net.idx("A").unwrap();
        assert_eq!(net.outgoing_by_id("A").unwrap(), vec![&LinkId::new("B")]);
        assert_eq!(net.outgoing(a).len(), 1);
    }

    #[test]
    fn rejects_dangling_neighbor() {
        let err = RoadNetwork::from_json(
            r#"{"links":[{"id":"A","length_m":1,"speed_mps":1,"out":["Z"]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(ref m) if m.contains("`Z`")), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_bad_numbers() {
        let dup = RoadNetwork::from_json(
            r#"{"links":[{"id":"A","length_m":1,"speed_mps":1},{"id":"A","length_m":1,"speed_mps":1}]}"#,
        );
        assert!(matches!(dup, Err(Error::InvalidNetwork(_))));
        let len = RoadNetwork::from_json(r#"{"links":[{"id":"A","length_m":0,"speed_mps":1}]}"#);
        assert!(matches!(len, Err(Error::InvalidNetwork(_))));
        let speed = RoadNetwork::from_json(r#"{"links":[{"id":"A","length_m":1,"speed_mps":-2}]}"#);
        assert!(matches!(speed, Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn unknown_fields_are_reported() {
        let net = RoadNetwork::from_json(
            r#"{"links":[{"id":"A","length_m":1,"speed_mps":1,"lanes":2}],"crs":"wgs84"}"#,
        )
        .unwrap();
        assert_eq!(net.warnings().len(), 2);
    }

    #[test]
    fn frontiers_on_chain() {
        let net = chain();
        let a = net.idx("A").unwrap();
        assert_eq!(net.reachable_frontiers(a, 0), vec![vec![a]]);
        let f = net.reachable_frontiers(a, 2);
        let ids: Vec<Vec<&str>> = f
            .iter()
            .map(|s| s.iter().map(|&x| net.id(x).as_str()).collect())
            .collect();
        assert_eq!(ids, vec![vec!["A"], vec!["B"], vec!["C"]]);
    }

    #[test]
    fn shortest_path_prefers_faster_route() {
        let net = RoadNetwork::from_json(
            r#"{"links":[
                {"id":"s","length_m":10,"speed_mps":10,"out":["long","short"]},
                {"id":"long","length_m":500,"speed_mps":10,"out":["t"]},
                {"id":"short","length_m":100,"speed_mps":10,"out":["t"]},
                {"id":"t","length_m":10,"speed_mps":10,"out":[]}
            ]}"#,
        )
        .unwrap();
        let p = net.shortest_path_by_id("s", "t").unwrap();
        assert_eq!(p, vec![LinkId::new("s"), LinkId::new("short"), LinkId::new("t")]);
        assert_eq!(net.shortest_path_by_id("t", "t").unwrap(), vec![LinkId::new("t")]);
        let err = net.shortest_path_by_id("t", "s").unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
    }

    #[test]
    fn equal_cost_ties_break_on_id() {
        let net = RoadNetwork::from_json(
            r#"{"links":[
                {"id":"s","length_m":10,"speed_mps":10,"out":["b","a"]},
                {"id":"b","length_m":100,"speed_mps":10,"out":["t"]},
                {"id":"a","length_m":100,"speed_mps":10,"out":["t"]},
                {"id":"t","length_m":10,"speed_mps":10,"out":[]}
            ]}"#,
        )
        .unwrap();
        let p = net.shortest_path_by_id("s", "t").unwrap();
        assert_eq!(p[1].as_str(), "a");
    }

    #[test]
    fn avoiding_forces_detour_or_fails() {
        let net = RoadNetwork::from_json(
            r#"{"links":[
                {"id":"s","length_m":10,"speed_mps":10,"out":["long","short"]},
                {"id":"long","length_m":500,"speed_mps":10,"out":["t"]},
                {"id":"short","length_m":100,"speed_mps":10,"out":["t"]},
                {"id":"t","length_m":10,"speed_mps":10,"out":[]}
            ]}"#,
        )
        .unwrap();
        let s = net.idx("s").unwrap();
        let t = net.idx("t").unwrap();
        let short = net.idx("short").unwrap();
        let long = net.idx("long").unwrap();
        let p = net.shortest_path_avoiding(s, t, |x| x == short).unwrap();
        assert_eq!(p, vec![s, long, t]);
        assert!(net
            .shortest_path_avoiding(s, t, |x| x == short || x == long)
            .is_err());
    }
}
