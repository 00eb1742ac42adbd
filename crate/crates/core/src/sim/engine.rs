use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use chrono::{DateTime, TimeDelta, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feed::{parse_message, AliasTable, BlockEvent, FeedCursor, FeedSource, ParseOutcome, ReplayFeed};
use crate::network::{LinkIdx, LotIdx, RoadNetwork};
use crate::planner::{draw, receding_horizon_step, Environment, RecedingConfig};
use crate::policy::{make_route_source, merge_sources, validate_absolute_continuity, SourcePolicy};
use crate::reward::{LinkCondition, LinkStatus, Occupancy};

use super::config::{Arrival, ScenarioConfig, VehicleKind};
use super::trace::{TraceEvent, TraceLog, TraceRecord, OBSTRUCTED};

/// Wait before a vehicle with no enterable next link tries again.
pub const RETRY_DELAY_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleStatus {
    Pending,
    Driving,
    Parked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Named(usize),
    /// Route source towards a lot-adjacent link after a full lot.
    Reroute(LinkIdx),
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: usize,
    pub kind: VehicleKind,
    pub origin: LinkIdx,
    pub destination_lot: LotIdx,
    pub arrival_time: f64,
    pub status: VehicleStatus,
    pub current: LinkIdx,
    pub entered_at: f64,
    pub parked_time: Option<f64>,
    pub parked_lot: Option<LotIdx>,
    pub obstruction_time: f64,
    pub plan_count: usize,
    pub enter_count: usize,
    on_obstructed: bool,
    target: Target,
    /// Controlled: sampled next link and the row it came from.
    next: Option<LinkIdx>,
    row: Vec<f64>,
    /// Uncontrolled: remaining route, `route[0]` is the current link.
    route: Vec<LinkIdx>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrive,
    LinkEnd,
    Retry,
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    vehicle: usize,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed so the max-heap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct FeedState {
    feed: ReplayFeed,
    aliases: AliasTable,
    cursor: FeedCursor,
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: TraceLog,
    pub vehicles: Vec<VehicleState>,
    pub occupancy: Occupancy,
    pub block_events: Vec<BlockEvent>,
}

pub struct SimState {
    net: RoadNetwork,
    cfg: ScenarioConfig,
    sources: Vec<SourcePolicy>,
    reroute_sources: BTreeMap<LinkIdx, SourcePolicy>,
    feed: Option<FeedState>,
    /// Not yet active, sorted by start time.
    pending: Vec<(f64, LinkCondition)>,
    conditions: Vec<LinkCondition>,
    block_events: Vec<BlockEvent>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    clock: f64,
    vehicles: Vec<VehicleState>,
    occupancy: Occupancy,
    rng: ChaCha8Rng,
    log: TraceLog,
}

/// Loads the network and feed named by `cfg` and schedules every arrival.
pub fn init_scenario(cfg: &ScenarioConfig) -> Result<SimState> {
    let mut net = RoadNetwork::load(&cfg.network)?;
    for w in net.warnings() {
        log::warn!("{}: {w}", cfg.network.display());
    }
    if let Some(cap) = cfg.lot_capacity {
        let caps = net.lots().iter().map(|l| (l.id.to_string(), cap)).collect();
        net = net.with_capacities(&caps)?;
    }
    let feed = match &cfg.feed {
        Some(spec) => {
            let feed = ReplayFeed::load(&spec.file)?;
            let aliases = AliasTable::load(&net, &spec.aliases)?;
            Some((feed, aliases))
        }
        None => None,
    };
    SimState::new(cfg.clone(), net, feed)
}

/// Runs a scenario to completion and returns its trace.
pub fn run(cfg: &ScenarioConfig) -> Result<TraceLog> {
    Ok(init_scenario(cfg)?.run_to_end()?.log)
}

impl SimState {
    /// Builds a simulation from an already loaded network and feed.
    pub fn new(cfg: ScenarioConfig, net: RoadNetwork, feed: Option<(ReplayFeed, AliasTable)>) -> Result<Self> {
        cfg.check()?;
        let sources = build_sources(&cfg, &net)?;
        let index_of = |name: &str| sources.iter().position(|s| s.name() == name);

        let mut pending = Vec::with_capacity(cfg.obstructions.len());
        for o in &cfg.obstructions {
            let link = net.idx(&o.link)?;
            let cond = match o.status {
                LinkStatus::Slowed => LinkCondition::slowed(&net, link, o.speed_mps.unwrap_or_default())?,
                LinkStatus::Blocked => LinkCondition::blocked(link),
                LinkStatus::Normal => continue,
            };
            pending.push((o.from_s, cond));
        }
        pending.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let arrivals = expand_arrivals(&cfg, &mut rng);

        let mut vehicles = Vec::with_capacity(arrivals.len());
        for (id, a) in arrivals.iter().enumerate() {
            let origin = net.idx(&a.origin)?;
            let target = index_of(&a.target)
                .ok_or_else(|| Error::InvalidScenario(format!("unknown target `{}`", a.target)))?;
            vehicles.push(VehicleState {
                id,
                kind: a.kind,
                origin,
                destination_lot: net.lot_idx(&a.destination_lot)?,
                arrival_time: a.time_s,
                status: VehicleStatus::Pending,
                current: origin,
                entered_at: a.time_s,
                parked_time: None,
                parked_lot: None,
                obstruction_time: 0.0,
                plan_count: 0,
                enter_count: 0,
                on_obstructed: false,
                target: Target::Named(target),
                next: None,
                row: Vec::new(),
                route: Vec::new(),
            });
        }

        // every controlled vehicle's target must dominate every source's support
        let mut targets: Vec<usize> = vehicles
            .iter()
            .filter(|v| v.kind == VehicleKind::Controlled)
            .filter_map(|v| match v.target {
                Target::Named(i) => Some(i),
                Target::Reroute(_) => None,
            })
            .collect();
        targets.sort_unstable();
        targets.dedup();
        for &t in &targets {
            for s in &sources {
                let report = validate_absolute_continuity(&net, s, &sources[t])?;
                if let Some(&(x, y)) = report.violations.first() {
                    return Err(Error::AbsoluteContinuity {
                        given: net.id(x).to_string(),
                        neighbor: net.id(y).to_string(),
                    });
                }
            }
        }

        let occupancy = Occupancy::empty(&net);
        let mut state = Self {
            feed: feed.map(|(feed, aliases)| FeedState {
                feed,
                aliases,
                cursor: FeedCursor::default(),
            }),
            log: TraceLog::new(cfg.duration_s),
            net,
            cfg,
            sources,
            reroute_sources: BTreeMap::new(),
            pending,
            conditions: Vec::new(),
            block_events: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            clock: 0.0,
            vehicles,
            occupancy,
            rng,
        };
        for id in 0..state.vehicles.len() {
            let t = state.vehicles[id].arrival_time;
            state.schedule(t, id, EventKind::Arrive);
        }
        Ok(state)
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.occupancy
    }

    pub fn conditions(&self) -> &[LinkCondition] {
        &self.conditions
    }

    pub fn log(&self) -> &TraceLog {
        &self.log
    }

    pub fn sources(&self) -> &[SourcePolicy] {
        &self.sources
    }

    /// Processes the earliest pending event. `None` once the queue is empty
    /// or the next event lies past the configured duration.
    pub fn step(&mut self) -> Result<Option<Vec<TraceRecord>>> {
        match self.queue.peek() {
            Some(ev) if ev.time <= self.cfg.duration_s => {}
            _ => return Ok(None),
        }
        let ev = self.queue.pop().expect("peeked");
        debug_assert!(ev.time >= self.clock);
        self.clock = ev.time;
        self.refresh_conditions()?;
        let before = self.log.records().len();
        match ev.kind {
            EventKind::Arrive => self.on_arrive(ev.vehicle)?,
            EventKind::LinkEnd | EventKind::Retry => self.on_link_end(ev.vehicle)?,
        }
        Ok(Some(self.log.records()[before..].to_vec()))
    }

    /// Steps until done, checking invariants after every event.
    pub fn run_to_end(mut self) -> Result<SimOutcome> {
        self.check_invariants()?;
        while self.step()?.is_some() {
            self.check_invariants()?;
        }
        let end = self.cfg.duration_s;
        for v in &mut self.vehicles {
            if v.status == VehicleStatus::Driving && v.on_obstructed {
                v.obstruction_time += (end - v.entered_at).max(0.0);
                v.on_obstructed = false;
            }
        }
        Ok(SimOutcome {
            log: self.log,
            vehicles: self.vehicles,
            occupancy: self.occupancy,
            block_events: self.block_events,
        })
    }

    /// Vehicle conservation, lot capacities, one plan per link entry for
    /// controlled vehicles, and queue times not in the past.
    pub fn check_invariants(&self) -> Result<()> {
        let count = |s: VehicleStatus| self.vehicles.iter().filter(|v| v.status == s).count();
        let arrived = self.vehicles.len() - count(VehicleStatus::Pending);
        if arrived != count(VehicleStatus::Driving) + count(VehicleStatus::Parked) {
            return Err(Error::Invariant("vehicle count not conserved".into()));
        }
        self.occupancy
            .check(&self.net)
            .map_err(|e| Error::Invariant(e.to_string()))?;
        let parked_per_lot = self.vehicles.iter().filter_map(|v| v.parked_lot).fold(
            vec![0u32; self.net.lots().len()],
            |mut acc, l| {
                acc[l.index()] += 1;
                acc
            },
        );
        if parked_per_lot != self.occupancy.counts() {
            return Err(Error::Invariant("occupancy disagrees with parked vehicles".into()));
        }
        for v in &self.vehicles {
            if v.kind == VehicleKind::Controlled && v.plan_count != v.enter_count {
                return Err(Error::Invariant(format!(
                    "vehicle {} planned {} times over {} link entries",
                    v.id, v.plan_count, v.enter_count
                )));
            }
        }
        if self.queue.iter().any(|e| e.time < self.clock) {
            return Err(Error::Invariant("event scheduled in the past".into()));
        }
        Ok(())
    }

    fn schedule(&mut self, time: f64, vehicle: usize, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            vehicle,
            kind,
        });
    }

    fn record(&mut self, vehicle: usize, event: TraceEvent, link: LinkIdx, detail: String) {
        self.log.push(TraceRecord {
            time: self.clock,
            vehicle,
            event,
            link: self.net.id(link).to_string(),
            detail,
        });
    }

    fn now(&self) -> DateTime<Utc> {
        self.cfg.start_time + TimeDelta::milliseconds((self.clock * 1000.0).round() as i64)
    }

    /// Activates due obstructions and applies new feed reports.
    fn refresh_conditions(&mut self) -> Result<()> {
        let due = self.pending.partition_point(|(from, _)| *from <= self.clock);
        for (_, cond) in self.pending.drain(..due) {
            self.conditions.push(cond);
        }
        let now = self.now();
        let Some(mut fs) = self.feed.take() else {
            return Ok(());
        };
        let polled = fs.feed.poll(fs.cursor, now);
        let messages = match polled {
            Ok((messages, cursor)) => {
                fs.cursor = cursor;
                messages
            }
            Err(e) => {
                self.feed = Some(fs);
                return Err(e);
            }
        };
        let today = now.date_naive();
        for msg in &messages {
            match parse_message(msg, &fs.aliases, today, self.clock) {
                ParseOutcome::Block(event) => {
                    log::info!(
                        "t={:.1}: `{}` blocked by a report from {}",
                        self.clock,
                        self.net.id(event.link),
                        msg.author
                    );
                    if !self.is_blocked(event.link) {
                        self.conditions.push(LinkCondition::blocked(event.link));
                    }
                    self.block_events.push(event);
                }
                ParseOutcome::Ignored(reason) => {
                    log::debug!("t={:.1}: ignored feed message ({reason}): {}", self.clock, msg.text);
                }
            }
        }
        self.feed = Some(fs);
        Ok(())
    }

    fn is_blocked(&self, x: LinkIdx) -> bool {
        self.conditions
            .iter()
            .any(|c| c.link == x && c.status == LinkStatus::Blocked)
    }

    fn is_obstructed(&self, x: LinkIdx) -> bool {
        self.conditions
            .iter()
            .any(|c| c.link == x && c.status != LinkStatus::Normal)
    }

    fn effective_speed(&self, x: LinkIdx) -> f64 {
        self.conditions
            .iter()
            .filter(|c| c.link == x && c.status == LinkStatus::Slowed)
            .map(|c| c.effective_speed)
            .fold(self.net.link(x).speed_mps, f64::min)
    }

    fn on_arrive(&mut self, id: usize) -> Result<()> {
        let v = &mut self.vehicles[id];
        v.status = VehicleStatus::Driving;
        let origin = v.origin;
        let detail = match (v.kind, v.target) {
            (VehicleKind::Controlled, Target::Named(i)) => format!("controlled;target={}", self.sources[i].name()),
            _ => format!("uncontrolled;lot={}", self.net.lot(v.destination_lot).id),
        };
        self.record(id, TraceEvent::Arrive, origin, detail);
        if self.vehicles[id].kind == VehicleKind::Uncontrolled {
            let lot = self.vehicles[id].destination_lot;
            self.vehicles[id].route = self.route_to_lot(origin, lot).unwrap_or_else(|| vec![origin]);
        }
        self.enter_link(id, origin)
    }

    fn enter_link(&mut self, id: usize, x: LinkIdx) -> Result<()> {
        let t = self.clock;
        self.leave_link(id);
        let obstructed = self.is_obstructed(x);
        let detail = if obstructed { OBSTRUCTED.to_string() } else { String::new() };
        self.record(id, TraceEvent::EnterLink, x, detail);
        let traversal = self.net.link(x).length_m / self.effective_speed(x);
        {
            let v = &mut self.vehicles[id];
            v.current = x;
            v.entered_at = t;
            v.on_obstructed = obstructed;
            v.enter_count += 1;
        }
        if self.vehicles[id].kind == VehicleKind::Controlled {
            self.replan(id)?;
        }
        self.schedule(t + traversal, id, EventKind::LinkEnd);
        Ok(())
    }

    fn leave_link(&mut self, id: usize) {
        let t = self.clock;
        let v = &mut self.vehicles[id];
        if v.on_obstructed {
            v.obstruction_time += t - v.entered_at;
            v.on_obstructed = false;
        }
    }

    fn target_source(&mut self, target: Target) -> Result<&SourcePolicy> {
        match target {
            Target::Named(i) => Ok(&self.sources[i]),
            Target::Reroute(link) => {
                if !self.reroute_sources.contains_key(&link) {
                    let name = format!("reroute:{}", self.net.id(link));
                    let src = make_route_source(&self.net, link, self.cfg.epsilon, name)?;
                    self.reroute_sources.insert(link, src);
                }
                Ok(&self.reroute_sources[&link])
            }
        }
    }

    fn replan(&mut self, id: usize) -> Result<()> {
        let current = self.vehicles[id].current;
        let target = self.vehicles[id].target;
        self.target_source(target)?;
        let target = match target {
            Target::Named(i) => &self.sources[i],
            Target::Reroute(link) => &self.reroute_sources[&link],
        };
        let env = Environment {
            occupancy: &self.occupancy,
            conditions: &self.conditions,
        };
        let cfg = RecedingConfig {
            horizon: self.cfg.horizon,
            sources: &self.sources,
            target: Some(target),
            sign: self.cfg.sign,
        };
        let decision = receding_horizon_step(&self.net, current, &env, &cfg, &mut self.rng)?;
        let v = &mut self.vehicles[id];
        v.plan_count += 1;
        v.next = Some(decision.next);
        v.row = decision.plan.first_row().to_vec();
        Ok(())
    }

    fn park(&mut self, id: usize, lot: LotIdx) {
        self.leave_link(id);
        self.occupancy.increment(lot);
        let t = self.clock;
        let v = &mut self.vehicles[id];
        v.status = VehicleStatus::Parked;
        v.parked_time = Some(t);
        v.parked_lot = Some(lot);
        let (current, detail) = (v.current, format!("lot={}", self.net.lot(lot).id));
        self.record(id, TraceEvent::Park, current, detail);
    }

    fn on_link_end(&mut self, id: usize) -> Result<()> {
        if self.vehicles[id].status != VehicleStatus::Driving {
            return Ok(());
        }
        match self.vehicles[id].kind {
            VehicleKind::Controlled => self.advance_controlled(id),
            VehicleKind::Uncontrolled => self.advance_uncontrolled(id),
        }
    }

    fn advance_controlled(&mut self, id: usize) -> Result<()> {
        let x = self.vehicles[id].current;
        let lots = &self.net.link(x).lots;
        if let Some(&lot) = lots.iter().find(|&&l| self.occupancy.has_vacancy(&self.net, l)) {
            self.park(id, lot);
            return Ok(());
        }
        if !lots.is_empty() {
            match self.nearest_vacant(x) {
                Some((lot, link)) => {
                    if self.vehicles[id].target != Target::Reroute(link) {
                        self.vehicles[id].target = Target::Reroute(link);
                        self.vehicles[id].destination_lot = lot;
                        let detail = format!("lot={}", self.net.lot(lot).id);
                        self.record(id, TraceEvent::Reroute, x, detail);
                    }
                }
                None => {
                    self.record(id, TraceEvent::Reroute, x, "no-vacancy".into());
                    return Ok(());
                }
            }
        }

        let mut next = self.vehicles[id].next.take();
        if let Some(y) = next {
            if self.is_blocked(y) {
                self.record(id, TraceEvent::BlockedSkip, x, format!("next={}", self.net.id(y)));
                next = None;
            }
        }
        if next.is_none() {
            // redraw from the current plan without the blocked neighbors
            let conditions = &self.conditions;
            let blocked = |y: LinkIdx| {
                conditions
                    .iter()
                    .any(|c| c.link == y && c.status == LinkStatus::Blocked)
            };
            let v = &self.vehicles[id];
            next = draw(self.net.outgoing(x), &v.row, &mut self.rng, blocked);
        }
        match next {
            Some(y) => self.enter_link(id, y),
            None => {
                self.schedule(self.clock + RETRY_DELAY_S, id, EventKind::Retry);
                Ok(())
            }
        }
    }

    fn advance_uncontrolled(&mut self, id: usize) -> Result<()> {
        let x = self.vehicles[id].current;
        let lot = self.vehicles[id].destination_lot;
        if self.net.link(x).lots.contains(&lot) {
            if self.occupancy.has_vacancy(&self.net, lot) {
                self.park(id, lot);
                return Ok(());
            }
            match self.nearest_vacant(x) {
                Some((new_lot, _)) => {
                    self.vehicles[id].destination_lot = new_lot;
                    self.vehicles[id].route = self.route_to_lot(x, new_lot).unwrap_or_else(|| vec![x]);
                    let detail = format!("lot={}", self.net.lot(new_lot).id);
                    self.record(id, TraceEvent::Reroute, x, detail);
                }
                None => {
                    self.record(id, TraceEvent::Reroute, x, "no-vacancy".into());
                    return Ok(());
                }
            }
        }

        let lot = self.vehicles[id].destination_lot;
        let mut next = self.vehicles[id].route.get(1).copied();
        if next.is_none() {
            self.vehicles[id].route = self.route_to_lot(x, lot).unwrap_or_else(|| vec![x]);
            next = self.vehicles[id].route.get(1).copied();
        }
        if let Some(y) = next {
            if self.is_blocked(y) {
                self.record(id, TraceEvent::BlockedSkip, x, format!("next={}", self.net.id(y)));
                self.vehicles[id].route = self.route_to_lot(x, lot).unwrap_or_else(|| vec![x]);
                next = self.vehicles[id].route.get(1).copied();
            }
        }
        match next {
            Some(y) => {
                self.vehicles[id].route.remove(0);
                self.enter_link(id, y)
            }
            None => {
                self.schedule(self.clock + RETRY_DELAY_S, id, EventKind::Retry);
                Ok(())
            }
        }
    }

    /// Cheapest route to any link next to `lot` that avoids blocked links.
    fn route_to_lot(&self, from: LinkIdx, lot: LotIdx) -> Option<Vec<LinkIdx>> {
        let mut best: Option<(f64, LinkIdx)> = None;
        for &a in &self.net.lot(lot).adjacent {
            let d = if a == from {
                0.0
            } else {
                self.net.distances_to(a, |y| self.is_blocked(y))[from.index()]
            };
            if d.is_finite() && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, a));
            }
        }
        let (_, to) = best?;
        self.net.shortest_path_avoiding(from, to, |y| self.is_blocked(y)).ok()
    }

    /// Closest lot with a free space, measured by free-flow time to its
    /// nearest adjacent link while avoiding blocked links.
    fn nearest_vacant(&self, from: LinkIdx) -> Option<(LotIdx, LinkIdx)> {
        let mut best: Option<(f64, LotIdx, LinkIdx)> = None;
        for lot in self.net.lot_indices() {
            if !self.occupancy.has_vacancy(&self.net, lot) {
                continue;
            }
            for &a in &self.net.lot(lot).adjacent {
                let d = if a == from {
                    0.0
                } else {
                    self.net.distances_to(a, |y| self.is_blocked(y))[from.index()]
                };
                if d.is_finite() && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, lot, a));
                }
            }
        }
        best.map(|(_, lot, link)| (lot, link))
    }
}

fn build_sources(cfg: &ScenarioConfig, net: &RoadNetwork) -> Result<Vec<SourcePolicy>> {
    let mut sources: Vec<SourcePolicy> = Vec::with_capacity(cfg.sources.len() + cfg.merged_sources.len());
    for spec in &cfg.sources {
        let dest = net.idx(&spec.destination)?;
        sources.push(make_route_source(
            net,
            dest,
            spec.epsilon.unwrap_or(cfg.epsilon),
            spec.name.clone(),
        )?);
    }
    for spec in &cfg.merged_sources {
        let mut parts = Vec::with_capacity(spec.parts.len());
        let mut weights = Vec::with_capacity(spec.parts.len());
        for (name, w) in &spec.parts {
            let src = sources
                .iter()
                .find(|s| s.name() == name)
                .ok_or_else(|| Error::InvalidScenario(format!("`{}` merges unknown source `{name}`", spec.name)))?;
            parts.push(src);
            weights.push(*w);
        }
        let merged = merge_sources(net, &parts, &weights, spec.name.clone())?;
        sources.push(merged);
    }
    Ok(sources)
}

/// Arrival list: explicit arrivals as given, or grouped vehicles shuffled
/// and spaced by the headway with a random subset controlled.
fn expand_arrivals(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Arrival> {
    if !cfg.arrivals.is_empty() {
        return cfg.arrivals.clone();
    }
    let mut fleet: Vec<&super::config::FleetGroup> = cfg
        .groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(g, g.count))
        .collect();
    fleet.shuffle(rng);
    let n = fleet.len();
    let controlled = cfg.controlled_count.unwrap_or(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut kinds = vec![VehicleKind::Uncontrolled; n];
    for &i in &order[..controlled] {
        kinds[i] = VehicleKind::Controlled;
    }
    fleet
        .into_iter()
        .enumerate()
        .map(|(i, g)| Arrival {
            time_s: i as f64 * cfg.headway_s,
            origin: g.origin.clone(),
            destination_lot: g.destination_lot.clone(),
            kind: kinds[i],
            target: g.target.clone(),
        })
        .collect()
}
