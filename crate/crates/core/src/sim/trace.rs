use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceEvent {
    Arrive,
    EnterLink,
    Park,
    Reroute,
    BlockedSkip,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Arrive => "arrive",
            TraceEvent::EnterLink => "enter_link",
            TraceEvent::Park => "park",
            TraceEvent::Reroute => "reroute",
            TraceEvent::BlockedSkip => "blocked_skip",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "arrive" => TraceEvent::Arrive,
            "enter_link" => TraceEvent::EnterLink,
            "park" => TraceEvent::Park,
            "reroute" => TraceEvent::Reroute,
            "blocked_skip" => TraceEvent::BlockedSkip,
            other => return Err(Error::MalformedLog(format!("unknown event `{other}`"))),
        })
    }
}

/// `detail` value marking a link entered while a condition was active.
pub const OBSTRUCTED: &str = "obstructed";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub vehicle: usize,
    pub event: TraceEvent,
    pub link: String,
    pub detail: String,
}

/// Everything that happened during one run, in processing order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
    duration_s: f64,
}

pub const CSV_HEADER: &str = "time,vehicle,event,link,detail";

impl TraceLog {
    pub fn new(duration_s: f64) -> Self {
        Self {
            records: Vec::new(),
            duration_s,
        }
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        debug_assert!(!record.detail.contains(',') && !record.link.contains(','));
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of vehicles with an `arrive` record.
    pub fn vehicle_count(&self) -> usize {
        self.records.iter().filter(|r| r.event == TraceEvent::Arrive).count()
    }

    pub fn for_vehicle(&self, vehicle: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.vehicle == vehicle)
    }

    /// Link ids a vehicle entered, in order.
    pub fn links_entered(&self, vehicle: usize) -> Vec<&str> {
        self.for_vehicle(vehicle)
            .filter(|r| r.event == TraceEvent::EnterLink)
            .map(|r| r.link.as_str())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{:.3},{},{},{},{}", r.time, r.vehicle, r.event, r.link, r.detail);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_csv(text: &str, duration_s: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::MalformedLog("missing header".into())),
        }
        let mut log = Self::new(duration_s);
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::MalformedLog(format!("line {}: {what}", n + 2));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            log.records.push(TraceRecord {
                time: fields[0].parse().map_err(|_| bad("bad time"))?,
                vehicle: fields[1].parse().map_err(|_| bad("bad vehicle"))?,
                event: fields[2].parse()?,
                link: fields[3].to_string(),
                detail: fields[4].to_string(),
            });
        }
        log.validate()?;
        Ok(log)
    }

    /// Per-vehicle records are time-ordered, start with `arrive`, and hold at
    /// most one `park`, after which nothing else happens to that vehicle.
    pub fn validate(&self) -> Result<()> {
        #[derive(Clone, Copy)]
        struct Seen {
            last: f64,
            parked: bool,
        }
        let mut seen: Vec<Option<Seen>> = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.vehicle >= seen.len() {
                seen.resize(r.vehicle + 1, None);
            }
            let slot = &mut seen[r.vehicle];
            match (slot.as_mut(), r.event) {
                (None, TraceEvent::Arrive) => {
                    *slot = Some(Seen {
                        last: r.time,
                        parked: false,
                    })
                }
                (None, _) => {
                    return Err(Error::MalformedLog(format!(
                        "record {i}: vehicle {} acts before arriving",
                        r.vehicle
                    )))
                }
                (Some(_), TraceEvent::Arrive) => {
                    return Err(Error::MalformedLog(format!("record {i}: vehicle {} arrives twice", r.vehicle)))
                }
                (Some(s), event) => {
                    if s.parked {
                        return Err(Error::MalformedLog(format!(
                            "record {i}: vehicle {} acts after parking",
                            r.vehicle
                        )));
                    }
                    if r.time < s.last {
                        return Err(Error::MalformedLog(format!(
                            "record {i}: vehicle {} goes back in time",
                            r.vehicle
                        )));
                    }
                    s.last = r.time;
                    s.parked = event == TraceEvent::Park;
                }
            }
        }
        Ok(())
    }
}
