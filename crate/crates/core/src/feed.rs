//! Road-closure reports from a social feed.
//!
//! A message becomes a [`BlockEvent`] when it carries the experiment hashtag,
//! contains the word "blocked", names a known place, and is not older than
//! the current day. Live clients are out of scope; [`ReplayFeed`] plays back
//! a newline-delimited JSON file against the simulation clock.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::network::{LinkIdx, RoadNetwork};

pub const EXPERIMENT_HASHTAG: &str = "#sumo_experiment";
pub const BLOCK_KEYWORD: &str = "blocked";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedMessage {
    pub author: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEvent {
    pub link: LinkIdx,
    pub source_message: FeedMessage,
    /// Simulation clock (seconds) when the message was parsed.
    pub detected_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IgnoreReason {
    MissingHashtag,
    MissingKeyword,
    NoLinkIdentifier,
    Stale,
}

impl IgnoreReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IgnoreReason::MissingHashtag => "missing-hashtag",
            IgnoreReason::MissingKeyword => "missing-keyword",
            IgnoreReason::NoLinkIdentifier => "no-link-identifier",
            IgnoreReason::Stale => "stale",
        }
    }
}

impl fmt::Display for IgnoreReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Block(BlockEvent),
    Ignored(IgnoreReason),
}

/// Lower-cased place phrases mapped to links.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    phrases: Vec<(Vec<String>, LinkIdx)>,
}

impl AliasTable {
    pub fn new(net: &RoadNetwork, entries: &BTreeMap<String, String>) -> Result<Self> {
        let mut phrases = Vec::with_capacity(entries.len());
        for (phrase, link) in entries {
            let tokens = tokenize(phrase);
            if tokens.is_empty() {
                return Err(Error::Feed(format!("alias `{phrase}` has no words")));
            }
            phrases.push((tokens, net.idx(link)?));
        }
        Ok(Self { phrases })
    }

    /// Reads a JSON map `{"phrase": "link_id"}`.
    pub fn load(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let entries: BTreeMap<String, String> =
            serde_json::from_str(&read_file(path)?).map_err(|source| Error::Json {
                context: path.display().to_string(),
                source,
            })?;
        Self::new(net, &entries)
    }

    /// Longest phrase matching a contiguous token span; among equally long
    /// matches the earliest span wins.
    pub fn find(&self, tokens: &[String]) -> Option<LinkIdx> {
        let mut best: Option<(usize, usize, LinkIdx)> = None;
        for start in 0..tokens.len() {
            for (phrase, link) in &self.phrases {
                let end = start + phrase.len();
                if end <= tokens.len() && tokens[start..end] == phrase[..] {
                    let better = match best {
                        None => true,
                        Some((len, s, _)) => phrase.len() > len || (phrase.len() == len && start < s),
                    };
                    if better {
                        best = Some((phrase.len(), start, *link));
                    }
                }
            }
        }
        best.map(|(_, _, link)| link)
    }
}

/// Splits on whitespace, lower-cases, and trims punctuation around each word
/// while keeping `#` and `_` so hashtags survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '#' || c == '_'))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Checks hashtag, keyword, place, and date in that order and reports the
/// first one that fails.
pub fn parse_message(msg: &FeedMessage, aliases: &AliasTable, today: NaiveDate, sim_time: f64) -> ParseOutcome {
    let tokens = tokenize(&msg.text);
    if !tokens.iter().any(|t| t == EXPERIMENT_HASHTAG) {
        return ParseOutcome::Ignored(IgnoreReason::MissingHashtag);
    }
    if !tokens.iter().any(|t| t == BLOCK_KEYWORD) {
        return ParseOutcome::Ignored(IgnoreReason::MissingKeyword);
    }
    let Some(link) = aliases.find(&tokens) else {
        return ParseOutcome::Ignored(IgnoreReason::NoLinkIdentifier);
    };
    if msg.timestamp.date_naive() < today {
        return ParseOutcome::Ignored(IgnoreReason::Stale);
    }
    ParseOutcome::Block(BlockEvent {
        link,
        source_message: msg.clone(),
        detected_at: sim_time,
    })
}

/// Position in a feed: the number of messages already delivered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeedCursor(pub usize);

pub trait FeedSource {
    /// Messages after `cursor` that are visible at `now`, oldest first, and
    /// the advanced cursor.
    fn poll(&mut self, cursor: FeedCursor, now: DateTime<Utc>) -> Result<(Vec<FeedMessage>, FeedCursor)>;
}

pub fn poll_feed(
    source: &mut dyn FeedSource,
    cursor: FeedCursor,
    now: DateTime<Utc>,
) -> Result<(Vec<FeedMessage>, FeedCursor)> {
    source.poll(cursor, now)
}

/// Recorded messages, released once the clock passes their timestamp.
#[derive(Debug, Clone, Default)]
pub struct ReplayFeed {
    messages: Vec<FeedMessage>,
}

impl ReplayFeed {
    pub fn new(mut messages: Vec<FeedMessage>) -> Self {
        messages.sort_by_key(|m| m.timestamp);
        Self { messages }
    }

    /// Parses newline-delimited JSON records `{author, timestamp, text}`.
    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut messages = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let msg: FeedMessage = serde_json::from_str(line).map_err(|source| Error::Json {
                context: format!("feed line {}", lineno + 1),
                source,
            })?;
            if msg.text.trim().is_empty() {
                return Err(Error::Feed(format!("feed line {} has empty text", lineno + 1)));
            }
            messages.push(msg);
        }
        Ok(Self::new(messages))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_ndjson(&read_file(path.as_ref())?)
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

impl FeedSource for ReplayFeed {
    fn poll(&mut self, cursor: FeedCursor, now: DateTime<Utc>) -> Result<(Vec<FeedMessage>, FeedCursor)> {
        if cursor.0 > self.messages.len() {
            return Err(Error::Feed(format!(
                "cursor {} past the end of a {}-message feed",
                cursor.0,
                self.messages.len()
            )));
        }
        let fresh: Vec<FeedMessage> = self.messages[cursor.0..]
            .iter()
            .take_while(|m| m.timestamp <= now)
            .cloned()
            .collect();
        let next = FeedCursor(cursor.0 + fresh.len());
        Ok((fresh, next))
    }
}
