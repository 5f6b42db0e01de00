//! Event store: per-key append-only logs with latest-state lookup and
//! paginated time-range queries, in memory or backed by segment files.

mod segment;

pub use segment::RecordLocation;
use segment::SegmentLog;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("segment {segment} offset {offset}: {reason}")]
    Corrupt { segment: u32, offset: u64, reason: String },
    #[error("invalid continuation token `{0}`")]
    InvalidToken(String),
    #[error("history is not retained by this store")]
    NoHistory,
    #[error("invalid range: from {from} is after to {to}")]
    InvalidRange { from: f64, to: f64 },
}

/// One persisted twin event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEvent {
    pub interface: String,
    pub instance: String,
    pub time: f64,
    pub sequence: u64,
    pub payload: Vec<u8>,
    /// The instance was not declared in the twin graph.
    pub unknown_instance: bool,
}

/// How much history is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retention {
    /// Every event is kept in memory.
    Full,
    /// Only counters and the latest event per key.
    LatestOnly,
}

#[derive(Debug, Default)]
struct KeyLog {
    count: u64,
    last_time: f64,
    latest: Option<StoredEvent>,
    events: Vec<StoredEvent>,
    locations: Vec<(f64, RecordLocation)>,
}

/// A time-range query; both ends inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeQuery {
    pub interface: String,
    /// `None` queries every instance of the interface.
    pub instance: Option<String>,
    pub from: f64,
    pub to: f64,
    pub limit: usize,
    pub token: Option<String>,
}

impl RangeQuery {
    pub fn key(interface: &str, instance: &str, from: f64, to: f64, limit: usize) -> Self {
        RangeQuery {
            interface: interface.into(),
            instance: Some(instance.into()),
            from,
            to,
            limit,
            token: None,
        }
    }
}

/// One page of a range query.
#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub events: Vec<StoredEvent>,
    pub next: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreStats {
    pub appended: u64,
    pub unknown_instance: u64,
    pub keys: u64,
    pub recovered: u64,
    pub truncated_bytes: u64,
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    interface: &'a str,
    instance: &'a str,
    count: u64,
    last_sequence: u64,
    last_time: f64,
}

/// Append-only event store keyed by (interface, instance).
#[derive(Debug)]
pub struct EventStore {
    keys: BTreeMap<(String, String), KeyLog>,
    retention: Retention,
    known: Option<BTreeSet<String>>,
    disk: Option<SegmentLog>,
    stats: StoreStats,
}

pub const DEFAULT_SEGMENT_BYTES: u64 = 8 << 20;

impl EventStore {
    pub fn in_memory() -> Self {
        Self::with_retention(Retention::Full)
    }

    pub fn with_retention(retention: Retention) -> Self {
        EventStore { keys: BTreeMap::new(), retention, known: None, disk: None, stats: StoreStats::default() }
    }

    /// Opens (or creates) a disk-backed store, replaying existing segments.
    /// A torn record at the tail of the last segment is truncated.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        Self::open_with_segment_size(dir, DEFAULT_SEGMENT_BYTES)
    }

    pub fn open_with_segment_size(dir: &Path, max_bytes: u64) -> Result<Self, StoreError> {
        let rec = SegmentLog::open(dir, max_bytes)?;
        let mut store = Self::with_retention(Retention::LatestOnly);
        store.stats.truncated_bytes = rec.truncated_bytes;
        for (e, loc) in rec.records {
            let log = store.keys.entry((e.interface.clone(), e.instance.clone())).or_default();
            log.count = e.sequence;
            log.last_time = e.time;
            log.locations.push((e.time, loc));
            if e.unknown_instance {
                store.stats.unknown_instance += 1;
            }
            log.latest = Some(e);
            store.stats.recovered += 1;
        }
        store.stats.keys = store.keys.len() as u64;
        store.disk = Some(rec.log);
        Ok(store)
    }

    /// Restricts known instances; appends for others are flagged.
    pub fn set_known_instances<I: IntoIterator<Item = String>>(&mut self, names: I) {
        self.known = Some(names.into_iter().collect());
    }

    /// Appends an event and returns its per-key sequence number (from 1). Times
    /// earlier than the key's last event are clamped forward.
    pub fn append(&mut self, interface: &str, instance: &str, time: f64, payload: Vec<u8>) -> Result<u64, StoreError> {
        let unknown = self.known.as_ref().is_some_and(|k| !k.contains(instance));
        let key = (interface.to_string(), instance.to_string());
        let log = match self.keys.get_mut(&key) {
            Some(l) => l,
            None => {
                self.stats.keys += 1;
                self.keys.entry(key).or_default()
            }
        };
        let seq = log.count + 1;
        let time = if log.count == 0 { time } else { time.max(log.last_time) };
        let event = StoredEvent {
            interface: interface.to_string(),
            instance: instance.to_string(),
            time,
            sequence: seq,
            payload,
            unknown_instance: unknown,
        };
        if let Some(disk) = self.disk.as_mut() {
            let loc = disk.append(&event)?;
            log.locations.push((time, loc));
        } else if self.retention == Retention::Full {
            log.events.push(event.clone());
        }
        log.count += 1;
        log.last_time = time;
        log.latest = Some(event);
        self.stats.appended += 1;
        if unknown {
            self.stats.unknown_instance += 1;
        }
        Ok(seq)
    }

    pub fn latest(&self, interface: &str, instance: &str) -> Option<&StoredEvent> {
        self.keys.get(&(interface.to_string(), instance.to_string()))?.latest.as_ref()
    }

    pub fn count(&self, interface: &str, instance: &str) -> u64 {
        self.keys.get(&(interface.to_string(), instance.to_string())).map(|l| l.count).unwrap_or(0)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, &str)> {
        self.keys.keys().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn stats(&self) -> &StoreStats {
        &self.stats
    }

    fn key_events(&self, log: &KeyLog, from: f64, to: f64) -> Result<Vec<StoredEvent>, StoreError> {
        if let Some(disk) = &self.disk {
            let start = log.locations.partition_point(|(t, _)| *t < from);
            let end = log.locations.partition_point(|(t, _)| *t <= to);
            return log.locations[start..end].iter().map(|(_, loc)| disk.read(*loc)).collect();
        }
        if self.retention == Retention::LatestOnly {
            return Err(StoreError::NoHistory);
        }
        let start = log.events.partition_point(|e| e.time < from);
        let end = log.events.partition_point(|e| e.time <= to);
        Ok(log.events[start..end].to_vec())
    }

    /// Time-ordered page of events. Ties across instances order by instance
    /// name then sequence. Pass the returned token to continue.
    pub fn range(&self, q: &RangeQuery) -> Result<Page, StoreError> {
        if q.from > q.to {
            return Err(StoreError::InvalidRange { from: q.from, to: q.to });
        }
        let offset = match &q.token {
            None => 0usize,
            Some(t) => t
                .strip_prefix("c")
                .and_then(|n| usize::from_str_radix(n, 16).ok())
                .ok_or_else(|| StoreError::InvalidToken(t.clone()))?,
        };
        let mut all = Vec::new();
        match &q.instance {
            Some(i) => {
                if let Some(log) = self.keys.get(&(q.interface.clone(), i.clone())) {
                    all = self.key_events(log, q.from, q.to)?;
                }
            }
            None => {
                let lo = (q.interface.clone(), String::new());
                for ((iface, _), log) in self.keys.range(lo..) {
                    if iface != &q.interface {
                        break;
                    }
                    all.extend(self.key_events(log, q.from, q.to)?);
                }
                all.sort_by(|a, b| {
                    a.time.total_cmp(&b.time).then_with(|| a.instance.cmp(&b.instance)).then(a.sequence.cmp(&b.sequence))
                });
            }
        }
        if offset > all.len() {
            return Err(StoreError::InvalidToken(q.token.clone().unwrap_or_default()));
        }
        let limit = q.limit.max(1);
        let end = (offset + limit).min(all.len());
        let next = (end < all.len()).then(|| format!("c{end:x}"));
        Ok(Page { events: all.drain(offset..end).collect(), next })
    }

    /// Collects every page of a query.
    pub fn range_all(&self, mut q: RangeQuery) -> Result<Vec<StoredEvent>, StoreError> {
        let mut out = Vec::new();
        loop {
            let page = self.range(&q)?;
            out.extend(page.events);
            match page.next {
                Some(t) => q.token = Some(t),
                None => return Ok(out),
            }
        }
    }

    /// Syncs segments and writes `index.json` next to them.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        let Some(disk) = self.disk.as_mut() else {
            return Ok(());
        };
        disk.sync()?;
        let index: Vec<IndexEntry> = self
            .keys
            .iter()
            .map(|((i, n), l)| IndexEntry {
                interface: i,
                instance: n,
                count: l.count,
                last_sequence: l.count,
                last_time: l.last_time,
            })
            .collect();
        let text = serde_json::to_vec_pretty(&index).expect("index serializes");
        std::fs::write(disk.dir().join("index.json"), text)?;
        Ok(())
    }
}
