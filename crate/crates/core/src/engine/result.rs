//! Run results and the summary hash.

use super::config::ScenarioConfig;
use super::workload::GeneratedStats;
use crate::autoscaler::{ResourceSeries, ServiceUsage, TraceRow};
use crate::broker::{BrokerMetrics, DeadLetter};
use crate::routing::{DispatcherRole, TopologyPlan};
use crate::store::StoreStats;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Name under which event-store replicas and latencies are reported.
pub const STORE_SERVICE: &str = "event-store";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceReport {
    pub name: String,
    /// Envelopes admitted to the service.
    pub delivered: u64,
    pub completed: u64,
    pub failed: u64,
    /// Admitted but not completed when the run ended.
    pub unfinished: u64,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub max_replicas_seen: u32,
    pub usage: ServiceUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatcherReport {
    pub role: DispatcherRole,
    pub queue: String,
    pub lanes: u32,
    /// Envelopes per second.
    pub rate: f64,
    pub processed: u64,
    pub failed: u64,
}

/// One end-to-end latency observation: origin time and latency (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub time: f64,
    pub latency: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub topology: TopologyPlan,
    /// Length of every per-second series.
    pub seconds: usize,
    /// Time of the last processed event.
    pub end_time: f64,
    pub generated: GeneratedStats,
    pub broker: BrokerMetrics,
    pub dead_letter_count: u64,
    pub dispatchers: Vec<DispatcherReport>,
    pub services: Vec<ServiceReport>,
    pub resources: ResourceSeries,
    pub trace: Vec<TraceRow>,
    pub store: StoreStats,
    /// Virtual events delivered to device subscribers.
    pub virtual_delivered: u64,
    /// Per service, in completion order.
    #[serde(skip)]
    pub latency: BTreeMap<String, Vec<LatencySample>>,
    #[serde(skip)]
    pub dead_letters: Vec<DeadLetter>,
    #[serde(default)]
    pub summary_hash: String,
}

impl RunResult {
    /// SHA-256 over every field except the hash itself.
    pub fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut copy = self.clone();
        copy.summary_hash.clear();
        h.update(serde_json::to_vec(&copy).expect("result serializes"));
        for (service, samples) in &self.latency {
            h.update(service.as_bytes());
            for s in samples {
                h.update(s.time.to_le_bytes());
                h.update(s.latency.to_le_bytes());
            }
        }
        for d in &self.dead_letters {
            h.update(serde_json::to_vec(d).expect("dead letter serializes"));
        }
        hex::encode(h.finalize())
    }

    pub fn service(&self, name: &str) -> Option<&ServiceReport> {
        self.services.iter().find(|s| s.name == name)
    }

    /// Seconds of the scenario proper, excluding the drain phase.
    pub fn scenario_seconds(&self) -> usize {
        (self.config.duration.ceil() as usize).min(self.seconds)
    }
}
