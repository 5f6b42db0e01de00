//! In-process message broker: a topic exchange for MQTT traffic, a header
//! exchange for CloudEvents, FIFO queues and per-second counters.

mod dispatch;
mod envelope;

pub use dispatch::{cloudevent_key, cloudevent_to_mqtt, mqtt_to_cloudevent, store_target, DispatchError};
pub use envelope::{Attributes, EventEnvelope};

use crate::routing::{
    MatchRule, PrefixTable, QueueOwner, QueueSpec, TopicPattern, TopicTrie, TopologyPlan, BROKER_EXCHANGE,
    MQTT_EXCHANGE,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Per-queue counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub enqueued: u64,
    pub dequeued: u64,
    pub max_depth: u64,
    /// Maximum depth observed within each second.
    pub depth_per_second: Vec<u64>,
}

/// Broker-wide counters, indexed by simulated second.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BrokerMetrics {
    /// CloudEvents published to the header exchange per second.
    pub cloudevents_per_second: Vec<u64>,
    /// MQTT messages published to the topic exchange per second.
    pub mqtt_per_second: Vec<u64>,
    pub cloudevents_by_type: BTreeMap<String, u64>,
    pub cloudevents_by_type_per_second: BTreeMap<String, Vec<u64>>,
    pub mqtt_by_type: BTreeMap<String, u64>,
    /// Every publish on either exchange.
    pub published: u64,
    /// Publishes copied to at least one queue.
    pub routed: u64,
    /// Publishes matching no binding.
    pub unroutable: u64,
    /// Publishes refused as malformed.
    pub rejected: u64,
    pub queues: BTreeMap<String, QueueStats>,
}

impl BrokerMetrics {
    pub fn total_cloudevents(&self) -> u64 {
        self.cloudevents_per_second.iter().sum()
    }
}

fn bump(v: &mut Vec<u64>, second: usize, by: u64) {
    if v.len() <= second {
        v.resize(second + 1, 0);
    }
    v[second] += by;
}

fn second_of(t: f64) -> usize {
    if t.is_finite() && t > 0.0 {
        t.floor() as usize
    } else {
        0
    }
}

/// A named FIFO queue.
#[derive(Debug, Clone)]
pub struct Queue {
    pub spec: QueueSpec,
    items: VecDeque<EventEnvelope>,
}

impl Queue {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Result of a publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublishOutcome {
    /// Indices of the queues that received a copy.
    Routed(Vec<usize>),
    /// No binding matched.
    Unroutable,
    /// Malformed envelope; dead-lettered.
    Rejected,
}

/// A message that could not be routed or processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub time: f64,
    pub id: u64,
    pub address: String,
    pub reason: String,
}

/// Exchanges plus queues built from a topology plan.
#[derive(Debug, Clone)]
pub struct Broker {
    topic: TopicTrie<usize>,
    header: PrefixTable<usize>,
    queues: Vec<Queue>,
    by_name: BTreeMap<String, usize>,
    metrics: BrokerMetrics,
    dead_letters: Vec<DeadLetter>,
    dead_letter_count: u64,
    dead_letter_cap: usize,
    next_id: u64,
}

impl Broker {
    pub fn new(plan: &TopologyPlan) -> Self {
        let mut b = Broker {
            topic: TopicTrie::new(),
            header: PrefixTable::new(),
            queues: Vec::new(),
            by_name: BTreeMap::new(),
            metrics: BrokerMetrics::default(),
            dead_letters: Vec::new(),
            dead_letter_count: 0,
            dead_letter_cap: 10_000,
            next_id: 0,
        };
        for q in &plan.queues {
            b.add_queue(q.clone());
        }
        for binding in &plan.bindings {
            let idx = b.by_name[&binding.destination];
            match &binding.rule {
                MatchRule::RoutingKey(p) if binding.source == MQTT_EXCHANGE => {
                    b.topic.insert(&TopicPattern::parse(p).expect("plan patterns are valid"), idx)
                }
                MatchRule::TypePrefix(p) if binding.source == BROKER_EXCHANGE => b.header.insert(p, idx),
                _ => panic!("binding {} does not fit exchange {}", binding.name, binding.source),
            }
        }
        b
    }

    fn add_queue(&mut self, spec: QueueSpec) -> usize {
        let idx = self.queues.len();
        self.by_name.insert(spec.name.clone(), idx);
        self.metrics.queues.insert(spec.name.clone(), QueueStats::default());
        self.queues.push(Queue { spec, items: VecDeque::new() });
        idx
    }

    /// Adds a subscriber queue bound to the MQTT exchange.
    pub fn subscribe(&mut self, name: &str, pattern: &TopicPattern) -> usize {
        let idx = self.add_queue(QueueSpec { name: name.to_string(), owner: QueueOwner::Interface(name.to_string()) });
        self.topic.insert(pattern, idx);
        idx
    }

    pub fn next_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    pub fn queue_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn queue(&self, idx: usize) -> &Queue {
        &self.queues[idx]
    }

    pub fn queues(&self) -> &[Queue] {
        &self.queues
    }

    fn enqueue(&mut self, idx: usize, env: EventEnvelope, now: f64) {
        let q = &mut self.queues[idx];
        q.items.push_back(env);
        let depth = q.items.len() as u64;
        let stats = self.metrics.queues.get_mut(&q.spec.name).expect("stats exist");
        stats.enqueued += 1;
        stats.max_depth = stats.max_depth.max(depth);
        let s = second_of(now);
        if stats.depth_per_second.len() <= s {
            stats.depth_per_second.resize(s + 1, 0);
        }
        stats.depth_per_second[s] = stats.depth_per_second[s].max(depth);
    }

    fn route(&mut self, targets: Vec<usize>, env: EventEnvelope, now: f64) -> PublishOutcome {
        self.metrics.published += 1;
        if targets.is_empty() {
            self.metrics.unroutable += 1;
            self.dead_letter(now, &env, "unroutable");
            return PublishOutcome::Unroutable;
        }
        for (i, &t) in targets.iter().enumerate() {
            if i + 1 == targets.len() {
                self.enqueue(t, env, now);
                break;
            }
            self.enqueue(t, env.clone(), now);
        }
        self.metrics.routed += 1;
        PublishOutcome::Routed(targets)
    }

    fn reject(&mut self, now: f64, env: &EventEnvelope, reason: &str) -> PublishOutcome {
        self.metrics.published += 1;
        self.metrics.rejected += 1;
        self.dead_letter(now, env, reason);
        PublishOutcome::Rejected
    }

    /// Publishes an MQTT envelope on the topic exchange.
    pub fn publish_mqtt(&mut self, env: EventEnvelope, now: f64) -> PublishOutcome {
        let Attributes::Mqtt { topic } = &env.attributes else {
            return self.reject(now, &env, "not an MQTT envelope");
        };
        let Ok(key) = crate::routing::RoutingKey::decode(topic) else {
            return self.reject(now, &env, "malformed topic");
        };
        bump(&mut self.metrics.mqtt_per_second, second_of(now), 1);
        *self.metrics.mqtt_by_type.entry(key.event_type().encode()).or_default() += 1;
        let targets = self.topic.lookup(topic);
        self.route(targets, env, now)
    }

    /// Publishes a CloudEvent on the header exchange.
    pub fn publish_cloudevent(&mut self, env: EventEnvelope, now: f64) -> PublishOutcome {
        let Attributes::CloudEvent { event_type, .. } = &env.attributes else {
            return self.reject(now, &env, "not a CloudEvent envelope");
        };
        let s = second_of(now);
        bump(&mut self.metrics.cloudevents_per_second, s, 1);
        *self.metrics.cloudevents_by_type.entry(event_type.clone()).or_default() += 1;
        match self.metrics.cloudevents_by_type_per_second.get_mut(event_type) {
            Some(v) => bump(v, s, 1),
            None => {
                let mut v = Vec::new();
                bump(&mut v, s, 1);
                self.metrics.cloudevents_by_type_per_second.insert(event_type.clone(), v);
            }
        }
        let targets = self.header.lookup(event_type);
        self.route(targets, env, now)
    }

    pub fn pop(&mut self, idx: usize) -> Option<EventEnvelope> {
        let q = &mut self.queues[idx];
        let env = q.items.pop_front()?;
        self.metrics.queues.get_mut(&q.spec.name).expect("stats exist").dequeued += 1;
        Some(env)
    }

    pub fn dead_letter(&mut self, now: f64, env: &EventEnvelope, reason: &str) {
        self.dead_letter_count += 1;
        if self.dead_letters.len() < self.dead_letter_cap {
            self.dead_letters.push(DeadLetter {
                time: now,
                id: env.id,
                address: env.address().to_string(),
                reason: reason.to_string(),
            });
        }
    }

    pub fn dead_letters(&self) -> &[DeadLetter] {
        &self.dead_letters
    }

    pub fn dead_letter_count(&self) -> u64 {
        self.dead_letter_count
    }

    pub fn metrics(&self) -> &BrokerMetrics {
        &self.metrics
    }

    /// Pads per-second series to `seconds` entries.
    pub fn finish(mut self, seconds: usize) -> (BrokerMetrics, Vec<DeadLetter>, u64) {
        let pad = |v: &mut Vec<u64>| {
            if v.len() < seconds {
                v.resize(seconds, 0)
            }
        };
        pad(&mut self.metrics.cloudevents_per_second);
        pad(&mut self.metrics.mqtt_per_second);
        for v in self.metrics.cloudevents_by_type_per_second.values_mut() {
            pad(v);
        }
        for q in self.metrics.queues.values_mut() {
            pad(&mut q.depth_per_second);
        }
        (self.metrics, self.dead_letters, self.dead_letter_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definitions::{resolve_graph, ServiceSettings, TwinInterface};
    use crate::routing::derive_topology;

    fn broker() -> Broker {
        let mut a = TwinInterface::new("a");
        a.service = Some(ServiceSettings { handler: "h".into(), cpu: 0.1, memory: 1, autoscale: Default::default() });
        let g = resolve_graph(&[a], &[]).unwrap();
        Broker::new(&derive_topology(&g).unwrap())
    }

    #[test]
    fn routes_through_both_exchanges() {
        let mut b = broker();
        let out = b.publish_mqtt(EventEnvelope::mqtt(1, 0.5, "ktwin.real.a.i1", vec![]), 0.5);
        let mq = b.queue_index("mqtt-dispatcher").unwrap();
        assert_eq!(out, PublishOutcome::Routed(vec![mq]));
        let env = b.pop(mq).unwrap();
        let ce = mqtt_to_cloudevent(&env, 2).unwrap();
        let out = b.publish_cloudevent(ce, 1.2);
        assert_eq!(out, PublishOutcome::Routed(vec![b.queue_index("a").unwrap()]));
        assert_eq!(b.metrics().cloudevents_per_second, vec![0, 1]);
        assert_eq!(b.metrics().cloudevents_by_type["ktwin.real.a"], 1);
    }

    #[test]
    fn unroutable_is_dead_lettered() {
        let mut b = broker();
        let out = b.publish_cloudevent(EventEnvelope::cloud_event(1, 0.0, "ktwin.real.zzz", "x", vec![]), 0.0);
        assert_eq!(out, PublishOutcome::Unroutable);
        assert_eq!(b.metrics().unroutable, 1);
        assert_eq!(b.dead_letters().len(), 1);
        let out = b.publish_mqtt(EventEnvelope::mqtt(2, 0.0, "ktwin.nope", vec![]), 0.0);
        assert_eq!(out, PublishOutcome::Rejected);
        let m = b.metrics();
        assert_eq!((m.published, m.routed, m.unroutable, m.rejected), (2, 0, 1, 1));
    }

    #[test]
    fn fifo_per_queue() {
        let mut b = broker();
        for i in 0..5 {
            b.publish_mqtt(EventEnvelope::mqtt(i, 0.0, "ktwin.real.a.i", vec![]), 0.0);
        }
        let q = b.queue_index("mqtt-dispatcher").unwrap();
        let ids: Vec<u64> = std::iter::from_fn(|| b.pop(q)).map(|e| e.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert_eq!(b.metrics().queues["mqtt-dispatcher"].max_depth, 5);
    }
}
