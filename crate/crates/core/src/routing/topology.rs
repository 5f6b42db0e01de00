//! Derivation of exchanges, queues and bindings from a twin graph.

use super::key::{EventCategory, EventType, RoutingError, KEY_PREFIX};
use crate::definitions::TwinGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

pub const MQTT_EXCHANGE: &str = "mqtt";
pub const BROKER_EXCHANGE: &str = "broker";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeKind {
    Topic,
    Header,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub name: String,
    pub kind: ExchangeKind,
}

/// The three dispatcher roles bridging transports and the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispatcherRole {
    Mqtt,
    CloudEvent,
    EventStore,
}

impl DispatcherRole {
    pub const ALL: [DispatcherRole; 3] = [DispatcherRole::Mqtt, DispatcherRole::CloudEvent, DispatcherRole::EventStore];

    pub fn queue_name(self) -> &'static str {
        match self {
            DispatcherRole::Mqtt => "mqtt-dispatcher",
            DispatcherRole::CloudEvent => "cloudevent-dispatcher",
            DispatcherRole::EventStore => "event-store-dispatcher",
        }
    }
}

impl fmt::Display for DispatcherRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.queue_name())
    }
}

/// Who consumes a queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type", content = "name")]
pub enum QueueOwner {
    Dispatcher(DispatcherRole),
    Interface(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub name: String,
    pub owner: QueueOwner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchRule {
    /// Topic pattern on the MQTT exchange.
    RoutingKey(String),
    /// Segment-prefix match on the CloudEvent type header.
    TypePrefix(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub name: String,
    pub source: String,
    pub destination: String,
    pub rule: MatchRule,
}

/// Broker resources needed to route a twin graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TopologyPlan {
    pub exchanges: Vec<Exchange>,
    pub queues: Vec<QueueSpec>,
    pub bindings: Vec<Binding>,
}

impl TopologyPlan {
    pub fn summary(&self) -> String {
        format!("exchanges={} queues={} bindings={}", self.exchanges.len(), self.queues.len(), self.bindings.len())
    }

    pub fn queue(&self, name: &str) -> Option<&QueueSpec> {
        self.queues.iter().find(|q| q.name == name)
    }
}

fn binding(source: &str, destination: &str, rule: MatchRule) -> Binding {
    let text = match &rule {
        MatchRule::RoutingKey(p) => p,
        MatchRule::TypePrefix(p) => p,
    };
    let digest = Sha256::digest(format!("{source}|{text}|{destination}").as_bytes());
    Binding {
        name: format!("{destination}--{}", &hex::encode(digest)[..8]),
        source: source.to_string(),
        destination: destination.to_string(),
        rule,
    }
}

fn header(destination: &str, t: EventType) -> Binding {
    binding(BROKER_EXCHANGE, destination, MatchRule::TypePrefix(t.encode()))
}

/// Derives the routing topology of a graph.
///
/// Each interface that has a service or persists real events directly gets a
/// topic binding for its real events; serviced interfaces get a queue fed by
/// real and command events and a virtual binding to the CloudEvent
/// dispatcher; store events go to the event-store dispatcher when enabled.
pub fn derive_topology(graph: &TwinGraph) -> Result<TopologyPlan, RoutingError> {
    let mut plan = TopologyPlan {
        exchanges: vec![
            Exchange { name: MQTT_EXCHANGE.into(), kind: ExchangeKind::Topic },
            Exchange { name: BROKER_EXCHANGE.into(), kind: ExchangeKind::Header },
        ],
        queues: DispatcherRole::ALL
            .iter()
            .map(|r| QueueSpec { name: r.queue_name().into(), owner: QueueOwner::Dispatcher(*r) })
            .collect(),
        bindings: Vec::new(),
    };
    let mut interfaces: Vec<_> = graph.interfaces().collect();
    interfaces.sort_by(|a, b| a.name.cmp(&b.name));
    let mqtt_q = DispatcherRole::Mqtt.queue_name();
    let ce_q = DispatcherRole::CloudEvent.queue_name();
    let store_q = DispatcherRole::EventStore.queue_name();
    for iface in interfaces {
        let name = iface.name.as_str();
        let serviced = iface.is_serviced();
        let direct = iface.routing.persist_real_directly;
        if !serviced {
            if let Some(c) = iface.commands.first() {
                return Err(RoutingError::UnservicedCommand { interface: name.into(), command: c.name.clone() });
            }
        }
        if serviced {
            if DispatcherRole::ALL.iter().any(|r| r.queue_name() == name) {
                return Err(RoutingError::QueueCollision(name.into()));
            }
            plan.queues.push(QueueSpec { name: name.into(), owner: QueueOwner::Interface(name.into()) });
        }
        if serviced || direct {
            let pattern = format!("{KEY_PREFIX}.{}.{name}.*", EventCategory::Real);
            plan.bindings.push(binding(MQTT_EXCHANGE, mqtt_q, MatchRule::RoutingKey(pattern)));
        }
        let real = EventType::new(EventCategory::Real, name, None);
        if direct {
            plan.bindings.push(header(store_q, real));
        } else if serviced {
            plan.bindings.push(header(name, real));
        }
        if serviced {
            plan.bindings.push(header(ce_q, EventType::new(EventCategory::Virtual, name, None)));
            if iface.routing.persist_store_events {
                plan.bindings.push(header(store_q, EventType::new(EventCategory::Store, name, None)));
            }
            for c in &iface.commands {
                plan.bindings.push(header(name, EventType::new(EventCategory::Command, name, Some(&c.name))));
            }
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definitions::{resolve_graph, CommandDef, ServiceSettings, TwinInterface};

    fn serviced(name: &str) -> TwinInterface {
        let mut i = TwinInterface::new(name);
        i.service = Some(ServiceSettings {
            handler: "passthrough".into(),
            cpu: 0.1,
            memory: 1 << 26,
            autoscale: Default::default(),
        });
        i
    }

    #[test]
    fn empty_graph_has_dispatchers_only() {
        let g = resolve_graph(&[], &[]).unwrap();
        let p = derive_topology(&g).unwrap();
        assert_eq!(p.summary(), "exchanges=2 queues=3 bindings=0");
    }

    #[test]
    fn serviced_interface_bindings() {
        let mut a = serviced("a");
        a.commands.push(CommandDef { name: "go".into(), description: String::new(), schema: None });
        let mut b = TwinInterface::new("b");
        b.routing.persist_real_directly = true;
        let g = resolve_graph(&[a, b], &[]).unwrap();
        let p = derive_topology(&g).unwrap();
        assert_eq!(p.summary(), "exchanges=2 queues=4 bindings=7");
        let rules: Vec<_> = p.bindings.iter().map(|b| (b.destination.as_str(), &b.rule)).collect();
        assert!(rules.contains(&("a", &MatchRule::TypePrefix("ktwin.command.a.go".into()))));
        assert!(rules.contains(&("event-store-dispatcher", &MatchRule::TypePrefix("ktwin.real.b".into()))));
        assert!(p.bindings.iter().all(|b| b.name.starts_with(&format!("{}--", b.destination))));
    }

    #[test]
    fn commands_need_a_service() {
        let mut a = TwinInterface::new("a");
        a.commands.push(CommandDef { name: "go".into(), description: String::new(), schema: None });
        let g = resolve_graph(&[a], &[]).unwrap();
        assert!(matches!(derive_topology(&g), Err(RoutingError::UnservicedCommand { .. })));
    }
}
