//! Routing keys, exchange matching and topology derivation.

mod key;
mod matcher;
mod topology;

pub use key::{encode_routing_key, EventCategory, EventType, RoutingError, RoutingKey, KEY_PREFIX};
pub use matcher::{header_prefix_matches, PrefixTable, TopicPattern, TopicTrie};
pub use topology::{
    derive_topology, Binding, DispatcherRole, Exchange, ExchangeKind, MatchRule, QueueOwner, QueueSpec, TopologyPlan,
    BROKER_EXCHANGE, MQTT_EXCHANGE,
};
