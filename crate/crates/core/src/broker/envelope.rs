use serde::{Deserialize, Serialize};

/// Transport-specific addressing of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Attributes {
    /// MQTT message addressed by a full routing key.
    Mqtt { topic: String },
    /// CloudEvent with an interface-level type; `source` names the instance.
    CloudEvent {
        #[serde(rename = "type")]
        event_type: String,
        source: String,
    },
}

/// An event travelling through the broker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub id: u64,
    /// Occurrence time in simulated seconds.
    pub time: f64,
    pub attributes: Attributes,
    pub payload: Vec<u8>,
}

impl EventEnvelope {
    pub fn mqtt(id: u64, time: f64, topic: impl Into<String>, payload: Vec<u8>) -> Self {
        EventEnvelope { id, time, attributes: Attributes::Mqtt { topic: topic.into() }, payload }
    }

    pub fn cloud_event(id: u64, time: f64, event_type: impl Into<String>, source: impl Into<String>, payload: Vec<u8>) -> Self {
        EventEnvelope {
            id,
            time,
            attributes: Attributes::CloudEvent { event_type: event_type.into(), source: source.into() },
            payload,
        }
    }

    /// Routing key for MQTT, type for CloudEvents.
    pub fn address(&self) -> &str {
        match &self.attributes {
            Attributes::Mqtt { topic } => topic,
            Attributes::CloudEvent { event_type, .. } => event_type,
        }
    }
}
