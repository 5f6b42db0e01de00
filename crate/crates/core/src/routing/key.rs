//! Routing keys `ktwin.<category>.<interface>.<instance>[.<command>]` and
//! the interface-level CloudEvent types derived from them.

use crate::definitions::valid_name;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const KEY_PREFIX: &str = "ktwin";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RoutingError {
    #[error("invalid segment `{0}`: segments must be non-empty and contain no '.', '*', '#' or whitespace")]
    InvalidSegment(String),
    #[error("malformed routing key `{0}`")]
    MalformedKey(String),
    #[error("unknown event category `{0}`")]
    UnknownCategory(String),
    #[error("command category requires a command segment")]
    MissingCommand,
    #[error("only the command category carries a command segment")]
    UnexpectedCommand,
    #[error("malformed event type `{0}`")]
    MalformedType(String),
    #[error("invalid topic pattern `{0}`")]
    InvalidPattern(String),
    #[error("command `{command}` on `{interface}` has no serviced interface to receive it")]
    UnservicedCommand { interface: String, command: String },
    #[error("queue name `{0}` collides with a dispatcher queue")]
    QueueCollision(String),
}

/// The four event categories carried in routing keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventCategory {
    Real,
    Virtual,
    Command,
    Store,
}

impl EventCategory {
    pub const ALL: [EventCategory; 4] =
        [EventCategory::Real, EventCategory::Virtual, EventCategory::Command, EventCategory::Store];

    pub fn token(self) -> &'static str {
        match self {
            EventCategory::Real => "real",
            EventCategory::Virtual => "virtual",
            EventCategory::Command => "command",
            EventCategory::Store => "store",
        }
    }

    pub fn from_token(token: &str) -> Result<Self, RoutingError> {
        match token {
            "real" => Ok(EventCategory::Real),
            "virtual" => Ok(EventCategory::Virtual),
            "command" => Ok(EventCategory::Command),
            "store" => Ok(EventCategory::Store),
            other => Err(RoutingError::UnknownCategory(other.to_string())),
        }
    }
}

impl fmt::Display for EventCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

fn segment(s: &str) -> Result<(), RoutingError> {
    if valid_name(s) {
        Ok(())
    } else {
        Err(RoutingError::InvalidSegment(s.to_string()))
    }
}

/// A decoded routing key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoutingKey {
    pub category: EventCategory,
    pub interface: String,
    pub instance: String,
    pub command: Option<String>,
}

impl RoutingKey {
    pub fn new(
        category: EventCategory,
        interface: impl Into<String>,
        instance: impl Into<String>,
        command: Option<String>,
    ) -> Result<Self, RoutingError> {
        let key = RoutingKey { category, interface: interface.into(), instance: instance.into(), command };
        segment(&key.interface)?;
        segment(&key.instance)?;
        match (&key.command, category) {
            (Some(c), EventCategory::Command) => segment(c)?,
            (None, EventCategory::Command) => return Err(RoutingError::MissingCommand),
            (Some(_), _) => return Err(RoutingError::UnexpectedCommand),
            (None, _) => {}
        }
        Ok(key)
    }

    pub fn encode(&self) -> String {
        let mut s = format!("{KEY_PREFIX}.{}.{}.{}", self.category, self.interface, self.instance);
        if let Some(c) = &self.command {
            s.push('.');
            s.push_str(c);
        }
        s
    }

    pub fn decode(key: &str) -> Result<Self, RoutingError> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.len() < 4 || parts.len() > 5 || parts[0] != KEY_PREFIX {
            return Err(RoutingError::MalformedKey(key.to_string()));
        }
        let category = EventCategory::from_token(parts[1])?;
        RoutingKey::new(category, parts[2], parts[3], parts.get(4).map(|c| c.to_string()))
    }

    /// Interface-level CloudEvent type for this key.
    pub fn event_type(&self) -> EventType {
        EventType { category: self.category, interface: self.interface.clone(), command: self.command.clone() }
    }
}

impl fmt::Display for RoutingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for RoutingKey {
    type Err = RoutingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoutingKey::decode(s)
    }
}

/// Encodes a routing key after validating every segment.
pub fn encode_routing_key(
    category: EventCategory,
    interface: &str,
    instance: &str,
    command: Option<&str>,
) -> Result<String, RoutingError> {
    RoutingKey::new(category, interface, instance, command.map(String::from)).map(|k| k.encode())
}

/// CloudEvent type: `ktwin.<category>.<interface>[.<command>]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventType {
    pub category: EventCategory,
    pub interface: String,
    pub command: Option<String>,
}

impl EventType {
    pub fn new(category: EventCategory, interface: &str, command: Option<&str>) -> Self {
        EventType { category, interface: interface.to_string(), command: command.map(String::from) }
    }

    pub fn encode(&self) -> String {
        match &self.command {
            Some(c) => format!("{KEY_PREFIX}.{}.{}.{}", self.category, self.interface, c),
            None => format!("{KEY_PREFIX}.{}.{}", self.category, self.interface),
        }
    }

    pub fn decode(s: &str) -> Result<Self, RoutingError> {
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() < 3 || parts.len() > 4 || parts[0] != KEY_PREFIX {
            return Err(RoutingError::MalformedType(s.to_string()));
        }
        let category = EventCategory::from_token(parts[1])?;
        segment(parts[2])?;
        let command = parts.get(3).map(|c| c.to_string());
        match (&command, category) {
            (Some(c), EventCategory::Command) => segment(c)?,
            (None, EventCategory::Command) => return Err(RoutingError::MissingCommand),
            (Some(_), _) => return Err(RoutingError::UnexpectedCommand),
            _ => {}
        }
        Ok(EventType { category, interface: parts[2].to_string(), command })
    }

    /// Attaches an instance to produce the full routing key.
    pub fn with_instance(&self, instance: &str) -> Result<RoutingKey, RoutingError> {
        RoutingKey::new(self.category, self.interface.clone(), instance, self.command.clone())
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}
