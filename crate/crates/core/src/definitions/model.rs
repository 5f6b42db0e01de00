//! Twin interface and instance data model.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

/// Primitive property schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveSchema {
    String,
    Integer,
    Float,
    Boolean,
}

/// Schema of a property or command argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    Primitive(PrimitiveSchema),
    Enumeration(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SchemaRepr {
    Primitive(PrimitiveSchema),
    Enumeration {
        #[serde(rename = "enum")]
        values: Vec<String>,
    },
}

impl Serialize for Schema {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Schema::Primitive(p) => SchemaRepr::Primitive(*p).serialize(s),
            Schema::Enumeration(v) => SchemaRepr::Enumeration { values: v.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match SchemaRepr::deserialize(d) {
            Ok(SchemaRepr::Primitive(p)) => Ok(Schema::Primitive(p)),
            Ok(SchemaRepr::Enumeration { values }) => {
                if values.is_empty() {
                    Err(serde::de::Error::custom("enum schema needs at least one value"))
                } else {
                    Ok(Schema::Enumeration(values))
                }
            }
            Err(_) => Err(serde::de::Error::custom(
                "schema must be one of string, integer, float, boolean or {enum: [..]}",
            )),
        }
    }
}

impl Schema {
    pub fn accepts(&self, value: &PropertyValue) -> bool {
        match (self, value) {
            (Schema::Primitive(PrimitiveSchema::String), PropertyValue::String(_)) => true,
            (Schema::Primitive(PrimitiveSchema::Integer), PropertyValue::Integer(_)) => true,
            (Schema::Primitive(PrimitiveSchema::Float), PropertyValue::Float(_)) => true,
            (Schema::Primitive(PrimitiveSchema::Float), PropertyValue::Integer(_)) => true,
            (Schema::Primitive(PrimitiveSchema::Boolean), PropertyValue::Boolean(_)) => true,
            (Schema::Enumeration(values), PropertyValue::String(s)) => values.contains(s),
            _ => false,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schema::Primitive(PrimitiveSchema::String) => f.write_str("string"),
            Schema::Primitive(PrimitiveSchema::Integer) => f.write_str("integer"),
            Schema::Primitive(PrimitiveSchema::Float) => f.write_str("float"),
            Schema::Primitive(PrimitiveSchema::Boolean) => f.write_str("boolean"),
            Schema::Enumeration(v) => write!(f, "enum[{}]", v.join("|")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub schema: Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    #[default]
    One,
    Many,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub target: String,
    #[serde(default)]
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<Schema>,
}

/// Concurrency autoscaling policy of a twin service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AutoscalePolicy {
    #[serde(default = "default_target")]
    pub target: u32,
    #[serde(default)]
    pub min_replicas: u32,
    #[serde(default = "default_max")]
    pub max_replicas: u32,
}

fn default_target() -> u32 {
    5
}

fn default_max() -> u32 {
    18
}

impl Default for AutoscalePolicy {
    fn default() -> Self {
        AutoscalePolicy { target: 5, min_replicas: 0, max_replicas: 18 }
    }
}

/// Per-pod resource request and scaling policy of a serviced interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSettings {
    pub handler: String,
    #[serde(default = "default_cpu", deserialize_with = "de_cpu")]
    pub cpu: f64,
    #[serde(default = "default_memory", deserialize_with = "de_memory")]
    pub memory: u64,
    #[serde(default)]
    pub autoscale: AutoscalePolicy,
}

pub const DEFAULT_POD_CPU: f64 = 0.1;
pub const DEFAULT_POD_MEMORY: u64 = 64 * 1024 * 1024;

fn default_cpu() -> f64 {
    DEFAULT_POD_CPU
}

fn default_memory() -> u64 {
    DEFAULT_POD_MEMORY
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

/// Accepts `0.1`, `"0.1"` or `"100m"`.
fn de_cpu<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = match Quantity::deserialize(d)? {
        Quantity::Number(n) => n,
        Quantity::Text(t) => parse_cpu(&t).map_err(serde::de::Error::custom)?,
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(serde::de::Error::custom("cpu must be positive"));
    }
    Ok(v)
}

/// Accepts bytes as a number or `Ki`/`Mi`/`Gi` suffixed strings.
fn de_memory<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = match Quantity::deserialize(d)? {
        Quantity::Number(n) if n >= 0.0 && n.fract() == 0.0 => n as u64,
        Quantity::Number(_) => return Err(serde::de::Error::custom("memory must be whole bytes")),
        Quantity::Text(t) => parse_memory(&t).map_err(serde::de::Error::custom)?,
    };
    if v == 0 {
        return Err(serde::de::Error::custom("memory must be positive"));
    }
    Ok(v)
}

pub fn parse_cpu(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (num, scale) = match t.strip_suffix('m') {
        Some(n) => (n, 0.001),
        None => (t, 1.0),
    };
    num.parse::<f64>().map(|v| v * scale).map_err(|_| format!("invalid cpu quantity `{text}`"))
}

pub fn parse_memory(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let units = [("Ki", 1u64 << 10), ("Mi", 1 << 20), ("Gi", 1 << 30), ("K", 1000), ("M", 1_000_000), ("G", 1_000_000_000)];
    for (suffix, mult) in units {
        if let Some(n) = t.strip_suffix(suffix) {
            return n
                .trim()
                .parse::<u64>()
                .map(|v| v * mult)
                .map_err(|_| format!("invalid memory quantity `{text}`"));
        }
    }
    t.parse::<u64>().map_err(|_| format!("invalid memory quantity `{text}`"))
}

/// Routing behaviour flags of an interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RoutingSettings {
    /// Real events bypass the service and go straight to the event store.
    #[serde(default)]
    pub persist_real_directly: bool,
    /// Store events emitted by the service are persisted.
    #[serde(default = "yes")]
    pub persist_store_events: bool,
}

fn yes() -> bool {
    true
}

impl Default for RoutingSettings {
    fn default() -> Self {
        RoutingSettings { persist_real_directly: false, persist_store_events: true }
    }
}

/// A twin interface: the type of a class of twins.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinInterface {
    pub name: String,
    pub description: String,
    pub parent: Option<String>,
    pub properties: Vec<PropertyDef>,
    pub relationships: Vec<RelationshipDef>,
    pub commands: Vec<CommandDef>,
    pub service: Option<ServiceSettings>,
    pub routing: RoutingSettings,
}

impl TwinInterface {
    pub fn new(name: impl Into<String>) -> Self {
        TwinInterface {
            name: name.into(),
            description: String::new(),
            parent: None,
            properties: Vec::new(),
            relationships: Vec::new(),
            commands: Vec::new(),
            service: None,
            routing: RoutingSettings::default(),
        }
    }

    pub fn property(&self, name: &str) -> Option<&PropertyDef> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn relationship(&self, name: &str) -> Option<&RelationshipDef> {
        self.relationships.iter().find(|r| r.name == name)
    }

    pub fn command(&self, name: &str) -> Option<&CommandDef> {
        self.commands.iter().find(|c| c.name == name)
    }

    pub fn is_serviced(&self) -> bool {
        self.service.is_some()
    }
}

/// A literal property value on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Boolean(bool),
    Integer(i64),
    Float(f64),
    String(String),
}

impl PropertyValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            PropertyValue::Integer(i) => Some(*i as f64),
            PropertyValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropertyValue::String(s) => Some(s),
            _ => None,
        }
    }
}

/// Relationship on an instance pointing at one or more target instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipRef {
    pub name: String,
    pub interface: String,
    #[serde(deserialize_with = "one_or_many")]
    pub instances: Vec<String>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// A concrete twin of some interface.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinInstance {
    pub name: String,
    pub interface: String,
    pub properties: BTreeMap<String, PropertyValue>,
    pub relationships: Vec<RelationshipRef>,
}

impl TwinInstance {
    pub fn new(name: impl Into<String>, interface: impl Into<String>) -> Self {
        TwinInstance {
            name: name.into(),
            interface: interface.into(),
            properties: BTreeMap::new(),
            relationships: Vec::new(),
        }
    }

    pub fn with_relationship(mut self, name: &str, interface: &str, instance: &str) -> Self {
        self.relationships.push(RelationshipRef {
            name: name.to_string(),
            interface: interface.to_string(),
            instances: vec![instance.to_string()],
        });
        self
    }

    pub fn with_property(mut self, name: &str, value: PropertyValue) -> Self {
        self.properties.insert(name.to_string(), value);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_cpu("100m").unwrap(), 0.1);
        assert_eq!(parse_cpu("0.25").unwrap(), 0.25);
        assert_eq!(parse_memory("64Mi").unwrap(), 64 * 1024 * 1024);
        assert_eq!(parse_memory("1000").unwrap(), 1000);
        assert!(parse_memory("lots").is_err());
    }

    #[test]
    fn schema_acceptance() {
        let e = Schema::Enumeration(vec!["free".into(), "occupied".into()]);
        assert!(e.accepts(&PropertyValue::String("free".into())));
        assert!(!e.accepts(&PropertyValue::String("closed".into())));
        assert!(Schema::Primitive(PrimitiveSchema::Float).accepts(&PropertyValue::Integer(3)));
        assert!(!Schema::Primitive(PrimitiveSchema::Integer).accepts(&PropertyValue::Float(3.5)));
    }

    #[test]
    fn schema_yaml_forms() {
        let s: Schema = serde_yaml::from_str("float").unwrap();
        assert_eq!(s, Schema::Primitive(PrimitiveSchema::Float));
        let s: Schema = serde_yaml::from_str("{enum: [a, b]}").unwrap();
        assert_eq!(s, Schema::Enumeration(vec!["a".into(), "b".into()]));
        assert!(serde_yaml::from_str::<Schema>("decimal").is_err());
    }
}
