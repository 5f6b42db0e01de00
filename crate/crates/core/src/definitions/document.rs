//! YAML resource documents (`kind: TwinInterface` / `kind: TwinInstance`).

use super::error::DefinitionError;
use super::model::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const API_VERSION: &str = "dtd.ktwin/v0";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterfaceSpec {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    properties: Vec<PropertyDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relationships: Vec<RelationshipDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    commands: Vec<CommandDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service: Option<ServiceSettings>,
    #[serde(default)]
    routing: RoutingSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceSpec {
    interface: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    properties: BTreeMap<String, PropertyValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relationships: Vec<RelationshipRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct Document<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    api_version: Option<String>,
    kind: String,
    metadata: Metadata,
    spec: S,
}

#[derive(Deserialize)]
struct KindProbe {
    kind: Option<String>,
}

/// One parsed resource.
#[derive(Debug, Clone, PartialEq)]
pub enum Resource {
    Interface(TwinInterface),
    Instance(TwinInstance),
}

/// Interfaces and instances collected from one or more files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Definitions {
    pub interfaces: Vec<TwinInterface>,
    pub instances: Vec<TwinInstance>,
}

impl Definitions {
    pub fn extend(&mut self, resources: Vec<Resource>) {
        for r in resources {
            match r {
                Resource::Interface(i) => self.interfaces.push(i),
                Resource::Instance(i) => self.instances.push(i),
            }
        }
    }
}

/// Line numbers (1-based) where each `---` separated document starts.
fn document_start_lines(text: &str) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut pending = true;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_end();
        if trimmed == "---" || trimmed.starts_with("--- ") {
            pending = true;
            continue;
        }
        let content = trimmed.trim_start();
        if pending && !content.is_empty() && !content.starts_with('#') {
            starts.push(i + 1);
            pending = false;
        }
    }
    starts
}

fn syntax(err: &serde_yaml::Error) -> DefinitionError {
    let (line, column) = err.location().map(|l| (l.line(), l.column())).unwrap_or((0, 0));
    DefinitionError::Syntax { line, column, message: strip_location(&err.to_string()) }
}

fn strip_location(message: &str) -> String {
    match message.find(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message.to_string(),
    }
}

/// Parses a (possibly multi-document) YAML string into resources.
pub fn parse_documents(text: &str) -> Result<Vec<Resource>, DefinitionError> {
    // First pass: plain YAML so syntax errors are reported as such.
    let mut values = Vec::new();
    for doc in serde_yaml::Deserializer::from_str(text) {
        let value = serde_yaml::Value::deserialize(doc).map_err(|e| syntax(&e))?;
        values.push(value);
    }
    let starts = document_start_lines(text);
    let mut out = Vec::new();
    let mut index = 0usize;
    for value in values {
        if value.is_null() {
            continue;
        }
        index += 1;
        let line = starts.get(index - 1).copied().unwrap_or(0);
        let schema_err = |e: serde_yaml::Error| {
            let doc_line = e.location().map(|l| l.line()).unwrap_or(0);
            DefinitionError::Schema {
                document: index,
                line: if doc_line > 0 { line + doc_line - 1 } else { line },
                message: strip_location(&e.to_string()),
            }
        };
        let probe: KindProbe = serde_yaml::from_value(value.clone()).map_err(schema_err)?;
        let kind = probe.kind.unwrap_or_default();
        let resource = match kind.as_str() {
            "TwinInterface" => {
                let doc: Document<InterfaceSpec> =
                    serde_yaml::from_value(value).map_err(schema_err)?;
                Resource::Interface(interface_from_doc(doc))
            }
            "TwinInstance" => {
                let doc: Document<InstanceSpec> =
                    serde_yaml::from_value(value).map_err(schema_err)?;
                Resource::Instance(TwinInstance {
                    name: doc.metadata.name,
                    interface: doc.spec.interface,
                    properties: doc.spec.properties,
                    relationships: doc.spec.relationships,
                })
            }
            other => {
                return Err(DefinitionError::UnknownKind { document: index, line, kind: other.to_string() })
            }
        };
        out.push(resource);
    }
    Ok(out)
}

fn interface_from_doc(doc: Document<InterfaceSpec>) -> TwinInterface {
    TwinInterface {
        name: doc.metadata.name,
        description: doc.spec.description,
        parent: doc.spec.parent,
        properties: doc.spec.properties,
        relationships: doc.spec.relationships,
        commands: doc.spec.commands,
        service: doc.spec.service,
        routing: doc.spec.routing,
    }
}

/// Parses several YAML texts and collects interfaces and instances.
pub fn parse_definitions<S: AsRef<str>>(texts: &[S]) -> Result<Definitions, DefinitionError> {
    let mut defs = Definitions::default();
    for text in texts {
        defs.extend(parse_documents(text.as_ref())?);
    }
    Ok(defs)
}

/// Serializes resources back into multi-document YAML.
pub fn to_yaml(resources: &[Resource]) -> String {
    let mut out = String::new();
    for r in resources {
        out.push_str("---\n");
        let text = match r {
            Resource::Interface(i) => serde_yaml::to_string(&Document {
                api_version: Some(API_VERSION.to_string()),
                kind: "TwinInterface".to_string(),
                metadata: Metadata { name: i.name.clone() },
                spec: InterfaceSpec {
                    description: i.description.clone(),
                    parent: i.parent.clone(),
                    properties: i.properties.clone(),
                    relationships: i.relationships.clone(),
                    commands: i.commands.clone(),
                    service: i.service.clone(),
                    routing: i.routing,
                },
            }),
            Resource::Instance(i) => serde_yaml::to_string(&Document {
                api_version: Some(API_VERSION.to_string()),
                kind: "TwinInstance".to_string(),
                metadata: Metadata { name: i.name.clone() },
                spec: InstanceSpec {
                    interface: i.interface.clone(),
                    properties: i.properties.clone(),
                    relationships: i.relationships.clone(),
                },
            }),
        };
        out.push_str(&text.expect("definitions serialize to yaml"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
apiVersion: dtd.ktwin/v0
kind: TwinInterface
metadata:
  name: city-pole
spec:
  properties:
    - name: height
      schema: float
  commands:
    - name: updateairqualityindex
  service:
    handler: pole-relay
    memory: 64Mi
    cpu: 100m
  routing:
    persistStoreEvents: false
---
kind: TwinInstance
metadata:
  name: pole-1
spec:
  interface: city-pole
  properties:
    height: 7.5
"#;

    #[test]
    fn parses_multi_document() {
        let r = parse_documents(SAMPLE).unwrap();
        assert_eq!(r.len(), 2);
        let Resource::Interface(i) = &r[0] else { panic!() };
        assert_eq!(i.name, "city-pole");
        let svc = i.service.as_ref().unwrap();
        assert_eq!(svc.cpu, 0.1);
        assert_eq!(svc.memory, 64 << 20);
        assert_eq!(svc.autoscale, AutoscalePolicy::default());
        assert!(!i.routing.persist_store_events);
        let Resource::Instance(p) = &r[1] else { panic!() };
        assert_eq!(p.properties["height"], PropertyValue::Float(7.5));
    }

    #[test]
    fn unknown_field_is_schema_error_with_line() {
        let text = "kind: TwinInterface\nmetadata:\n  name: x\nspec:\n  colour: red\n";
        match parse_documents(text) {
            Err(DefinitionError::Schema { document: 1, message, .. }) => {
                assert!(message.contains("colour"), "{message}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_kind() {
        let text = "kind: TwinInterface\nmetadata: {name: a}\nspec: {}\n---\nkind: Pod\nmetadata: {name: b}\n";
        match parse_documents(text) {
            Err(DefinitionError::UnknownKind { document: 2, line: 5, kind }) => assert_eq!(kind, "Pod"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_documents("kind: [unclosed\n") {
            Err(DefinitionError::Syntax { line, .. }) => assert!(line >= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn yaml_round_trip() {
        let r = parse_documents(SAMPLE).unwrap();
        let again = parse_documents(&to_yaml(&r)).unwrap();
        assert_eq!(r, again);
    }
}
