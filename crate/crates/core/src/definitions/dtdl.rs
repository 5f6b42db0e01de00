//! DTDL v2 interface import.

use super::error::DefinitionError;
use super::model::*;
use serde_json::Value;

/// Result of a DTDL import: interfaces plus skipped constructs.
#[derive(Debug, Clone, PartialEq)]
pub struct DtdlImport {
    pub interfaces: Vec<TwinInterface>,
    pub warnings: Vec<String>,
}

/// `dtmi:ngsi-ld:city:ParkingSpot;1` -> `ngsi-ld-city-parkingspot`.
pub fn interface_name_from_dtmi(id: &str) -> Result<String, DefinitionError> {
    let body = id
        .strip_prefix("dtmi:")
        .ok_or_else(|| DefinitionError::Dtdl(format!("`{id}` is not a dtmi identifier")))?;
    let body = body.split(';').next().unwrap_or(body);
    if body.is_empty() {
        return Err(DefinitionError::Dtdl(format!("`{id}` has an empty path")));
    }
    Ok(body.replace(':', "-").to_lowercase())
}

fn types_of(v: &Value) -> Vec<String> {
    match v.get("@type") {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(a)) => a.iter().filter_map(|x| x.as_str().map(String::from)).collect(),
        _ => Vec::new(),
    }
}

fn str_field<'a>(v: &'a Value, field: &str, ctx: &str) -> Result<&'a str, DefinitionError> {
    v.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| DefinitionError::Dtdl(format!("{ctx}: missing string field `{field}`")))
}

fn description(v: &Value) -> String {
    match v.get("description").or_else(|| v.get("displayName")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Object(m)) => m.get("en").and_then(Value::as_str).unwrap_or_default().to_string(),
        _ => String::new(),
    }
}

fn schema(v: &Value, ctx: &str) -> Result<Option<Schema>, String> {
    match v {
        Value::String(s) => Ok(Some(Schema::Primitive(match s.as_str() {
            "double" | "float" => PrimitiveSchema::Float,
            "integer" | "long" => PrimitiveSchema::Integer,
            "boolean" => PrimitiveSchema::Boolean,
            "string" | "date" | "dateTime" | "time" | "duration" => PrimitiveSchema::String,
            other => return Err(format!("{ctx}: unsupported schema `{other}`")),
        }))),
        Value::Object(_) if types_of(v).iter().any(|t| t == "Enum") => {
            let values: Vec<String> = v
                .get("enumValues")
                .and_then(Value::as_array)
                .map(|a| {
                    a.iter()
                        .filter_map(|e| match e.get("enumValue") {
                            Some(Value::String(s)) => Some(s.clone()),
                            Some(Value::Number(n)) => Some(n.to_string()),
                            _ => None,
                        })
                        .collect()
                })
                .unwrap_or_default();
            if values.is_empty() {
                Err(format!("{ctx}: enum without values"))
            } else {
                Ok(Some(Schema::Enumeration(values)))
            }
        }
        Value::Object(_) => Err(format!("{ctx}: unsupported complex schema {:?}", types_of(v))),
        _ => Err(format!("{ctx}: malformed schema")),
    }
}

fn import_one(v: &Value, warnings: &mut Vec<String>) -> Result<TwinInterface, DefinitionError> {
    let id = str_field(v, "@id", "interface")?;
    if !types_of(v).iter().any(|t| t == "Interface") {
        return Err(DefinitionError::Dtdl(format!("`{id}` is not an Interface")));
    }
    let mut iface = TwinInterface::new(interface_name_from_dtmi(id)?);
    iface.description = description(v);
    iface.parent = match v.get("extends") {
        None => None,
        Some(Value::String(p)) => Some(interface_name_from_dtmi(p)?),
        Some(Value::Array(a)) if a.len() == 1 => {
            Some(interface_name_from_dtmi(a[0].as_str().unwrap_or_default())?)
        }
        Some(Value::Array(a)) if a.is_empty() => None,
        Some(_) => return Err(DefinitionError::Dtdl(format!("`{id}`: only single inheritance is supported"))),
    };
    let contents = v.get("contents").and_then(Value::as_array).cloned().unwrap_or_default();
    for c in &contents {
        let types = types_of(c);
        let name = str_field(c, "name", id)?.to_string();
        let ctx = format!("{id} {name}");
        if types.iter().any(|t| t == "Property" || t == "Telemetry") {
            match c.get("schema").map(|s| schema(s, &ctx)) {
                Some(Ok(Some(s))) => iface.properties.push(PropertyDef { name, description: description(c), schema: s }),
                Some(Ok(None)) | None => warnings.push(format!("{ctx}: property without schema skipped")),
                Some(Err(w)) => warnings.push(format!("{w}; property skipped")),
            }
        } else if types.iter().any(|t| t == "Relationship") {
            let Some(target) = c.get("target").and_then(Value::as_str) else {
                warnings.push(format!("{ctx}: relationship without target skipped"));
                continue;
            };
            let many = c.get("maxMultiplicity").and_then(Value::as_u64).map(|m| m != 1).unwrap_or(true);
            iface.relationships.push(RelationshipDef {
                name,
                description: description(c),
                target: interface_name_from_dtmi(target)?,
                multiplicity: if many { Multiplicity::Many } else { Multiplicity::One },
            });
        } else if types.iter().any(|t| t == "Command") {
            let arg = c.get("request").and_then(|r| r.get("schema")).map(|s| schema(s, &ctx));
            let schema = match arg {
                Some(Ok(s)) => s,
                Some(Err(w)) => {
                    warnings.push(format!("{w}; command argument dropped"));
                    None
                }
                None => None,
            };
            iface.commands.push(CommandDef { name, description: description(c), schema });
        } else {
            warnings.push(format!("{ctx}: unsupported content type {types:?} skipped"));
        }
    }
    Ok(iface)
}

/// Imports one interface object or an array of them.
pub fn import_dtdl(json: &str) -> Result<DtdlImport, DefinitionError> {
    let value: Value = serde_json::from_str(json).map_err(|e| DefinitionError::Dtdl(e.to_string()))?;
    let items = match value {
        Value::Array(a) => a,
        other => vec![other],
    };
    let mut warnings = Vec::new();
    let mut interfaces = Vec::new();
    for item in &items {
        let iface = import_one(item, &mut warnings)?;
        if interfaces.iter().any(|i: &TwinInterface| i.name == iface.name) {
            return Err(DefinitionError::DuplicateInterface(iface.name));
        }
        interfaces.push(iface);
    }
    Ok(DtdlImport { interfaces, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARKING: &str = r#"[
      {"@id": "dtmi:ngsi-ld:city:ParkingSpot;1", "@type": "Interface",
       "@context": "dtmi:dtdl:context;2",
       "contents": [
         {"@type": "Property", "name": "status",
          "schema": {"@type": "Enum", "valueSchema": "string",
                     "enumValues": [{"name": "free", "enumValue": "free"},
                                    {"name": "occupied", "enumValue": "occupied"}]}},
         {"@type": "Relationship", "name": "refOffStreetParking",
          "target": "dtmi:ngsi-ld:city:OffStreetParking;1", "maxMultiplicity": 1},
         {"@type": "Property", "name": "location", "schema": {"@type": "Object", "fields": []}}
       ]},
      {"@id": "dtmi:ngsi-ld:city:OffStreetParking;1", "@type": "Interface",
       "contents": [{"@type": "Command", "name": "updatevehiclecount"},
                    {"@type": "Component", "name": "sub", "schema": "dtmi:x;1"}]}
    ]"#;

    #[test]
    fn imports_members_and_names() {
        let out = import_dtdl(PARKING).unwrap();
        assert_eq!(out.interfaces[0].name, "ngsi-ld-city-parkingspot");
        assert_eq!(out.interfaces[0].relationships[0].target, "ngsi-ld-city-offstreetparking");
        assert_eq!(out.interfaces[0].relationships[0].multiplicity, Multiplicity::One);
        assert_eq!(out.interfaces[1].commands[0].name, "updatevehiclecount");
        assert_eq!(out.warnings.len(), 2, "{:?}", out.warnings);
    }

    #[test]
    fn rejects_non_dtmi() {
        assert!(interface_name_from_dtmi("urn:x").is_err());
        assert!(import_dtdl("{\"@type\": \"Interface\"}").is_err());
    }
}
