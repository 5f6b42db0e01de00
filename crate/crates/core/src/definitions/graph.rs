//! Inheritance flattening, instance validation and per-interface subgraphs.

use super::error::DefinitionError;
use super::model::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Returns true when `name` is usable as a routing key segment.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c == '.' || c == '*' || c == '#' || c.is_whitespace())
}

fn check_name(name: &str) -> Result<(), DefinitionError> {
    if valid_name(name) {
        Ok(())
    } else {
        Err(DefinitionError::InvalidName(name.to_string()))
    }
}

/// Merges `own` members over `inherited`: overrides keep the inherited
/// position, new members follow in declaration order.
fn merge<T: Clone>(inherited: &[T], own: &[T], key: impl Fn(&T) -> &str) -> Vec<T> {
    let mut out: Vec<T> = inherited.to_vec();
    for m in own {
        match out.iter().position(|x| key(x) == key(m)) {
            Some(i) => out[i] = m.clone(),
            None => out.push(m.clone()),
        }
    }
    out
}

fn check_unique<T>(iface: &str, member: &'static str, items: &[T], key: impl Fn(&T) -> &str) -> Result<(), DefinitionError> {
    let mut seen = BTreeSet::new();
    for i in items {
        if !seen.insert(key(i)) {
            return Err(DefinitionError::DuplicateMember {
                interface: iface.to_string(),
                member,
                name: key(i).to_string(),
            });
        }
    }
    Ok(())
}

/// Flattens inheritance so every interface carries its ancestors' members.
///
/// Applying this to an already flattened set returns the same set.
pub fn flatten_interfaces(interfaces: &[TwinInterface]) -> Result<Vec<TwinInterface>, DefinitionError> {
    let mut by_name: BTreeMap<&str, &TwinInterface> = BTreeMap::new();
    for i in interfaces {
        check_name(&i.name)?;
        if by_name.insert(&i.name, i).is_some() {
            return Err(DefinitionError::DuplicateInterface(i.name.clone()));
        }
        check_unique(&i.name, "property", &i.properties, |p| &p.name)?;
        check_unique(&i.name, "relationship", &i.relationships, |r| &r.name)?;
        check_unique(&i.name, "command", &i.commands, |c| &c.name)?;
        for c in &i.commands {
            check_name(&c.name)?;
        }
        if let Some(parent) = &i.parent {
            if !by_name.contains_key(parent.as_str()) && !interfaces.iter().any(|x| &x.name == parent) {
                return Err(DefinitionError::UnknownParent { interface: i.name.clone(), parent: parent.clone() });
            }
        }
        if let Some(svc) = &i.service {
            let p = svc.autoscale;
            let reason = if svc.handler.is_empty() {
                Some("empty handler id".to_string())
            } else if p.target == 0 {
                Some("autoscale target must be at least 1".to_string())
            } else if p.max_replicas == 0 || p.min_replicas > p.max_replicas {
                Some(format!("replica bounds {}..{} are invalid", p.min_replicas, p.max_replicas))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(DefinitionError::InvalidService { interface: i.name.clone(), reason });
            }
        }
    }

    let mut done: BTreeMap<String, TwinInterface> = BTreeMap::new();
    for i in interfaces {
        let mut chain = vec![i.name.clone()];
        let mut cur = i;
        while let Some(p) = &cur.parent {
            if chain.contains(p) {
                chain.push(p.clone());
                return Err(DefinitionError::InheritanceCycle(chain));
            }
            chain.push(p.clone());
            cur = by_name[p.as_str()];
        }
        // Resolve from the root down.
        for name in chain.iter().rev() {
            if done.contains_key(name) {
                continue;
            }
            let own = by_name[name.as_str()];
            let flat = match &own.parent {
                None => own.clone(),
                Some(p) => {
                    let base = &done[p];
                    TwinInterface {
                        properties: merge(&base.properties, &own.properties, |x| &x.name),
                        relationships: merge(&base.relationships, &own.relationships, |x| &x.name),
                        commands: merge(&base.commands, &own.commands, |x| &x.name),
                        ..own.clone()
                    }
                }
            };
            done.insert(name.clone(), flat);
        }
    }

    // Relationship targets must exist.
    for i in done.values() {
        for r in &i.relationships {
            if !done.contains_key(&r.target) {
                return Err(DefinitionError::UnknownRelationshipTarget {
                    interface: i.name.clone(),
                    relationship: r.name.clone(),
                    target: r.target.clone(),
                });
            }
        }
    }
    Ok(interfaces.iter().map(|i| done.remove(&i.name).expect("flattened")).collect())
}

/// One instance in an interface subgraph with its outgoing edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphNode {
    pub instance: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, PropertyValue>,
    pub relationships: Vec<RelationshipRef>,
}

/// All instances of one interface with their relationship targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgraph {
    pub interface: String,
    pub nodes: Vec<SubgraphNode>,
}

impl Subgraph {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("subgraph serializes")
    }

    pub fn encoded_size(&self) -> usize {
        self.encode().len()
    }
}

/// Validated twin graph: flattened interfaces plus instances.
#[derive(Debug, Clone, Default)]
pub struct TwinGraph {
    interfaces: BTreeMap<String, TwinInterface>,
    interface_order: Vec<String>,
    instances: BTreeMap<String, TwinInstance>,
    by_interface: BTreeMap<String, Vec<String>>,
}

impl TwinGraph {
    pub fn interface(&self, name: &str) -> Option<&TwinInterface> {
        self.interfaces.get(name)
    }

    /// Interfaces in declaration order.
    pub fn interfaces(&self) -> impl Iterator<Item = &TwinInterface> {
        self.interface_order.iter().map(|n| &self.interfaces[n])
    }

    pub fn instance(&self, name: &str) -> Option<&TwinInstance> {
        self.instances.get(name)
    }

    /// Instances sorted by name.
    pub fn instances(&self) -> impl Iterator<Item = &TwinInstance> {
        self.instances.values()
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    pub fn instances_of(&self, interface: &str) -> &[String] {
        self.by_interface.get(interface).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// True when `iface` is `ancestor` or inherits from it.
    pub fn is_a(&self, iface: &str, ancestor: &str) -> bool {
        let mut cur = Some(iface);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.interfaces.get(c).and_then(|i| i.parent.as_deref());
        }
        false
    }

    /// Targets of a named relationship on an instance.
    pub fn relationship_targets(&self, instance: &str, relationship: &str) -> Option<&RelationshipRef> {
        self.instances.get(instance)?.relationships.iter().find(|r| r.name == relationship)
    }

    pub fn subgraph(&self, interface: &str) -> Result<Subgraph, DefinitionError> {
        if !self.interfaces.contains_key(interface) {
            return Err(DefinitionError::NoSuchInterface(interface.to_string()));
        }
        let nodes = self
            .instances_of(interface)
            .iter()
            .map(|n| {
                let i = &self.instances[n];
                SubgraphNode {
                    instance: i.name.clone(),
                    properties: i.properties.clone(),
                    relationships: i.relationships.clone(),
                }
            })
            .collect();
        Ok(Subgraph { interface: interface.to_string(), nodes })
    }

    /// Total encoded size of all interface subgraphs in bytes.
    pub fn encoded_size(&self) -> usize {
        self.interface_order
            .iter()
            .map(|n| self.subgraph(n).map(|s| s.encoded_size()).unwrap_or(0))
            .sum()
    }
}

/// Flattens interfaces and validates instances against them.
pub fn resolve_graph(interfaces: &[TwinInterface], instances: &[TwinInstance]) -> Result<TwinGraph, DefinitionError> {
    let flat = flatten_interfaces(interfaces)?;
    let mut graph = TwinGraph::default();
    for i in flat {
        graph.interface_order.push(i.name.clone());
        graph.interfaces.insert(i.name.clone(), i);
    }
    for inst in instances {
        check_name(&inst.name)?;
        if graph.instances.contains_key(&inst.name) {
            return Err(DefinitionError::DuplicateInstance(inst.name.clone()));
        }
        if !graph.interfaces.contains_key(&inst.interface) {
            return Err(DefinitionError::UnknownInterface {
                instance: inst.name.clone(),
                interface: inst.interface.clone(),
            });
        }
        graph.instances.insert(inst.name.clone(), inst.clone());
    }
    for inst in graph.instances.values() {
        let iface = &graph.interfaces[&inst.interface];
        for (name, value) in &inst.properties {
            let def = iface.property(name).ok_or_else(|| DefinitionError::UnknownProperty {
                instance: inst.name.clone(),
                property: name.clone(),
            })?;
            if !def.schema.accepts(value) {
                return Err(DefinitionError::PropertyType {
                    instance: inst.name.clone(),
                    property: name.clone(),
                    expected: def.schema.to_string(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for r in &inst.relationships {
            let def = iface.relationship(&r.name).ok_or_else(|| DefinitionError::UnknownRelationship {
                instance: inst.name.clone(),
                relationship: r.name.clone(),
            })?;
            if !seen.insert(&r.name) {
                return Err(DefinitionError::DuplicateMember {
                    interface: inst.name.clone(),
                    member: "relationship",
                    name: r.name.clone(),
                });
            }
            if !graph.is_a(&r.interface, &def.target) {
                return Err(DefinitionError::RelationshipInterface {
                    instance: inst.name.clone(),
                    relationship: r.name.clone(),
                    expected: def.target.clone(),
                    found: r.interface.clone(),
                });
            }
            if def.multiplicity == Multiplicity::One && r.instances.len() != 1 {
                return Err(DefinitionError::Multiplicity {
                    instance: inst.name.clone(),
                    relationship: r.name.clone(),
                    count: r.instances.len(),
                });
            }
            for t in &r.instances {
                let target = graph.instances.get(t).ok_or_else(|| DefinitionError::DanglingRelationship {
                    instance: inst.name.clone(),
                    relationship: r.name.clone(),
                    target: t.clone(),
                })?;
                if !graph.is_a(&target.interface, &r.interface) {
                    return Err(DefinitionError::TargetType {
                        instance: inst.name.clone(),
                        relationship: r.name.clone(),
                        target: t.clone(),
                        expected: r.interface.clone(),
                        found: target.interface.clone(),
                    });
                }
            }
        }
    }
    for inst in graph.instances.values() {
        graph.by_interface.entry(inst.interface.clone()).or_default().push(inst.name.clone());
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(name: &str, schema: PrimitiveSchema) -> PropertyDef {
        PropertyDef { name: name.into(), description: String::new(), schema: Schema::Primitive(schema) }
    }

    fn family() -> Vec<TwinInterface> {
        let mut base = TwinInterface::new("base");
        base.properties = vec![prop("a", PrimitiveSchema::Integer), prop("b", PrimitiveSchema::String)];
        base.commands = vec![CommandDef { name: "reset".into(), description: String::new(), schema: None }];
        let mut mid = TwinInterface::new("mid");
        mid.parent = Some("base".into());
        mid.properties = vec![prop("b", PrimitiveSchema::Float), prop("c", PrimitiveSchema::Boolean)];
        let mut leaf = TwinInterface::new("leaf");
        leaf.parent = Some("mid".into());
        leaf.relationships = vec![RelationshipDef {
            name: "owner".into(),
            description: String::new(),
            target: "base".into(),
            multiplicity: Multiplicity::One,
        }];
        // Declared out of order on purpose.
        vec![leaf, base, mid]
    }

    #[test]
    fn flattening_inherits_and_overrides() {
        let flat = flatten_interfaces(&family()).unwrap();
        let leaf = &flat[0];
        let names: Vec<_> = leaf.properties.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(leaf.property("b").unwrap().schema, Schema::Primitive(PrimitiveSchema::Float));
        assert!(leaf.command("reset").is_some());
        assert_eq!(flatten_interfaces(&flat).unwrap(), flat);
    }

    #[test]
    fn cycles_and_unknown_parents() {
        let mut a = TwinInterface::new("a");
        a.parent = Some("b".into());
        let mut b = TwinInterface::new("b");
        b.parent = Some("a".into());
        assert!(matches!(flatten_interfaces(&[a.clone(), b]), Err(DefinitionError::InheritanceCycle(_))));
        assert!(matches!(flatten_interfaces(&[a]), Err(DefinitionError::UnknownParent { .. })));
    }

    #[test]
    fn instance_validation() {
        let ifaces = family();
        let owner = TwinInstance::new("m1", "mid").with_property("b", PropertyValue::Float(1.0));
        let leaf = TwinInstance::new("l1", "leaf").with_relationship("owner", "base", "m1");
        let g = resolve_graph(&ifaces, &[owner.clone(), leaf]).unwrap();
        assert_eq!(g.relationship_targets("l1", "owner").unwrap().instances, ["m1"]);
        assert_eq!(g.subgraph("leaf").unwrap().nodes.len(), 1);

        let dangling = TwinInstance::new("l2", "leaf").with_relationship("owner", "base", "nobody");
        assert!(matches!(
            resolve_graph(&ifaces, &[owner.clone(), dangling]),
            Err(DefinitionError::DanglingRelationship { .. })
        ));
        let bad_type = TwinInstance::new("x", "mid").with_property("c", PropertyValue::Integer(1));
        assert!(matches!(resolve_graph(&ifaces, &[bad_type]), Err(DefinitionError::PropertyType { .. })));
        let unknown = TwinInstance::new("x", "mid").with_property("zzz", PropertyValue::Integer(1));
        assert!(matches!(resolve_graph(&ifaces, &[unknown]), Err(DefinitionError::UnknownProperty { .. })));
        let mut many = TwinInstance::new("l3", "leaf").with_relationship("owner", "base", "m1");
        many.relationships[0].instances.push("m1".into());
        assert!(matches!(resolve_graph(&ifaces, &[owner, many]), Err(DefinitionError::Multiplicity { .. })));
        assert!(matches!(
            resolve_graph(&ifaces, &[TwinInstance::new("q", "ghost")]),
            Err(DefinitionError::UnknownInterface { .. })
        ));
    }

    #[test]
    fn names_are_segment_safe() {
        assert!(valid_name("ngsi-ld-city-pole"));
        assert!(!valid_name("a.b"));
        assert!(!valid_name(""));
        assert!(!valid_name("a b"));
    }
}
