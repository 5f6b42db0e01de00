use thiserror::Error;

/// Errors raised while parsing or resolving twin definitions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DefinitionError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("document {document} (line {line}): unknown resource kind `{kind}`")]
    UnknownKind { document: usize, line: usize, kind: String },
    #[error("document {document} (line {line}): {message}")]
    Schema { document: usize, line: usize, message: String },
    #[error("duplicate interface `{0}`")]
    DuplicateInterface(String),
    #[error("duplicate instance `{0}`")]
    DuplicateInstance(String),
    #[error("interface `{interface}` declares unknown parent `{parent}`")]
    UnknownParent { interface: String, parent: String },
    #[error("inheritance cycle: {}", .0.join(" -> "))]
    InheritanceCycle(Vec<String>),
    #[error("interface `{interface}` declares {member} `{name}` twice")]
    DuplicateMember { interface: String, member: &'static str, name: String },
    #[error("relationship `{relationship}` on `{interface}` targets unknown interface `{target}`")]
    UnknownRelationshipTarget { interface: String, relationship: String, target: String },
    #[error("instance `{instance}` uses unknown interface `{interface}`")]
    UnknownInterface { instance: String, interface: String },
    #[error("instance `{instance}` sets undeclared property `{property}`")]
    UnknownProperty { instance: String, property: String },
    #[error("instance `{instance}` property `{property}` does not match schema {expected}")]
    PropertyType { instance: String, property: String, expected: String },
    #[error("instance `{instance}` uses undeclared relationship `{relationship}`")]
    UnknownRelationship { instance: String, relationship: String },
    #[error("instance `{instance}` relationship `{relationship}` expects interface `{expected}`, found `{found}`")]
    RelationshipInterface { instance: String, relationship: String, expected: String, found: String },
    #[error("instance `{instance}` relationship `{relationship}` points at unknown instance `{target}`")]
    DanglingRelationship { instance: String, relationship: String, target: String },
    #[error("instance `{instance}` relationship `{relationship}` has {count} targets but multiplicity is one")]
    Multiplicity { instance: String, relationship: String, count: usize },
    #[error("instance `{instance}` relationship `{relationship}` target `{target}` is a `{found}`, not a `{expected}`")]
    TargetType { instance: String, relationship: String, target: String, expected: String, found: String },
    #[error("interface `{interface}` has an invalid service: {reason}")]
    InvalidService { interface: String, reason: String },
    #[error("invalid name `{0}`: names must be non-empty and contain no '.', '*', '#' or whitespace")]
    InvalidName(String),
    #[error("no interface named `{0}`")]
    NoSuchInterface(String),
    #[error("dtdl: {0}")]
    Dtdl(String),
}
