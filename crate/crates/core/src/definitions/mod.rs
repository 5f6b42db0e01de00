//! Twin interfaces, instances and the resolved twin graph.

mod document;
mod dtdl;
mod error;
mod graph;
mod model;

pub use document::{parse_definitions, parse_documents, to_yaml, Definitions, Resource, API_VERSION};
pub use dtdl::{import_dtdl, interface_name_from_dtmi, DtdlImport};
pub use error::DefinitionError;
pub use graph::{flatten_interfaces, resolve_graph, valid_name, Subgraph, SubgraphNode, TwinGraph};
pub use model::*;
