//! Embedded multi-modal database engine: a property graph with adaptive
//! per-vertex edge storage, filterable vector search, write-ahead-log
//! durability with checkpoint recovery, analytic procedures, and a
//! Cypher-style query language, all inside one process.

pub mod analytics;
pub mod attrs;
pub mod catalog;
pub mod checkpoint;
pub mod codec;
pub mod engine;
pub mod error;
pub mod gen;
pub mod graph;
pub mod query;
pub mod value;
pub mod vector;
pub mod wal;

pub use engine::{CollectionInfo, Database, EngineOptions, EngineStats, State};
pub use error::{EngineError, Result};
pub use query::{Cell, ExecOptions, Params, QueryResult};
pub use value::{
    Direction, EdgeKey, EdgeRef, FieldId, FieldType, LabelId, Metric, Owner, Point,
    PropertyValue, VertexId,
};
