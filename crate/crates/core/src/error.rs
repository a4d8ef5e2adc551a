use crate::value::VertexId;

/// Parse failure with position info and the token set the parser would have accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub offset: usize,
    pub line: u32,
    pub column: u32,
    pub found: String,
    pub expected: Vec<&'static str>,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "syntax error at line {}, column {} (offset {}): found {}, expected one of [{}]",
            self.line,
            self.column,
            self.offset,
            self.found,
            self.expected.join(", ")
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(VertexId),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("type mismatch for `{field}`: expected {expected}, got {got}")]
    TypeMismatch {
        field: String,
        expected: String,
        got: String,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dimension {0}")]
    BadDimension(usize),
    #[error("collection `{0}` already exists")]
    DuplicateCollection(String),
    #[error("unknown collection `{0}`")]
    UnknownCollection(String),
    #[error("invalid payload value for field {0}: only scalar and text values are allowed")]
    BadPayloadValue(String),
    #[error("prune target lsn {requested} is beyond the last checkpoint at lsn {checkpoint}")]
    PruneBeyondCheckpoint { requested: u64, checkpoint: u64 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("graph is empty")]
    EmptyGraph,
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("engine is closed for writes")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;
