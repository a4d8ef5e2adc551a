//! Parse output. Names are still strings here; the planner resolves them
//! against the catalog.

use crate::value::PropertyValue;

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    /// MATCH ... [WHERE ...] RETURN ...
    Query(ReadQuery),
    /// [MATCH ... [WHERE ...]] CREATE pattern, ...
    Create(CreateStmt),
    /// CALL proc(args) [YIELD cols] [RETURN ...]
    Call(CallStmt),
    /// CREATE VECTOR INDEX name ON label(field) OPTIONS {...}
    CreateVectorIndex(IndexDdl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadQuery {
    pub matches: Vec<MatchClause>,
    pub where_clause: Option<Expr>,
    pub ret: ReturnClause,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchClause {
    pub patterns: Vec<Pattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub start: NodePat,
    pub steps: Vec<(EdgePat, NodePat)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePat {
    pub var: Option<String>,
    pub label: Option<String>,
    /// Inline property map, sugar for equality predicates (or initial
    /// values under CREATE).
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatDir {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePat {
    pub var: Option<String>,
    pub label: Option<String>,
    pub dir: PatDir,
    /// Variable-length bounds: `*2` is (2,2), `*1..3` is (1,3).
    pub hops: Option<(u32, u32)>,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnClause {
    pub items: Vec<(Expr, Option<String>)>,
    pub order: Vec<(Expr, bool)>, // true = ascending
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateStmt {
    pub matches: Vec<MatchClause>,
    pub where_clause: Option<Expr>,
    pub patterns: Vec<Pattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallStmt {
    pub proc: String,
    pub args: Vec<Expr>,
    pub yields: Vec<String>,
    /// MATCH clauses after YIELD join patterns against the yielded columns.
    pub matches: Vec<MatchClause>,
    pub where_clause: Option<Expr>,
    pub ret: Option<ReturnClause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexDdl {
    pub name: String,
    pub label: String,
    pub field: String,
    pub options: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(PropertyValue),
    /// `[e1, e2, ...]`, evaluated to a vector.
    Array(Vec<Expr>),
    Param(String),
    Var(String),
    Prop(String, String),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Function call: vector_distance, similarity, norm.
    Fun(String, Vec<Expr>),
    /// count(*) or count(expr); only allowed in RETURN.
    Count(Option<Box<Expr>>),
}
