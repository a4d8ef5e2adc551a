//! Resolved query plans. A plan is a linear operator chain over a row
//! schema; column indices are fixed at planning time so execution never
//! looks names up. Display output is the EXPLAIN rendering.

use std::fmt;

use crate::value::{Direction, FieldId, LabelId, Metric, PropertyValue};

/// Expression with all names resolved to column and field ids. The textual
/// names ride along for EXPLAIN output only.
#[derive(Debug, Clone, PartialEq)]
pub enum PExpr {
    Const(PropertyValue),
    Param(String),
    Array(Vec<PExpr>),
    Col {
        idx: usize,
        name: String,
    },
    Prop {
        col: usize,
        cname: String,
        field: FieldId,
        fname: String,
    },
    Cmp(CmpCode, Box<PExpr>, Box<PExpr>),
    /// Vertex in a column carries the given label.
    LabelIs {
        col: usize,
        cname: String,
        label: LabelId,
        lname: String,
    },
    And(Box<PExpr>, Box<PExpr>),
    Or(Box<PExpr>, Box<PExpr>),
    Not(Box<PExpr>),
    /// Distance between two vector expressions under a fixed metric.
    VectorDistance(Box<PExpr>, Box<PExpr>, Metric),
    /// Index-compatible score between two vector expressions.
    Similarity(Box<PExpr>, Box<PExpr>, Metric),
    Norm(Box<PExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpCode {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpCode {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpCode::Eq => "=",
            CmpCode::Ne => "<>",
            CmpCode::Lt => "<",
            CmpCode::Le => "<=",
            CmpCode::Gt => ">",
            CmpCode::Ge => ">=",
        }
    }

    pub fn flip(self) -> CmpCode {
        match self {
            CmpCode::Eq => CmpCode::Eq,
            CmpCode::Ne => CmpCode::Ne,
            CmpCode::Lt => CmpCode::Gt,
            CmpCode::Le => CmpCode::Ge,
            CmpCode::Gt => CmpCode::Lt,
            CmpCode::Ge => CmpCode::Le,
        }
    }
}

impl fmt::Display for PExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExpr::Const(v) => write!(f, "{v}"),
            PExpr::Param(p) => write!(f, "${p}"),
            PExpr::Array(items) => {
                write!(f, "[")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
            PExpr::Col { name, .. } => write!(f, "{name}"),
            PExpr::Prop { cname, fname, .. } => write!(f, "{cname}.{fname}"),
            PExpr::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            PExpr::LabelIs { cname, lname, .. } => write!(f, "{cname}:{lname}"),
            PExpr::And(a, b) => write!(f, "({a} AND {b})"),
            PExpr::Or(a, b) => write!(f, "({a} OR {b})"),
            PExpr::Not(e) => write!(f, "NOT {e}"),
            PExpr::VectorDistance(a, b, _) => write!(f, "vector_distance({a}, {b})"),
            PExpr::Similarity(a, b, _) => write!(f, "similarity({a}, {b})"),
            PExpr::Norm(e) => write!(f, "norm({e})"),
        }
    }
}

/// One operator in the chain, producer first.
#[derive(Debug, Clone)]
pub enum PlanNode {
    VertexScan {
        var: usize,
        var_name: String,
        label: Option<LabelId>,
        label_name: Option<String>,
        /// True when this scan extends existing rows (cartesian rescan)
        /// instead of producing the first column.
        cross: bool,
    },
    VertexVectorScan {
        var: usize,
        var_name: String,
        score_col: usize,
        collection: String,
        query: PExpr,
        k: usize,
        /// Payload predicates absorbed into the index probe.
        preds: Vec<AbsorbedPred>,
        label_name: String,
    },
    Expand {
        from: usize,
        from_name: String,
        edge: Option<usize>,
        edge_name: Option<String>,
        to: usize,
        to_name: String,
        /// When the target variable is already bound, check instead of bind.
        to_bound: bool,
        label: Option<LabelId>,
        label_name: Option<String>,
        dir: Direction,
        to_label: Option<(LabelId, String)>,
    },
    VarLengthExpand {
        from: usize,
        from_name: String,
        to: usize,
        to_name: String,
        to_bound: bool,
        label: Option<LabelId>,
        label_name: Option<String>,
        dir: Direction,
        min: u32,
        max: u32,
        to_label: Option<(LabelId, String)>,
    },
    Filter {
        pred: PExpr,
    },
    OrderBy {
        keys: Vec<(PExpr, bool)>,
    },
    Limit {
        n: u64,
    },
    Project {
        items: Vec<(PExpr, String)>,
    },
    Count {
        expr: Option<PExpr>,
        name: String,
    },
    /// Procedure source; yields its columns as the initial schema.
    Call {
        call: PlannedCall,
    },
}

#[derive(Debug, Clone)]
pub struct PlannedCall {
    pub proc: ProcKind,
    pub display: String,
    pub yields: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum ProcKind {
    Pagerank {
        damping: f64,
        max_iter: u64,
        tol: f64,
    },
    Wcc,
    VectorSearch {
        collection: String,
        query: Vec<f32>,
        k: usize,
    },
    Writeback {
        proc: String,
        field: FieldId,
        field_name: String,
        damping: f64,
        max_iter: u64,
        tol: f64,
    },
}

/// A filter absorbed into a vector index probe: `column op value`.
#[derive(Debug, Clone)]
pub struct AbsorbedPred {
    pub field: FieldId,
    pub fname: String,
    pub op: CmpCode,
    pub value: PExpr,
}

impl fmt::Display for AbsorbedPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.fname, self.op.symbol(), self.value)
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub nodes: Vec<PlanNode>,
    /// Internal row schema of the producer chain; working rows carry one
    /// cell per entry. The final Project/Count narrows rows to `columns`.
    pub schema: Vec<String>,
    /// Output column names.
    pub columns: Vec<String>,
}

impl PlanNode {
    fn render(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanNode::VertexScan {
                var_name,
                label_name,
                cross,
                ..
            } => {
                match label_name {
                    Some(l) => write!(f, "VertexScan [{var_name}: {l}]")?,
                    None => write!(f, "VertexScan [{var_name}]")?,
                }
                if *cross {
                    write!(f, " (rescan)")?;
                }
                Ok(())
            }
            PlanNode::VertexVectorScan {
                var_name,
                collection,
                query,
                k,
                preds,
                label_name,
                ..
            } => {
                write!(
                    f,
                    "VertexVectorScan [{var_name}: {label_name}, index={collection}, q={query}, k={k}"
                )?;
                if !preds.is_empty() {
                    write!(f, ", filter=")?;
                    for (i, p) in preds.iter().enumerate() {
                        if i > 0 {
                            write!(f, " AND ")?;
                        }
                        write!(f, "{p}")?;
                    }
                }
                write!(f, "] -> ({var_name}, score)")
            }
            PlanNode::Expand {
                from_name,
                edge_name,
                to_name,
                label_name,
                dir,
                to_label,
                to_bound,
                ..
            } => {
                let lab = label_name.as_deref().unwrap_or("");
                let ev = edge_name.as_deref().unwrap_or("");
                match dir {
                    Direction::Out => {
                        write!(f, "Expand [({from_name})-[{ev}:{lab}]->({to_name}")?
                    }
                    Direction::In => {
                        write!(f, "Expand [({from_name})<-[{ev}:{lab}]-({to_name}")?
                    }
                }
                if let Some((_, ln)) = to_label {
                    write!(f, ": {ln}")?;
                }
                write!(f, ")]")?;
                if *to_bound {
                    write!(f, " (join)")?;
                }
                Ok(())
            }
            PlanNode::VarLengthExpand {
                from_name,
                to_name,
                label_name,
                dir,
                min,
                max,
                to_label,
                to_bound,
                ..
            } => {
                let lab = label_name.as_deref().unwrap_or("");
                match dir {
                    Direction::Out => write!(
                        f,
                        "VarLengthExpand [({from_name})-[:{lab}*{min}..{max}]->({to_name}"
                    )?,
                    Direction::In => write!(
                        f,
                        "VarLengthExpand [({from_name})<-[:{lab}*{min}..{max}]-({to_name}"
                    )?,
                }
                if let Some((_, ln)) = to_label {
                    write!(f, ": {ln}")?;
                }
                write!(f, ")]")?;
                if *to_bound {
                    write!(f, " (join)")?;
                }
                Ok(())
            }
            PlanNode::Filter { pred } => write!(f, "Filter [{pred}]"),
            PlanNode::OrderBy { keys } => {
                write!(f, "OrderBy [")?;
                for (i, (e, asc)) in keys.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e} {}", if *asc { "asc" } else { "desc" })?;
                }
                write!(f, "]")
            }
            PlanNode::Limit { n } => write!(f, "Limit [{n}]"),
            PlanNode::Project { items } => {
                write!(f, "Project [")?;
                for (i, (e, name)) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    let rendered = format!("{e}");
                    if &rendered == name {
                        write!(f, "{rendered}")?;
                    } else {
                        write!(f, "{rendered} AS {name}")?;
                    }
                }
                write!(f, "]")
            }
            PlanNode::Count { expr, .. } => match expr {
                None => write!(f, "Count [*]"),
                Some(e) => write!(f, "Count [{e}]"),
            },
            PlanNode::Call { call } => write!(f, "Call [{}]", call.display),
        }
    }
}

impl fmt::Display for Plan {
    /// Sink at the top, producer at the bottom, two-space indent per level.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (depth, node) in self.nodes.iter().rev().enumerate() {
            if depth > 0 {
                writeln!(f)?;
            }
            for _ in 0..depth {
                write!(f, "  ")?;
            }
            node.render(f)?;
        }
        Ok(())
    }
}
