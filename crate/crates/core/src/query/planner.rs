//! Lowers parsed statements onto the catalog: resolves names to label,
//! field, and column ids, checks types, and emits linear operator chains.
//! All name errors surface here so execution never sees an unresolved name.

use std::collections::HashMap;

use crate::engine::State;
use crate::error::{EngineError, Result};
use crate::query::ast::{
    CallStmt, CmpOp, CreateStmt, EdgePat, Expr, IndexDdl, MatchClause, NodePat, PatDir, Pattern,
    ReadQuery, ReturnClause,
};
use crate::query::plan::{AbsorbedPred, CmpCode, PExpr, Plan, PlanNode, PlannedCall, ProcKind};
use crate::value::{Direction, FieldId, FieldType, LabelId, Metric, PropertyValue};

pub type Params = std::collections::BTreeMap<String, PropertyValue>;

fn sem(msg: impl Into<String>) -> EngineError {
    EngineError::Semantic(msg.into())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BindKind {
    Vertex,
    Edge,
    Value,
}

#[derive(Clone, Copy)]
struct Bind {
    col: usize,
    kind: BindKind,
}

pub fn plan_read(state: &State, params: &Params, q: &ReadQuery) -> Result<Plan> {
    let mut p = Planner::new(state, params);
    p.compile_matches(&q.matches, &q.where_clause)?;
    p.plan_return(&q.ret)
}

pub fn plan_call(state: &State, params: &Params, c: &CallStmt) -> Result<Plan> {
    let mut p = Planner::new(state, params);
    p.compile_call_source(c)?;
    if !c.yields.is_empty() {
        p.apply_yields(&c.yields)?;
    }
    p.compile_matches(&c.matches, &c.where_clause)?;
    match &c.ret {
        Some(r) => p.plan_return(r),
        None => {
            let columns = p.schema.clone();
            Ok(Plan {
                nodes: p.nodes,
                schema: p.schema,
                columns,
            })
        }
    }
}

/// A CREATE statement lowered to an optional match pipeline plus per-row
/// construction instructions. `slots` counts vertices created per row.
#[derive(Debug, Clone)]
pub struct PlannedCreate {
    pub match_nodes: Vec<PlanNode>,
    pub match_width: usize,
    pub patterns: Vec<CreatePattern>,
    pub slots: usize,
}

#[derive(Debug, Clone)]
pub struct CreatePattern {
    pub start: NodeSlot,
    pub steps: Vec<CreateStep>,
}

#[derive(Debug, Clone)]
pub struct CreateStep {
    pub label: LabelId,
    pub label_name: String,
    pub dir: Direction,
    pub props: Vec<(FieldId, PExpr)>,
    pub node: NodeSlot,
}

#[derive(Debug, Clone)]
pub enum NodeSlot {
    /// A vertex bound by MATCH, addressed by row column.
    Row(usize),
    /// A vertex created earlier in this statement.
    Created(usize),
    New {
        label: LabelId,
        label_name: String,
        props: Vec<(FieldId, PExpr)>,
        slot: usize,
    },
}

pub fn plan_create(state: &State, params: &Params, c: &CreateStmt) -> Result<PlannedCreate> {
    let mut p = Planner::new(state, params);
    p.compile_matches(&c.matches, &c.where_clause)?;
    let mut created: HashMap<String, usize> = HashMap::new();
    let mut slots = 0usize;
    let mut patterns = Vec::new();
    for pat in &c.patterns {
        let start = p.create_slot(&pat.start, &mut created, &mut slots)?;
        let mut steps = Vec::new();
        for (edge, node) in &pat.steps {
            if edge.hops.is_some() {
                return Err(sem("variable-length edges cannot be created"));
            }
            let label_name = edge
                .label
                .clone()
                .ok_or_else(|| sem("a created edge needs a label"))?;
            let label = p.edge_label(&label_name)?;
            let mut props = Vec::new();
            for (k, e) in &edge.props {
                props.push((p.state.catalog.field_id(k)?, p.resolve(e)?));
            }
            let node = p.create_slot(node, &mut created, &mut slots)?;
            steps.push(CreateStep {
                label,
                label_name,
                dir: match edge.dir {
                    PatDir::Out => Direction::Out,
                    PatDir::In => Direction::In,
                },
                props,
                node,
            });
        }
        patterns.push(CreatePattern { start, steps });
    }
    Ok(PlannedCreate {
        match_nodes: p.nodes,
        match_width: p.schema.len(),
        patterns,
        slots,
    })
}

/// CREATE VECTOR INDEX with options resolved against the catalog.
#[derive(Debug, Clone)]
pub struct PlannedDdl {
    pub name: String,
    pub label: LabelId,
    pub field: FieldId,
    pub metric: Metric,
    pub m: u32,
    pub ef_construction: u32,
    pub payload: Vec<FieldId>,
    pub display: String,
}

pub fn plan_ddl(state: &State, params: &Params, ddl: &IndexDdl) -> Result<PlannedDdl> {
    let p = Planner::new(state, params);
    let label = p.vertex_label(&ddl.label)?;
    let field = state.catalog.field_id(&ddl.field)?;
    let dim = match state.catalog.field_def(field)?.ftype {
        FieldType::Vector(d) => d,
        other => {
            return Err(sem(format!(
                "a vector index needs a vector field; '{}' is {}",
                ddl.field,
                other.name()
            )))
        }
    };
    let mut metric = Metric::Cosine;
    let mut m = 16u32;
    let mut ef_construction = 200u32;
    let mut payload = Vec::new();
    for (key, expr) in &ddl.options {
        match key.to_ascii_lowercase().as_str() {
            "dim" | "dimension" => {
                let n = p.const_int(expr, "dim")?;
                if n != dim as i64 {
                    return Err(sem(format!(
                        "index dim {n} conflicts with field '{}' of type vector({dim})",
                        ddl.field
                    )));
                }
            }
            "metric" => {
                let s = p.const_text(expr, "metric")?;
                metric = match s.to_ascii_lowercase().as_str() {
                    "euclidean" | "l2" => Metric::Euclidean,
                    "cosine" => Metric::Cosine,
                    "dot" | "ip" => Metric::Dot,
                    other => return Err(sem(format!("unknown metric '{other}'"))),
                };
            }
            "m" => m = p.const_int(expr, "m")? as u32,
            "ef_construction" => ef_construction = p.const_int(expr, "ef_construction")? as u32,
            "payload" => {
                let Expr::Array(items) = expr else {
                    return Err(sem("payload option takes an array of field names"));
                };
                for item in items {
                    let fname = p.const_text(item, "payload field")?;
                    payload.push(state.catalog.field_id(&fname)?);
                }
            }
            other => return Err(sem(format!("unknown index option '{other}'"))),
        }
    }
    let display = format!(
        "CreateVectorIndex [{} ON {}({}), dim={dim}, metric={metric:?}, m={m}, ef_construction={ef_construction}]",
        ddl.name, ddl.label, ddl.field
    );
    Ok(PlannedDdl {
        name: ddl.name.clone(),
        label,
        field,
        metric,
        m,
        ef_construction,
        payload,
        display,
    })
}

struct Planner<'a> {
    state: &'a State,
    params: &'a Params,
    schema: Vec<String>,
    col_labels: Vec<Option<LabelId>>,
    binds: HashMap<String, Bind>,
    nodes: Vec<PlanNode>,
    has_source: bool,
    anon: usize,
}

impl<'a> Planner<'a> {
    fn new(state: &'a State, params: &'a Params) -> Planner<'a> {
        Planner {
            state,
            params,
            schema: Vec::new(),
            col_labels: Vec::new(),
            binds: HashMap::new(),
            nodes: Vec::new(),
            has_source: false,
            anon: 0,
        }
    }

    // ----- columns --------------------------------------------------------

    fn add_col(&mut self, name: String, kind: BindKind, label: Option<LabelId>) -> usize {
        let col = self.schema.len();
        // Anonymous columns ('#'-prefixed, not expressible as identifiers)
        // stay out of the bind table.
        if !name.starts_with('#') {
            self.binds.insert(name.clone(), Bind { col, kind });
        }
        self.schema.push(name);
        self.col_labels.push(label);
        col
    }

    fn anon_name(&mut self) -> String {
        let n = self.anon;
        self.anon += 1;
        format!("#{n}")
    }

    // ----- labels and fields ------------------------------------------------

    fn vertex_label(&self, name: &str) -> Result<LabelId> {
        let id = self.state.catalog.label_id(name)?;
        match self.state.catalog.label_def(id)?.kind {
            crate::catalog::LabelKind::Vertex => Ok(id),
            crate::catalog::LabelKind::Edge => Err(sem(format!(
                "'{name}' is an edge label; a vertex label is needed here"
            ))),
        }
    }

    fn edge_label(&self, name: &str) -> Result<LabelId> {
        let id = self.state.catalog.label_id(name)?;
        match self.state.catalog.label_def(id)?.kind {
            crate::catalog::LabelKind::Edge => Ok(id),
            crate::catalog::LabelKind::Vertex => Err(sem(format!(
                "'{name}' is a vertex label; an edge label is needed here"
            ))),
        }
    }

    // ----- patterns --------------------------------------------------------

    fn compile_matches(
        &mut self,
        matches: &[MatchClause],
        where_clause: &Option<Expr>,
    ) -> Result<()> {
        for m in matches {
            for pat in &m.patterns {
                self.compile_pattern(pat)?;
            }
        }
        if let Some(w) = where_clause {
            let pred = self.resolve(w)?;
            self.nodes.push(PlanNode::Filter { pred });
        }
        Ok(())
    }

    fn compile_pattern(&mut self, pat: &Pattern) -> Result<()> {
        let mut cur = self.start_node(&pat.start)?;
        for (edge, node) in &pat.steps {
            cur = self.step(cur, edge, node)?;
        }
        Ok(())
    }

    fn start_node(&mut self, n: &NodePat) -> Result<usize> {
        let label = match &n.label {
            Some(name) => Some((self.vertex_label(name)?, name.clone())),
            None => None,
        };
        let col = match &n.var {
            Some(var) if self.binds.contains_key(var) => {
                let bind = self.binds[var];
                if bind.kind == BindKind::Edge {
                    return Err(sem(format!(
                        "'{var}' is bound to an edge and cannot appear as a vertex"
                    )));
                }
                if let Some((id, name)) = &label {
                    let pred = PExpr::LabelIs {
                        col: bind.col,
                        cname: var.clone(),
                        label: *id,
                        lname: name.clone(),
                    };
                    self.nodes.push(PlanNode::Filter { pred });
                }
                bind.col
            }
            _ => {
                let name = match &n.var {
                    Some(v) => v.clone(),
                    None => self.anon_name(),
                };
                let cross = self.has_source;
                let col = self.add_col(name.clone(), BindKind::Vertex, label.as_ref().map(|(id, _)| *id));
                self.nodes.push(PlanNode::VertexScan {
                    var: col,
                    var_name: name,
                    label: label.as_ref().map(|(id, _)| *id),
                    label_name: label.as_ref().map(|(_, n)| n.clone()),
                    cross,
                });
                self.has_source = true;
                col
            }
        };
        self.prop_filters(col, &n.props)?;
        Ok(col)
    }

    fn step(&mut self, from: usize, edge: &EdgePat, node: &NodePat) -> Result<usize> {
        let edge_label = match &edge.label {
            Some(name) => Some((self.edge_label(name)?, name.clone())),
            None => None,
        };
        let to_label = match &node.label {
            Some(name) => Some((self.vertex_label(name)?, name.clone())),
            None => None,
        };
        let dir = match edge.dir {
            PatDir::Out => Direction::Out,
            PatDir::In => Direction::In,
        };
        let from_name = self.schema[from].clone();

        // Target column: joined when the variable is already bound.
        let (to, to_name, to_bound) = match &node.var {
            Some(var) if self.binds.contains_key(var) => {
                let bind = self.binds[var];
                if bind.kind == BindKind::Edge {
                    return Err(sem(format!(
                        "'{var}' is bound to an edge and cannot appear as a vertex"
                    )));
                }
                (bind.col, var.clone(), true)
            }
            _ => {
                let name = match &node.var {
                    Some(v) => v.clone(),
                    None => self.anon_name(),
                };
                let col = self.add_col(
                    name.clone(),
                    BindKind::Vertex,
                    to_label.as_ref().map(|(id, _)| *id),
                );
                (col, name, false)
            }
        };

        if let Some((min, max)) = edge.hops {
            // Edge variables on variable-length patterns are accepted but
            // never bound; a path has no single edge to bind.
            if !edge.props.is_empty() {
                return Err(sem(
                    "variable-length edges cannot carry property filters",
                ));
            }
            self.nodes.push(PlanNode::VarLengthExpand {
                from,
                from_name,
                to,
                to_name,
                to_bound,
                label: edge_label.as_ref().map(|(id, _)| *id),
                label_name: edge_label.as_ref().map(|(_, n)| n.clone()),
                dir,
                min,
                max,
                to_label: to_label.clone(),
            });
        } else {
            let edge_col = match &edge.var {
                Some(var) => {
                    if self.binds.contains_key(var) {
                        return Err(sem(format!("'{var}' is already bound")));
                    }
                    Some((self.add_col(var.clone(), BindKind::Edge, None), var.clone()))
                }
                None if !edge.props.is_empty() => {
                    let name = self.anon_name();
                    Some((self.add_col(name.clone(), BindKind::Edge, None), name))
                }
                None => None,
            };
            self.nodes.push(PlanNode::Expand {
                from,
                from_name,
                edge: edge_col.as_ref().map(|(c, _)| *c),
                edge_name: edge_col.as_ref().map(|(_, n)| n.clone()),
                to,
                to_name,
                to_bound,
                label: edge_label.as_ref().map(|(id, _)| *id),
                label_name: edge_label.as_ref().map(|(_, n)| n.clone()),
                dir,
                to_label: to_label.clone(),
            });
            if let Some((ecol, ename)) = &edge_col {
                for (k, e) in &edge.props {
                    let field = self.state.catalog.field_id(k)?;
                    let pred = PExpr::Cmp(
                        CmpCode::Eq,
                        Box::new(PExpr::Prop {
                            col: *ecol,
                            cname: ename.clone(),
                            field,
                            fname: k.clone(),
                        }),
                        Box::new(self.resolve(e)?),
                    );
                    self.nodes.push(PlanNode::Filter { pred });
                }
            }
        }
        self.prop_filters(to, &node.props)?;
        Ok(to)
    }

    fn prop_filters(&mut self, col: usize, props: &[(String, Expr)]) -> Result<()> {
        for (k, e) in props {
            let field = self.state.catalog.field_id(k)?;
            let pred = PExpr::Cmp(
                CmpCode::Eq,
                Box::new(PExpr::Prop {
                    col,
                    cname: self.schema[col].clone(),
                    field,
                    fname: k.clone(),
                }),
                Box::new(self.resolve(e)?),
            );
            self.nodes.push(PlanNode::Filter { pred });
        }
        Ok(())
    }

    // ----- CREATE slots -----------------------------------------------------

    fn create_slot(
        &mut self,
        n: &NodePat,
        created: &mut HashMap<String, usize>,
        slots: &mut usize,
    ) -> Result<NodeSlot> {
        if let Some(var) = &n.var {
            if let Some(bind) = self.binds.get(var) {
                if bind.kind == BindKind::Edge {
                    return Err(sem(format!(
                        "'{var}' is bound to an edge and cannot appear as a vertex"
                    )));
                }
                if n.label.is_some() || !n.props.is_empty() {
                    return Err(sem(format!(
                        "'{var}' is already bound; a reused variable cannot take a label or properties"
                    )));
                }
                return Ok(NodeSlot::Row(bind.col));
            }
            if let Some(slot) = created.get(var) {
                if n.label.is_some() || !n.props.is_empty() {
                    return Err(sem(format!(
                        "'{var}' is already created; a reused variable cannot take a label or properties"
                    )));
                }
                return Ok(NodeSlot::Created(*slot));
            }
        }
        let label_name = n
            .label
            .clone()
            .ok_or_else(|| sem("a created vertex needs a label"))?;
        let label = self.vertex_label(&label_name)?;
        let mut props = Vec::new();
        for (k, e) in &n.props {
            props.push((self.state.catalog.field_id(k)?, self.resolve(e)?));
        }
        let slot = *slots;
        *slots += 1;
        if let Some(var) = &n.var {
            created.insert(var.clone(), slot);
        }
        Ok(NodeSlot::New {
            label,
            label_name,
            props,
            slot,
        })
    }

    // ----- CALL -------------------------------------------------------------

    fn compile_call_source(&mut self, c: &CallStmt) -> Result<()> {
        let (proc, display, cols): (ProcKind, String, Vec<(&str, BindKind)>) =
            match c.proc.as_str() {
                "pagerank" => {
                    let (damping, max_iter, tol) = match c.args.len() {
                        0 => (0.85, 50, 1e-8),
                        3 => (
                            self.const_float(&c.args[0], "damping")?,
                            self.const_int(&c.args[1], "max_iter")?.max(0) as u64,
                            self.const_float(&c.args[2], "tol")?,
                        ),
                        _ => {
                            return Err(sem(
                                "pagerank takes no arguments or (damping, max_iter, tol)",
                            ))
                        }
                    };
                    (
                        ProcKind::Pagerank {
                            damping,
                            max_iter,
                            tol,
                        },
                        format!("pagerank(damping={damping}, max_iter={max_iter}, tol={tol})"),
                        vec![("vertex", BindKind::Vertex), ("score", BindKind::Value)],
                    )
                }
                "wcc" => {
                    if !c.args.is_empty() {
                        return Err(sem("wcc takes no arguments"));
                    }
                    (
                        ProcKind::Wcc,
                        "wcc()".to_string(),
                        vec![("vertex", BindKind::Vertex), ("component", BindKind::Value)],
                    )
                }
                "vector.search" => {
                    if c.args.len() != 3 {
                        return Err(sem("vector.search takes (collection, query, k)"));
                    }
                    let collection = self.const_text(&c.args[0], "collection")?;
                    let query = self.const_vector(&c.args[1], "query")?;
                    let k = self.const_int(&c.args[2], "k")?;
                    if k < 1 {
                        return Err(sem("k must be at least 1"));
                    }
                    let col = self.state.vectors.get(&collection)?;
                    if col.dimension() != query.len() {
                        return Err(sem(format!(
                            "collection '{collection}' holds {}-dimensional vectors, query has {}",
                            col.dimension(),
                            query.len()
                        )));
                    }
                    (
                        ProcKind::VectorSearch {
                            collection: collection.clone(),
                            query,
                            k: k as usize,
                        },
                        format!("vector.search({collection}, <query>, {k})"),
                        vec![("vertex", BindKind::Vertex), ("score", BindKind::Value)],
                    )
                }
                "writeback" => {
                    if c.args.len() < 2 {
                        return Err(sem(
                            "writeback takes (procedure, field) plus procedure arguments",
                        ));
                    }
                    let proc_name = self.const_text(&c.args[0], "procedure")?;
                    let field_name = self.const_text(&c.args[1], "field")?;
                    let field = self.state.catalog.field_id(&field_name)?;
                    let ftype = self.state.catalog.field_def(field)?.ftype;
                    let (damping, max_iter, tol) = match (proc_name.as_str(), c.args.len()) {
                        ("pagerank", 2) => (0.85, 50, 1e-8),
                        ("pagerank", 5) => (
                            self.const_float(&c.args[2], "damping")?,
                            self.const_int(&c.args[3], "max_iter")?.max(0) as u64,
                            self.const_float(&c.args[4], "tol")?,
                        ),
                        ("wcc", 2) => (0.0, 0, 0.0),
                        ("pagerank", _) => {
                            return Err(sem(
                                "writeback('pagerank', field) optionally takes (damping, max_iter, tol)",
                            ))
                        }
                        ("wcc", _) => return Err(sem("writeback('wcc', field) takes no extras")),
                        (other, _) => {
                            return Err(sem(format!("unknown procedure '{other}' for writeback")))
                        }
                    };
                    let want = match proc_name.as_str() {
                        "pagerank" => FieldType::Float,
                        _ => FieldType::Int,
                    };
                    if ftype != want {
                        return Err(sem(format!(
                            "writeback of {proc_name} needs a {} field; '{field_name}' is {}",
                            want.name(),
                            ftype.name()
                        )));
                    }
                    (
                        ProcKind::Writeback {
                            proc: proc_name.clone(),
                            field,
                            field_name: field_name.clone(),
                            damping,
                            max_iter,
                            tol,
                        },
                        format!("writeback({proc_name} -> {field_name})"),
                        vec![("updated", BindKind::Value)],
                    )
                }
                other => return Err(sem(format!("unknown procedure '{other}'"))),
            };
        let yields: Vec<String> = cols.iter().map(|(n, _)| n.to_string()).collect();
        for (name, kind) in cols {
            self.add_col(name.to_string(), kind, None);
        }
        self.nodes.push(PlanNode::Call {
            call: PlannedCall {
                proc,
                display,
                yields,
            },
        });
        self.has_source = true;
        Ok(())
    }

    fn apply_yields(&mut self, yields: &[String]) -> Result<()> {
        let mut items = Vec::new();
        let mut new_schema = Vec::new();
        let mut new_labels = Vec::new();
        let mut new_binds = HashMap::new();
        for (i, y) in yields.iter().enumerate() {
            let bind = self
                .binds
                .get(y)
                .copied()
                .ok_or_else(|| sem(format!("unknown yield column '{y}'")))?;
            if new_binds.contains_key(y) {
                return Err(sem(format!("duplicate yield column '{y}'")));
            }
            items.push((
                PExpr::Col {
                    idx: bind.col,
                    name: y.clone(),
                },
                y.clone(),
            ));
            new_schema.push(y.clone());
            new_labels.push(self.col_labels[bind.col]);
            new_binds.insert(y.clone(), Bind { col: i, kind: bind.kind });
        }
        if new_schema == self.schema {
            return Ok(());
        }
        self.nodes.push(PlanNode::Project { items });
        self.schema = new_schema;
        self.col_labels = new_labels;
        self.binds = new_binds;
        Ok(())
    }

    // ----- RETURN -------------------------------------------------------------

    fn plan_return(mut self, ret: &ReturnClause) -> Result<Plan> {
        let counts = ret
            .items
            .iter()
            .filter(|(e, _)| matches!(e, Expr::Count(_)))
            .count();
        if counts > 0 {
            if ret.items.len() > 1 {
                return Err(sem("count() cannot be combined with other return items"));
            }
            if !ret.order.is_empty() {
                return Err(sem("ORDER BY cannot be used with count()"));
            }
            let (item, alias) = &ret.items[0];
            let Expr::Count(inner) = item else {
                unreachable!("checked above")
            };
            let expr = match inner {
                Some(b) => Some(self.resolve(b)?),
                None => None,
            };
            let name = alias.clone().unwrap_or_else(|| match &expr {
                None => "count(*)".to_string(),
                Some(p) => format!("count({p})"),
            });
            self.nodes.push(PlanNode::Count {
                expr,
                name: name.clone(),
            });
            if let Some(n) = ret.limit {
                self.nodes.push(PlanNode::Limit { n });
            }
            return Ok(Plan {
                nodes: self.nodes,
                schema: self.schema,
                columns: vec![name],
            });
        }

        let mut keys = Vec::new();
        for (e, asc) in &ret.order {
            keys.push((self.resolve(e)?, *asc));
        }
        let mut items = Vec::new();
        for (e, alias) in &ret.items {
            let p = self.resolve(e)?;
            let name = alias.clone().unwrap_or_else(|| format!("{p}"));
            items.push((p, name));
        }
        if !keys.is_empty() {
            self.nodes.push(PlanNode::OrderBy { keys });
        }
        if let Some(n) = ret.limit {
            self.nodes.push(PlanNode::Limit { n });
        }
        let columns: Vec<String> = items.iter().map(|(_, n)| n.clone()).collect();
        self.nodes.push(PlanNode::Project { items });
        Ok(Plan {
            nodes: self.nodes,
            schema: self.schema,
            columns,
        })
    }

    // ----- expressions ----------------------------------------------------------

    fn resolve(&self, e: &Expr) -> Result<PExpr> {
        match e {
            Expr::Literal(v) => Ok(PExpr::Const(v.clone())),
            Expr::Param(name) => {
                if !self.params.contains_key(name) {
                    return Err(sem(format!("missing parameter ${name}")));
                }
                Ok(PExpr::Param(name.clone()))
            }
            Expr::Array(items) => {
                let mut out = Vec::new();
                for it in items {
                    out.push(self.resolve(it)?);
                }
                Ok(PExpr::Array(out))
            }
            Expr::Var(name) => {
                let bind = self
                    .binds
                    .get(name)
                    .ok_or_else(|| sem(format!("unknown variable '{name}'")))?;
                Ok(PExpr::Col {
                    idx: bind.col,
                    name: name.clone(),
                })
            }
            Expr::Prop(var, fname) => {
                let bind = self
                    .binds
                    .get(var)
                    .ok_or_else(|| sem(format!("unknown variable '{var}'")))?;
                let field = self.state.catalog.field_id(fname)?;
                Ok(PExpr::Prop {
                    col: bind.col,
                    cname: var.clone(),
                    field,
                    fname: fname.clone(),
                })
            }
            Expr::Cmp(op, a, b) => {
                let code = match op {
                    CmpOp::Eq => CmpCode::Eq,
                    CmpOp::Ne => CmpCode::Ne,
                    CmpOp::Lt => CmpCode::Lt,
                    CmpOp::Le => CmpCode::Le,
                    CmpOp::Gt => CmpCode::Gt,
                    CmpOp::Ge => CmpCode::Ge,
                };
                Ok(PExpr::Cmp(
                    code,
                    Box::new(self.resolve(a)?),
                    Box::new(self.resolve(b)?),
                ))
            }
            Expr::And(a, b) => Ok(PExpr::And(
                Box::new(self.resolve(a)?),
                Box::new(self.resolve(b)?),
            )),
            Expr::Or(a, b) => Ok(PExpr::Or(
                Box::new(self.resolve(a)?),
                Box::new(self.resolve(b)?),
            )),
            Expr::Not(a) => Ok(PExpr::Not(Box::new(self.resolve(a)?))),
            Expr::Fun(name, args) => match name.as_str() {
                "vector_distance" | "similarity" => {
                    if args.len() != 2 {
                        return Err(sem(format!("{name} takes two arguments")));
                    }
                    let a = self.resolve(&args[0])?;
                    let b = self.resolve(&args[1])?;
                    self.check_vector_dims(&a, &b, name)?;
                    let default = if name == "similarity" {
                        Metric::Cosine
                    } else {
                        Metric::Euclidean
                    };
                    let metric = self
                        .indexed_metric(&a)
                        .or_else(|| self.indexed_metric(&b))
                        .unwrap_or(default);
                    if name == "similarity" {
                        Ok(PExpr::Similarity(Box::new(a), Box::new(b), metric))
                    } else {
                        Ok(PExpr::VectorDistance(Box::new(a), Box::new(b), metric))
                    }
                }
                "norm" => {
                    if args.len() != 1 {
                        return Err(sem("norm takes one argument"));
                    }
                    Ok(PExpr::Norm(Box::new(self.resolve(&args[0])?)))
                }
                other => Err(sem(format!("unknown function '{other}'"))),
            },
            Expr::Count(_) => Err(sem("count() is only allowed as a RETURN item")),
        }
    }

    /// Metric of the vector index backing a property reference, if any.
    fn indexed_metric(&self, e: &PExpr) -> Option<Metric> {
        if let PExpr::Prop { col, field, .. } = e {
            if let Some(label) = self.col_labels.get(*col).copied().flatten() {
                return self
                    .state
                    .catalog
                    .vector_index_for(label, *field)
                    .map(|d| d.metric);
            }
        }
        None
    }

    /// Declared dimension of a vector expression, where statically known.
    fn vector_len(&self, e: &PExpr) -> Option<usize> {
        match e {
            PExpr::Const(PropertyValue::Vector(v)) => Some(v.len()),
            PExpr::Array(items) => Some(items.len()),
            PExpr::Param(name) => match self.params.get(name) {
                Some(PropertyValue::Vector(v)) => Some(v.len()),
                _ => None,
            },
            PExpr::Prop { field, .. } => match self.state.catalog.field_def(*field) {
                Ok(def) => match def.ftype {
                    FieldType::Vector(d) => Some(d as usize),
                    _ => None,
                },
                Err(_) => None,
            },
            _ => None,
        }
    }

    fn check_vector_dims(&self, a: &PExpr, b: &PExpr, what: &str) -> Result<()> {
        if let (Some(la), Some(lb)) = (self.vector_len(a), self.vector_len(b)) {
            if la != lb {
                return Err(sem(format!(
                    "{what}({a}, {b}) mixes dimensions {la} and {lb}"
                )));
            }
        }
        Ok(())
    }

    // ----- constants ------------------------------------------------------------

    fn const_value(&self, e: &Expr, what: &str) -> Result<PropertyValue> {
        match e {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Param(name) => self
                .params
                .get(name)
                .cloned()
                .ok_or_else(|| sem(format!("missing parameter ${name}"))),
            Expr::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    match self.const_value(it, what)? {
                        PropertyValue::Int(i) => out.push(i as f32),
                        PropertyValue::Float(f) => out.push(f as f32),
                        other => {
                            return Err(sem(format!(
                                "{what}: array elements must be numbers, got {}",
                                other.type_name()
                            )))
                        }
                    }
                }
                Ok(PropertyValue::Vector(out))
            }
            _ => Err(sem(format!("{what} must be a literal or parameter"))),
        }
    }

    fn const_text(&self, e: &Expr, what: &str) -> Result<String> {
        match self.const_value(e, what)? {
            PropertyValue::Text(s) => Ok(s),
            other => Err(sem(format!(
                "{what} must be a string, got {}",
                other.type_name()
            ))),
        }
    }

    fn const_int(&self, e: &Expr, what: &str) -> Result<i64> {
        match self.const_value(e, what)? {
            PropertyValue::Int(i) => Ok(i),
            other => Err(sem(format!(
                "{what} must be an integer, got {}",
                other.type_name()
            ))),
        }
    }

    fn const_float(&self, e: &Expr, what: &str) -> Result<f64> {
        match self.const_value(e, what)? {
            PropertyValue::Float(f) => Ok(f),
            PropertyValue::Int(i) => Ok(i as f64),
            other => Err(sem(format!(
                "{what} must be a number, got {}",
                other.type_name()
            ))),
        }
    }

    fn const_vector(&self, e: &Expr, what: &str) -> Result<Vec<f32>> {
        match self.const_value(e, what)? {
            PropertyValue::Vector(v) => Ok(v),
            other => Err(sem(format!(
                "{what} must be a vector, got {}",
                other.type_name()
            ))),
        }
    }
}

/// Splits a predicate into conjuncts absorbable by a vector index probe on
/// `var`: comparisons between a payload-indexed field of `var` and a
/// constant. Returns None when any conjunct does not qualify.
pub fn absorb_filter(
    pred: &PExpr,
    var: usize,
    payload_fields: &[FieldId],
    out: &mut Vec<AbsorbedPred>,
) -> bool {
    match pred {
        PExpr::And(a, b) => {
            absorb_filter(a, var, payload_fields, out)
                && absorb_filter(b, var, payload_fields, out)
        }
        PExpr::Cmp(op, a, b) => {
            let (prop, value, op) = match (&**a, &**b) {
                (PExpr::Prop { col, field, fname, .. }, v) if *col == var && is_const(v) => {
                    ((*field, fname.clone()), v.clone(), *op)
                }
                (v, PExpr::Prop { col, field, fname, .. }) if *col == var && is_const(v) => {
                    ((*field, fname.clone()), v.clone(), op.flip())
                }
                _ => return false,
            };
            if op == CmpCode::Ne {
                return false;
            }
            if !payload_fields.contains(&prop.0) {
                return false;
            }
            out.push(AbsorbedPred {
                field: prop.0,
                fname: prop.1,
                op,
                value,
            });
            true
        }
        _ => false,
    }
}

fn is_const(e: &PExpr) -> bool {
    matches!(
        e,
        PExpr::Const(PropertyValue::Bool(_))
            | PExpr::Const(PropertyValue::Int(_))
            | PExpr::Const(PropertyValue::Float(_))
            | PExpr::Const(PropertyValue::Text(_))
            | PExpr::Param(_)
    )
}
