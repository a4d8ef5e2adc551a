//! Push-based executor. A source operator produces row batches and pushes
//! them through the downstream chain; blocking operators (OrderBy, Count)
//! buffer and flush on finish. A saturated Limit stops the source, which is
//! the short-circuit observable in operator row counters.

use std::fmt;
use std::sync::Arc;

use crate::analytics::{self, TopologySnapshot};
use crate::engine::State;
use crate::error::{EngineError, Result};
use crate::query::plan::{AbsorbedPred, CmpCode, PExpr, Plan, PlanNode, ProcKind};
use crate::query::planner::Params;
use crate::value::{self, Direction, EdgeKey, EdgeRef, LabelId, Owner, PropertyValue, VertexId};
use crate::vector::distance;
use crate::vector::filter::{Edge as RangeEdge, PayloadFilter, RangePred};

/// One slot of a working row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Vertex(VertexId),
    Edge(EdgeRef),
    Val(PropertyValue),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Vertex(v) => write!(f, "{v}"),
            Cell::Edge(e) => write!(f, "{e}"),
            Cell::Val(v) => write!(f, "{v}"),
        }
    }
}

pub type Row = Vec<Cell>;

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub batch_size: usize,
    pub workers: usize,
    /// Overrides the default candidate-list width for vector probes.
    pub ef_search: Option<usize>,
    pub optimize: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            batch_size: 1024,
            workers: 1,
            ef_search: None,
            optimize: true,
        }
    }
}

/// Rows emitted per operator, in plan order, plus source batch count.
#[derive(Debug, Clone, Default)]
pub struct ExecStats {
    pub operator_rows: Vec<(String, u64)>,
    pub batches: u64,
}

pub(crate) struct ExecCtx<'a> {
    pub state: &'a State,
    pub params: &'a Params,
    pub ef_search: usize,
}

// ----- evaluation -----------------------------------------------------------

fn put(row: &mut Row, idx: usize, cell: Cell) {
    if row.len() <= idx {
        row.resize(idx + 1, Cell::Val(PropertyValue::Null));
    }
    row[idx] = cell;
}

fn cmp_holds(op: CmpCode, ord: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        CmpCode::Eq => ord == Equal,
        CmpCode::Ne => ord != Equal,
        CmpCode::Lt => ord == Less,
        CmpCode::Le => ord != Greater,
        CmpCode::Gt => ord == Greater,
        CmpCode::Ge => ord != Less,
    }
}

/// Comparison under query semantics: incomparable kinds yield None, which
/// a predicate treats as unknown.
pub(crate) fn cell_compare(a: &Cell, b: &Cell) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (Cell::Vertex(x), Cell::Vertex(y)) => Some(x.cmp(y)),
        (Cell::Edge(x), Cell::Edge(y)) => Some(x.cmp(y)),
        (Cell::Val(x), Cell::Val(y)) => value::compare(x, y),
        _ => None,
    }
}

/// Total order for ORDER BY: kinds first, then within-kind order, values
/// by their deterministic total order. Keeps sorting stable across runs.
pub(crate) fn total_cell_cmp(a: &Cell, b: &Cell) -> std::cmp::Ordering {
    fn rank(c: &Cell) -> u8 {
        match c {
            Cell::Vertex(_) => 0,
            Cell::Edge(_) => 1,
            Cell::Val(_) => 2,
        }
    }
    match (a, b) {
        (Cell::Vertex(x), Cell::Vertex(y)) => x.cmp(y),
        (Cell::Edge(x), Cell::Edge(y)) => x.cmp(y),
        (Cell::Val(x), Cell::Val(y)) => x.total_cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn truth(c: &Cell) -> Option<bool> {
    match c {
        Cell::Val(PropertyValue::Bool(b)) => Some(*b),
        _ => None,
    }
}

fn as_vector(c: Cell, what: &str) -> Result<Option<Vec<f32>>> {
    match c {
        Cell::Val(PropertyValue::Vector(v)) => Ok(Some(v)),
        Cell::Val(PropertyValue::Null) => Ok(None),
        other => Err(EngineError::Runtime(format!(
            "{what} needs a vector, got {other}"
        ))),
    }
}

pub(crate) fn eval_cell(e: &PExpr, row: &Row, ctx: &ExecCtx<'_>) -> Result<Cell> {
    match e {
        PExpr::Const(v) => Ok(Cell::Val(v.clone())),
        PExpr::Param(name) => ctx
            .params
            .get(name)
            .cloned()
            .map(Cell::Val)
            .ok_or_else(|| EngineError::Runtime(format!("missing parameter ${name}"))),
        PExpr::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for it in items {
                match eval_cell(it, row, ctx)? {
                    Cell::Val(PropertyValue::Int(i)) => out.push(i as f32),
                    Cell::Val(PropertyValue::Float(f)) => out.push(f as f32),
                    Cell::Val(PropertyValue::Null) => return Ok(Cell::Val(PropertyValue::Null)),
                    other => {
                        return Err(EngineError::Runtime(format!(
                            "array elements must be numbers, got {other}"
                        )))
                    }
                }
            }
            Ok(Cell::Val(PropertyValue::Vector(out)))
        }
        PExpr::Col { idx, .. } => Ok(row
            .get(*idx)
            .cloned()
            .unwrap_or(Cell::Val(PropertyValue::Null))),
        PExpr::Prop { col, field, .. } => {
            let owner = match row.get(*col) {
                Some(Cell::Vertex(v)) => Owner::Vertex(*v),
                Some(Cell::Edge(e)) => Owner::Edge(*e),
                _ => return Ok(Cell::Val(PropertyValue::Null)),
            };
            Ok(Cell::Val(
                ctx.state
                    .attribute(owner, *field)
                    .unwrap_or(PropertyValue::Null),
            ))
        }
        PExpr::Cmp(op, a, b) => {
            let a = eval_cell(a, row, ctx)?;
            let b = eval_cell(b, row, ctx)?;
            Ok(Cell::Val(match cell_compare(&a, &b) {
                Some(ord) => PropertyValue::Bool(cmp_holds(*op, ord)),
                None => PropertyValue::Null,
            }))
        }
        PExpr::LabelIs { col, label, .. } => match row.get(*col) {
            Some(Cell::Vertex(v)) => Ok(Cell::Val(PropertyValue::Bool(v.label == *label))),
            _ => Ok(Cell::Val(PropertyValue::Null)),
        },
        PExpr::And(a, b) => {
            let x = truth(&eval_cell(a, row, ctx)?);
            let y = truth(&eval_cell(b, row, ctx)?);
            Ok(Cell::Val(match (x, y) {
                (Some(false), _) | (_, Some(false)) => PropertyValue::Bool(false),
                (Some(true), Some(true)) => PropertyValue::Bool(true),
                _ => PropertyValue::Null,
            }))
        }
        PExpr::Or(a, b) => {
            let x = truth(&eval_cell(a, row, ctx)?);
            let y = truth(&eval_cell(b, row, ctx)?);
            Ok(Cell::Val(match (x, y) {
                (Some(true), _) | (_, Some(true)) => PropertyValue::Bool(true),
                (Some(false), Some(false)) => PropertyValue::Bool(false),
                _ => PropertyValue::Null,
            }))
        }
        PExpr::Not(a) => Ok(Cell::Val(match truth(&eval_cell(a, row, ctx)?) {
            Some(b) => PropertyValue::Bool(!b),
            None => PropertyValue::Null,
        })),
        PExpr::VectorDistance(a, b, m) | PExpr::Similarity(a, b, m) => {
            let scoring = matches!(e, PExpr::Similarity(..));
            let x = as_vector(eval_cell(a, row, ctx)?, "vector function")?;
            let y = as_vector(eval_cell(b, row, ctx)?, "vector function")?;
            let (Some(x), Some(y)) = (x, y) else {
                return Ok(Cell::Val(PropertyValue::Null));
            };
            if x.len() != y.len() {
                return Err(EngineError::Runtime(format!(
                    "vector dimensions differ: {} vs {}",
                    x.len(),
                    y.len()
                )));
            }
            let v = if scoring {
                distance::score(*m, &x, &y)
            } else {
                distance::distance(*m, &x, &y)
            };
            Ok(Cell::Val(PropertyValue::Float(v as f64)))
        }
        PExpr::Norm(a) => match as_vector(eval_cell(a, row, ctx)?, "norm")? {
            Some(v) => Ok(Cell::Val(PropertyValue::Float(distance::norm(&v) as f64))),
            None => Ok(Cell::Val(PropertyValue::Null)),
        },
    }
}

fn eval_pred(e: &PExpr, row: &Row, ctx: &ExecCtx<'_>) -> Result<bool> {
    Ok(truth(&eval_cell(e, row, ctx)?).unwrap_or(false))
}

// ----- operators ------------------------------------------------------------

#[derive(Clone)]
enum OpState {
    Rescan {
        var: usize,
        verts: Arc<Vec<VertexId>>,
    },
    Expand {
        from: usize,
        edge: Option<usize>,
        to: usize,
        to_bound: bool,
        label: Option<LabelId>,
        dir: Direction,
        to_label: Option<LabelId>,
    },
    VarLength {
        from: usize,
        to: usize,
        to_bound: bool,
        label: Option<LabelId>,
        dir: Direction,
        min: u32,
        max: u32,
        to_label: Option<LabelId>,
    },
    Filter {
        pred: PExpr,
    },
    Project {
        items: Vec<PExpr>,
    },
    OrderBy {
        keys: Vec<(PExpr, bool)>,
        buffer: Vec<Row>,
    },
    Limit {
        remaining: u64,
    },
    Count {
        expr: Option<PExpr>,
        seen: u64,
    },
}

impl OpState {
    fn stateless(&self) -> bool {
        matches!(
            self,
            OpState::Rescan { .. }
                | OpState::Expand { .. }
                | OpState::VarLength { .. }
                | OpState::Filter { .. }
                | OpState::Project { .. }
        )
    }

    /// Transform one batch; returns true when a limit just saturated.
    fn process(&mut self, ctx: &ExecCtx<'_>, rows: Vec<Row>, out: &mut Vec<Row>) -> Result<bool> {
        match self {
            OpState::Rescan { var, verts } => {
                for row in rows {
                    for &v in verts.iter() {
                        let mut r = row.clone();
                        put(&mut r, *var, Cell::Vertex(v));
                        out.push(r);
                    }
                }
                Ok(false)
            }
            OpState::Expand {
                from,
                edge,
                to,
                to_bound,
                label,
                dir,
                to_label,
            } => {
                for row in rows {
                    let Some(Cell::Vertex(v)) = row.get(*from).cloned() else {
                        continue;
                    };
                    let iter = ctx
                        .state
                        .topo
                        .neighbors(v, *dir, *label)
                        .expect("row vertices are live under the read guard");
                    for key in iter {
                        let target = key.neighbor;
                        if let Some(l) = to_label {
                            if target.label != *l {
                                continue;
                            }
                        }
                        if *to_bound && row.get(*to) != Some(&Cell::Vertex(target)) {
                            continue;
                        }
                        let eref = match dir {
                            Direction::Out => EdgeRef { src: v, key: *key },
                            Direction::In => EdgeRef {
                                src: key.neighbor,
                                key: EdgeKey::new(key.edge_label, v, key.edge_id),
                            },
                        };
                        let mut r = row.clone();
                        if !*to_bound {
                            put(&mut r, *to, Cell::Vertex(target));
                        }
                        if let Some(ecol) = edge {
                            put(&mut r, *ecol, Cell::Edge(eref));
                        }
                        out.push(r);
                    }
                }
                Ok(false)
            }
            OpState::VarLength {
                from,
                to,
                to_bound,
                label,
                dir,
                min,
                max,
                to_label,
            } => {
                for row in rows {
                    let Some(Cell::Vertex(v)) = row.get(*from).cloned() else {
                        continue;
                    };
                    let mut ends = Vec::new();
                    walk(ctx.state, v, 0, *min, *max, *label, *dir, &mut ends);
                    for target in ends {
                        if let Some(l) = to_label {
                            if target.label != *l {
                                continue;
                            }
                        }
                        if *to_bound {
                            if row.get(*to) == Some(&Cell::Vertex(target)) {
                                out.push(row.clone());
                            }
                            continue;
                        }
                        let mut r = row.clone();
                        put(&mut r, *to, Cell::Vertex(target));
                        out.push(r);
                    }
                }
                Ok(false)
            }
            OpState::Filter { pred } => {
                for row in rows {
                    if eval_pred(pred, &row, ctx)? {
                        out.push(row);
                    }
                }
                Ok(false)
            }
            OpState::Project { items } => {
                for row in rows {
                    let mut r = Vec::with_capacity(items.len());
                    for it in items.iter() {
                        r.push(eval_cell(it, &row, ctx)?);
                    }
                    out.push(r);
                }
                Ok(false)
            }
            OpState::OrderBy { buffer, .. } => {
                buffer.extend(rows);
                Ok(false)
            }
            OpState::Limit { remaining } => {
                if *remaining == 0 {
                    return Ok(true);
                }
                let take = (*remaining).min(rows.len() as u64) as usize;
                out.extend(rows.into_iter().take(take));
                *remaining -= take as u64;
                Ok(*remaining == 0)
            }
            OpState::Count { expr, seen } => {
                match expr {
                    None => *seen += rows.len() as u64,
                    Some(e) => {
                        for row in &rows {
                            if !matches!(
                                eval_cell(e, row, ctx)?,
                                Cell::Val(PropertyValue::Null)
                            ) {
                                *seen += 1;
                            }
                        }
                    }
                }
                Ok(false)
            }
        }
    }

    /// Flush buffered state at end of input.
    fn finish(&mut self, ctx: &ExecCtx<'_>) -> Result<Option<Vec<Row>>> {
        match self {
            OpState::OrderBy { keys, buffer } => {
                let rows = std::mem::take(buffer);
                let mut keyed: Vec<(Vec<Cell>, Row)> = Vec::with_capacity(rows.len());
                for row in rows {
                    let mut ks = Vec::with_capacity(keys.len());
                    for (e, _) in keys.iter() {
                        ks.push(eval_cell(e, &row, ctx)?);
                    }
                    keyed.push((ks, row));
                }
                let dirs: Vec<bool> = keys.iter().map(|(_, asc)| *asc).collect();
                keyed.sort_by(|(a, _), (b, _)| {
                    for (i, asc) in dirs.iter().enumerate() {
                        let ord = total_cell_cmp(&a[i], &b[i]);
                        if ord != std::cmp::Ordering::Equal {
                            return if *asc { ord } else { ord.reverse() };
                        }
                    }
                    std::cmp::Ordering::Equal
                });
                Ok(Some(keyed.into_iter().map(|(_, r)| r).collect()))
            }
            OpState::Count { seen, .. } => Ok(Some(vec![vec![Cell::Val(PropertyValue::Int(
                *seen as i64,
            ))]])),
            _ => Ok(None),
        }
    }
}

/// Enumerates walk endpoints: every path of `min..=max` edge steps, with
/// revisits allowed, contributes its end vertex once per path. Bounds are
/// parser-capped at 10, so recursion depth is small.
#[allow(clippy::too_many_arguments)]
fn walk(
    state: &State,
    v: VertexId,
    depth: u32,
    min: u32,
    max: u32,
    label: Option<LabelId>,
    dir: Direction,
    out: &mut Vec<VertexId>,
) {
    if depth >= min {
        out.push(v);
    }
    if depth == max {
        return;
    }
    let iter = state
        .topo
        .neighbors(v, dir, label)
        .expect("row vertices are live under the read guard");
    for key in iter {
        walk(state, key.neighbor, depth + 1, min, max, label, dir, out);
    }
}

// ----- pipeline --------------------------------------------------------------

struct Pipeline<'a, 'b> {
    ops: Vec<OpState>,
    counts: Vec<u64>,
    sink: Vec<Row>,
    done: bool,
    ctx: &'b ExecCtx<'a>,
}

impl<'a, 'b> Pipeline<'a, 'b> {
    fn new(ops: Vec<OpState>, ctx: &'b ExecCtx<'a>) -> Pipeline<'a, 'b> {
        let counts = vec![0; ops.len()];
        Pipeline {
            ops,
            counts,
            sink: Vec::new(),
            done: false,
            ctx,
        }
    }

    fn push(&mut self, rows: Vec<Row>) -> Result<()> {
        self.feed(0, rows)
    }

    fn feed(&mut self, from: usize, mut rows: Vec<Row>) -> Result<()> {
        for i in from..self.ops.len() {
            if rows.is_empty() {
                return Ok(());
            }
            let mut out = Vec::new();
            let saturated = self.ops[i].process(self.ctx, rows, &mut out)?;
            if saturated {
                self.done = true;
            }
            self.counts[i] += out.len() as u64;
            rows = out;
        }
        self.sink.extend(rows);
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        for i in 0..self.ops.len() {
            if let Some(rows) = self.ops[i].finish(self.ctx)? {
                self.counts[i] += rows.len() as u64;
                self.feed(i + 1, rows)?;
            }
        }
        Ok(())
    }
}

// ----- sources ---------------------------------------------------------------

pub(crate) fn op_name(node: &PlanNode) -> String {
    match node {
        PlanNode::VertexScan { cross: true, .. } => "VertexScan(rescan)".into(),
        PlanNode::VertexScan { .. } => "VertexScan".into(),
        PlanNode::VertexVectorScan { .. } => "VertexVectorScan".into(),
        PlanNode::Expand { .. } => "Expand".into(),
        PlanNode::VarLengthExpand { .. } => "VarLengthExpand".into(),
        PlanNode::Filter { .. } => "Filter".into(),
        PlanNode::OrderBy { .. } => "OrderBy".into(),
        PlanNode::Limit { .. } => "Limit".into(),
        PlanNode::Project { .. } => "Project".into(),
        PlanNode::Count { .. } => "Count".into(),
        PlanNode::Call { .. } => "Call".into(),
    }
}

fn build_op(node: &PlanNode, ctx: &ExecCtx<'_>) -> Result<OpState> {
    Ok(match node {
        PlanNode::VertexScan { var, label, .. } => {
            let verts: Vec<VertexId> = match label {
                Some(l) => ctx.state.topo.vertices_of_label(*l).collect(),
                None => ctx.state.topo.all_vertices().collect(),
            };
            OpState::Rescan {
                var: *var,
                verts: Arc::new(verts),
            }
        }
        PlanNode::Expand {
            from,
            edge,
            to,
            to_bound,
            label,
            dir,
            to_label,
            ..
        } => OpState::Expand {
            from: *from,
            edge: *edge,
            to: *to,
            to_bound: *to_bound,
            label: *label,
            dir: *dir,
            to_label: to_label.as_ref().map(|(id, _)| *id),
        },
        PlanNode::VarLengthExpand {
            from,
            to,
            to_bound,
            label,
            dir,
            min,
            max,
            to_label,
            ..
        } => OpState::VarLength {
            from: *from,
            to: *to,
            to_bound: *to_bound,
            label: *label,
            dir: *dir,
            min: *min,
            max: *max,
            to_label: to_label.as_ref().map(|(id, _)| *id),
        },
        PlanNode::Filter { pred } => OpState::Filter { pred: pred.clone() },
        PlanNode::OrderBy { keys } => OpState::OrderBy {
            keys: keys.clone(),
            buffer: Vec::new(),
        },
        PlanNode::Limit { n } => OpState::Limit { remaining: *n },
        PlanNode::Project { items } => OpState::Project {
            items: items.iter().map(|(e, _)| e.clone()).collect(),
        },
        PlanNode::Count { expr, .. } => OpState::Count {
            expr: expr.clone(),
            seen: 0,
        },
        PlanNode::VertexVectorScan { .. } | PlanNode::Call { .. } => {
            return Err(EngineError::Runtime(
                "source operator in a non-source position".into(),
            ))
        }
    })
}

pub(crate) fn run(
    plan: &Plan,
    ctx: &ExecCtx<'_>,
    opts: &ExecOptions,
) -> Result<(Vec<Row>, ExecStats)> {
    let Some((source, rest)) = plan.nodes.split_first() else {
        return Err(EngineError::Runtime("empty plan".into()));
    };
    let mut ops = Vec::with_capacity(rest.len());
    for node in rest {
        ops.push(build_op(node, ctx)?);
    }
    let names: Vec<String> = plan.nodes.iter().map(op_name).collect();
    let batch = opts.batch_size.max(1);

    let (source_rows, batches, counts, sink) = match source {
        PlanNode::VertexScan { var, label, .. } => {
            let verts: Vec<VertexId> = match label {
                Some(l) => ctx.state.topo.vertices_of_label(*l).collect(),
                None => ctx.state.topo.all_vertices().collect(),
            };
            let var = *var;
            if opts.workers > 1 && verts.len() > 1 {
                run_partitioned(&verts, var, ops, ctx, batch, opts.workers)?
            } else {
                let mut pipe = Pipeline::new(ops, ctx);
                let mut produced = 0u64;
                let mut batches = 0u64;
                for chunk in verts.chunks(batch) {
                    let rows: Vec<Row> = chunk
                        .iter()
                        .map(|&v| {
                            let mut r = Vec::new();
                            put(&mut r, var, Cell::Vertex(v));
                            r
                        })
                        .collect();
                    produced += rows.len() as u64;
                    batches += 1;
                    pipe.push(rows)?;
                    if pipe.done {
                        break;
                    }
                }
                pipe.finish()?;
                (produced, batches, pipe.counts, pipe.sink)
            }
        }
        PlanNode::VertexVectorScan {
            var,
            score_col,
            collection,
            query,
            k,
            preds,
            ..
        } => {
            let rows = probe_vector_index(ctx, collection, query, *k, preds, *var, *score_col)?;
            let produced = rows.len() as u64;
            let mut pipe = Pipeline::new(ops, ctx);
            let mut batches = 0u64;
            for chunk in rows.chunks(batch) {
                batches += 1;
                pipe.push(chunk.to_vec())?;
                if pipe.done {
                    break;
                }
            }
            pipe.finish()?;
            (produced, batches, pipe.counts, pipe.sink)
        }
        PlanNode::Call { call } => {
            let rows = run_procedure(ctx, &call.proc)?;
            let produced = rows.len() as u64;
            let mut pipe = Pipeline::new(ops, ctx);
            let mut batches = 0u64;
            for chunk in rows.chunks(batch) {
                batches += 1;
                pipe.push(chunk.to_vec())?;
                if pipe.done {
                    break;
                }
            }
            pipe.finish()?;
            (produced, batches, pipe.counts, pipe.sink)
        }
        other => {
            return Err(EngineError::Runtime(format!(
                "plan does not start with a source: {other:?}"
            )))
        }
    };

    let mut operator_rows = Vec::with_capacity(names.len());
    operator_rows.push((names[0].clone(), source_rows));
    for (name, count) in names[1..].iter().zip(counts.iter()) {
        operator_rows.push((name.clone(), *count));
    }
    Ok((
        sink,
        ExecStats {
            operator_rows,
            batches,
        },
    ))
}

/// Scan fan-out: contiguous vertex ranges run the stateless operator prefix
/// on worker threads; results concatenate in range order, then the stateful
/// tail runs once. Output is identical to the sequential path.
fn run_partitioned(
    verts: &[VertexId],
    var: usize,
    ops: Vec<OpState>,
    ctx: &ExecCtx<'_>,
    batch: usize,
    workers: usize,
) -> Result<(u64, u64, Vec<u64>, Vec<Row>)> {
    let prefix_len = ops.iter().take_while(|o| o.stateless()).count();
    let (prefix, tail) = ops.split_at(prefix_len);
    let chunk_size = verts.len().div_ceil(workers);
    let chunks: Vec<&[VertexId]> = verts.chunks(chunk_size.max(1)).collect();

    let mut results: Vec<(u64, u64, Vec<u64>, Vec<Row>)> = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for chunk in &chunks {
            let prefix_ops = prefix.to_vec();
            handles.push(scope.spawn(move || -> Result<(u64, u64, Vec<u64>, Vec<Row>)> {
                let mut pipe = Pipeline::new(prefix_ops, ctx);
                let mut produced = 0u64;
                let mut batches = 0u64;
                for part in chunk.chunks(batch) {
                    let rows: Vec<Row> = part
                        .iter()
                        .map(|&v| {
                            let mut r = Vec::new();
                            put(&mut r, var, Cell::Vertex(v));
                            r
                        })
                        .collect();
                    produced += rows.len() as u64;
                    batches += 1;
                    pipe.push(rows)?;
                }
                pipe.finish()?;
                Ok((produced, batches, pipe.counts, pipe.sink))
            }));
        }
        for h in handles {
            results.push(h.join().expect("worker panicked")?);
        }
        Ok(())
    })?;

    let mut produced = 0u64;
    let mut batches = 0u64;
    let mut counts = vec![0u64; prefix_len];
    let mut staged: Vec<Row> = Vec::new();
    for (p, b, c, rows) in results {
        produced += p;
        batches += b;
        for (i, n) in c.iter().enumerate() {
            counts[i] += n;
        }
        staged.extend(rows);
    }

    let mut pipe = Pipeline::new(tail.to_vec(), ctx);
    for chunk in staged.chunks(batch) {
        pipe.push(chunk.to_vec())?;
        if pipe.done {
            break;
        }
    }
    pipe.finish()?;
    counts.extend(pipe.counts);
    Ok((produced, batches, counts, pipe.sink))
}

/// Drives already-materialized rows through a chain of non-source operators.
/// Used for statements whose source must run outside the read path.
pub(crate) fn run_tail(
    input: Vec<Row>,
    nodes: &[PlanNode],
    ctx: &ExecCtx<'_>,
    opts: &ExecOptions,
) -> Result<(Vec<Row>, Vec<u64>)> {
    let mut ops = Vec::with_capacity(nodes.len());
    for n in nodes {
        ops.push(build_op(n, ctx)?);
    }
    let mut pipe = Pipeline::new(ops, ctx);
    for chunk in input.chunks(opts.batch_size.max(1)) {
        pipe.push(chunk.to_vec())?;
        if pipe.done {
            break;
        }
    }
    pipe.finish()?;
    Ok((pipe.sink, pipe.counts))
}

fn probe_vector_index(
    ctx: &ExecCtx<'_>,
    collection: &str,
    query: &PExpr,
    k: usize,
    preds: &[AbsorbedPred],
    var: usize,
    score_col: usize,
) -> Result<Vec<Row>> {
    let empty: Row = Vec::new();
    let q = match eval_cell(query, &empty, ctx)? {
        Cell::Val(PropertyValue::Vector(v)) => v,
        other => {
            return Err(EngineError::Runtime(format!(
                "vector query must be a vector, got {other}"
            )))
        }
    };
    let mut filter = PayloadFilter::default();
    for p in preds {
        let v = match eval_cell(&p.value, &empty, ctx)? {
            Cell::Val(PropertyValue::Null) => {
                return Ok(Vec::new());
            }
            Cell::Val(v) => v,
            other => {
                return Err(EngineError::Runtime(format!(
                    "filter value must be scalar, got {other}"
                )))
            }
        };
        let pred = match p.op {
            CmpCode::Eq => RangePred::eq(p.field, v),
            CmpCode::Lt => RangePred {
                field: p.field,
                lo: RangeEdge::Unbounded,
                hi: RangeEdge::Exclusive(v),
            },
            CmpCode::Le => RangePred {
                field: p.field,
                lo: RangeEdge::Unbounded,
                hi: RangeEdge::Inclusive(v),
            },
            CmpCode::Gt => RangePred {
                field: p.field,
                lo: RangeEdge::Exclusive(v),
                hi: RangeEdge::Unbounded,
            },
            CmpCode::Ge => RangePred {
                field: p.field,
                lo: RangeEdge::Inclusive(v),
                hi: RangeEdge::Unbounded,
            },
            CmpCode::Ne => {
                return Err(EngineError::Runtime(
                    "inequality filters cannot be absorbed by an index probe".into(),
                ))
            }
        };
        filter.preds.push(pred);
    }
    let col = ctx.state.vectors.get(collection)?;
    let ef = ctx.ef_search.max(k);
    let hits = col.knn(&q, k, ef, if filter.is_empty() { None } else { Some(&filter) })?;
    Ok(hits
        .into_iter()
        .map(|h| {
            let mut r = Vec::new();
            put(&mut r, var, Cell::Vertex(h.key));
            put(&mut r, score_col, Cell::Val(PropertyValue::Float(h.score as f64)));
            r
        })
        .collect())
}

fn run_procedure(ctx: &ExecCtx<'_>, proc: &ProcKind) -> Result<Vec<Row>> {
    match proc {
        ProcKind::Pagerank {
            damping,
            max_iter,
            tol,
        } => {
            let snap = TopologySnapshot::capture(&ctx.state.topo);
            let r = analytics::pagerank(&snap, *damping, *max_iter as usize, *tol)?;
            Ok(r.rows
                .into_iter()
                .map(|(v, val)| vec![Cell::Vertex(v), Cell::Val(val)])
                .collect())
        }
        ProcKind::Wcc => {
            let snap = TopologySnapshot::capture(&ctx.state.topo);
            let r = analytics::weakly_connected_components(&snap)?;
            Ok(r.rows
                .into_iter()
                .map(|(v, val)| vec![Cell::Vertex(v), Cell::Val(val)])
                .collect())
        }
        ProcKind::VectorSearch {
            collection,
            query,
            k,
        } => {
            let col = ctx.state.vectors.get(collection)?;
            let ef = ctx.ef_search.max(*k);
            let hits = col.knn(query, *k, ef, None)?;
            Ok(hits
                .into_iter()
                .map(|h| {
                    vec![
                        Cell::Vertex(h.key),
                        Cell::Val(PropertyValue::Float(h.score as f64)),
                    ]
                })
                .collect())
        }
        ProcKind::Writeback { .. } => Err(EngineError::Runtime(
            "writeback runs through the write path, not the read executor".into(),
        )),
    }
}
