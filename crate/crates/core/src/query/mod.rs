//! Query front-end: tokenizer, parser, logical planner, the vector-index
//! rewrite, and a push-based executor, stitched onto the storage engine.

pub mod ast;
pub mod exec;
pub mod optimizer;
pub mod parser;
pub mod plan;
pub mod planner;
pub mod token;

pub use exec::{Cell, ExecOptions, ExecStats, Row};
pub use planner::Params;

use crate::analytics;
use crate::engine::Database;
use crate::error::{EngineError, Result};
use crate::value::{Direction, FieldId, LabelId, Owner, PropertyValue, VertexId};
use crate::vector::DEFAULT_EF_SEARCH;
use exec::ExecCtx;
use plan::{Plan, PlanNode, ProcKind};
use planner::{CreatePattern, NodeSlot};

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub stats: ExecStats,
}

impl Database {
    pub fn query(&self, text: &str) -> Result<QueryResult> {
        self.query_with(text, &Params::new(), &ExecOptions::default())
    }

    pub fn query_with(
        &self,
        text: &str,
        params: &Params,
        opts: &ExecOptions,
    ) -> Result<QueryResult> {
        match parser::parse(text)? {
            ast::Statement::Query(q) => {
                let state = self.read();
                let mut plan = planner::plan_read(&state, params, &q)?;
                if opts.optimize {
                    plan = optimizer::optimize(plan, &state);
                }
                run_plan(&state, plan, params, opts)
            }
            ast::Statement::Call(c) => {
                // Plans are self-contained, so the guard can be dropped and
                // re-acquired; writeback must not execute under a read lock.
                let plan = {
                    let state = self.read();
                    planner::plan_call(&state, params, &c)?
                };
                if matches!(
                    plan.nodes.first(),
                    Some(PlanNode::Call { call }) if matches!(call.proc, ProcKind::Writeback { .. })
                ) {
                    run_writeback(self, plan, params, opts)
                } else {
                    let state = self.read();
                    run_plan(&state, plan, params, opts)
                }
            }
            ast::Statement::Create(c) => run_create(self, &c, params, opts),
            ast::Statement::CreateVectorIndex(d) => {
                let ddl = {
                    let state = self.read();
                    planner::plan_ddl(&state, params, &d)?
                };
                self.create_vector_index(
                    &ddl.name,
                    ddl.label,
                    ddl.field,
                    ddl.metric,
                    ddl.m,
                    ddl.ef_construction,
                    ddl.payload,
                )?;
                Ok(QueryResult {
                    columns: vec!["index".into()],
                    rows: vec![vec![Cell::Val(PropertyValue::Text(ddl.name))]],
                    stats: ExecStats::default(),
                })
            }
        }
    }

    /// Deterministic textual tree of the optimized plan.
    pub fn explain(&self, text: &str, params: &Params) -> Result<String> {
        let stmt = parser::parse(text)?;
        let state = self.read();
        match stmt {
            ast::Statement::Query(q) => {
                let plan = optimizer::optimize(planner::plan_read(&state, params, &q)?, &state);
                Ok(plan.to_string())
            }
            ast::Statement::Call(c) => {
                let plan = planner::plan_call(&state, params, &c)?;
                Ok(plan.to_string())
            }
            ast::Statement::Create(c) => {
                let planned = planner::plan_create(&state, params, &c)?;
                let mut verts = 0usize;
                let mut edges = 0usize;
                for p in &planned.patterns {
                    if matches!(p.start, NodeSlot::New { .. }) {
                        verts += 1;
                    }
                    for s in &p.steps {
                        edges += 1;
                        if matches!(s.node, NodeSlot::New { .. }) {
                            verts += 1;
                        }
                    }
                }
                let mut out = format!("Create [{verts} vertices, {edges} edges per match]\n");
                if !planned.match_nodes.is_empty() {
                    let plan = Plan {
                        nodes: planned.match_nodes,
                        schema: Vec::new(),
                        columns: Vec::new(),
                    };
                    for line in plan.to_string().lines() {
                        out.push_str("  ");
                        out.push_str(line);
                        out.push('\n');
                    }
                }
                Ok(out.trim_end().to_string())
            }
            ast::Statement::CreateVectorIndex(d) => {
                Ok(planner::plan_ddl(&state, params, &d)?.display)
            }
        }
    }
}

fn run_plan(
    state: &crate::engine::State,
    plan: Plan,
    params: &Params,
    opts: &ExecOptions,
) -> Result<QueryResult> {
    let ctx = ExecCtx {
        state,
        params,
        ef_search: opts.ef_search.unwrap_or(DEFAULT_EF_SEARCH),
    };
    let (rows, stats) = exec::run(&plan, &ctx, opts)?;
    Ok(QueryResult {
        columns: plan.columns,
        rows,
        stats,
    })
}

/// Writeback runs its procedure on a snapshot, applies the results through
/// the write path, then feeds the update count to any trailing operators.
fn run_writeback(
    db: &Database,
    plan: Plan,
    params: &Params,
    opts: &ExecOptions,
) -> Result<QueryResult> {
    let PlanNode::Call { call } = &plan.nodes[0] else {
        return Err(EngineError::Runtime("writeback plan lost its source".into()));
    };
    let ProcKind::Writeback {
        proc,
        field,
        damping,
        max_iter,
        tol,
        ..
    } = &call.proc
    else {
        return Err(EngineError::Runtime("writeback plan lost its source".into()));
    };
    let snap = db.snapshot_topology();
    let result = match proc.as_str() {
        "pagerank" => analytics::pagerank(&snap, *damping, *max_iter as usize, *tol)?,
        _ => analytics::weakly_connected_components(&snap)?,
    };
    let updated = db.writeback(*field, &result.rows)?;

    let input = vec![vec![Cell::Val(PropertyValue::Int(updated as i64))]];
    let state = db.read();
    let ctx = ExecCtx {
        state: &state,
        params,
        ef_search: opts.ef_search.unwrap_or(DEFAULT_EF_SEARCH),
    };
    let (rows, counts) = exec::run_tail(input, &plan.nodes[1..], &ctx, opts)?;
    let mut operator_rows = vec![(exec::op_name(&plan.nodes[0]), 1u64)];
    for (node, count) in plan.nodes[1..].iter().zip(counts) {
        operator_rows.push((exec::op_name(node), count));
    }
    Ok(QueryResult {
        columns: plan.columns,
        rows,
        stats: ExecStats {
            operator_rows,
            batches: 1,
        },
    })
}

enum Target {
    Existing(VertexId),
    Slot(usize),
    Fresh {
        label: LabelId,
        props: Vec<(FieldId, PropertyValue)>,
        slot: usize,
    },
}

struct ResolvedStep {
    label: LabelId,
    dir: Direction,
    props: Vec<(FieldId, PropertyValue)>,
    node: Target,
}

/// CREATE runs in two phases: match rows under a read guard, then apply the
/// writes without it. Property expressions are evaluated against the matched
/// row before any write, so they cannot observe this statement's own effects.
fn run_create(
    db: &Database,
    stmt: &ast::CreateStmt,
    params: &Params,
    opts: &ExecOptions,
) -> Result<QueryResult> {
    let planned = {
        let state = db.read();
        planner::plan_create(&state, params, stmt)?
    };
    let mut match_stats = ExecStats::default();
    let resolved: Vec<Vec<(Target, Vec<ResolvedStep>)>> = {
        let state = db.read();
        let ctx = ExecCtx {
            state: &state,
            params,
            ef_search: opts.ef_search.unwrap_or(DEFAULT_EF_SEARCH),
        };
        let rows: Vec<Row> = if planned.match_nodes.is_empty() {
            vec![Vec::new()]
        } else {
            let plan = Plan {
                nodes: planned.match_nodes.clone(),
                schema: (0..planned.match_width).map(|i| format!("c{i}")).collect(),
                columns: Vec::new(),
            };
            let (rows, stats) = exec::run(&plan, &ctx, opts)?;
            match_stats = stats;
            rows
        };
        let mut all = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut per_row = Vec::with_capacity(planned.patterns.len());
            for pat in &planned.patterns {
                per_row.push(resolve_pattern(pat, row, &ctx)?);
            }
            all.push(per_row);
        }
        all
    };

    let mut created_vertices = 0u64;
    let mut created_edges = 0u64;
    for per_row in resolved {
        let mut slots: Vec<Option<VertexId>> = vec![None; planned.slots];
        for (start, steps) in per_row {
            let mut cur = place(db, &start, &mut slots, &mut created_vertices)?;
            for step in steps {
                let dst = place(db, &step.node, &mut slots, &mut created_vertices)?;
                let (src, tgt) = match step.dir {
                    Direction::Out => (cur, dst),
                    Direction::In => (dst, cur),
                };
                let eref = db.insert_edge(src, step.label, tgt)?;
                for (f, v) in step.props {
                    db.set_attribute(Owner::Edge(eref), f, v)?;
                }
                created_edges += 1;
                cur = dst;
            }
        }
    }

    Ok(QueryResult {
        columns: vec!["created_vertices".into(), "created_edges".into()],
        rows: vec![vec![
            Cell::Val(PropertyValue::Int(created_vertices as i64)),
            Cell::Val(PropertyValue::Int(created_edges as i64)),
        ]],
        stats: match_stats,
    })
}

fn resolve_pattern(
    pat: &CreatePattern,
    row: &Row,
    ctx: &ExecCtx<'_>,
) -> Result<(Target, Vec<ResolvedStep>)> {
    let start = resolve_slot(&pat.start, row, ctx)?;
    let mut steps = Vec::with_capacity(pat.steps.len());
    for s in &pat.steps {
        let mut props = Vec::with_capacity(s.props.len());
        for (f, e) in &s.props {
            props.push((*f, eval_scalar(e, row, ctx)?));
        }
        steps.push(ResolvedStep {
            label: s.label,
            dir: s.dir,
            props,
            node: resolve_slot(&s.node, row, ctx)?,
        });
    }
    Ok((start, steps))
}

fn resolve_slot(slot: &NodeSlot, row: &Row, ctx: &ExecCtx<'_>) -> Result<Target> {
    match slot {
        NodeSlot::Row(col) => match row.get(*col) {
            Some(Cell::Vertex(v)) => Ok(Target::Existing(*v)),
            _ => Err(EngineError::Runtime(
                "matched pattern variable is not a vertex".into(),
            )),
        },
        NodeSlot::Created(slot) => Ok(Target::Slot(*slot)),
        NodeSlot::New { label, props, slot, .. } => {
            let mut out = Vec::with_capacity(props.len());
            for (f, e) in props {
                out.push((*f, eval_scalar(e, row, ctx)?));
            }
            Ok(Target::Fresh {
                label: *label,
                props: out,
                slot: *slot,
            })
        }
    }
}

fn eval_scalar(e: &plan::PExpr, row: &Row, ctx: &ExecCtx<'_>) -> Result<PropertyValue> {
    match exec::eval_cell(e, row, ctx)? {
        Cell::Val(v) => Ok(v),
        other => Err(EngineError::Runtime(format!(
            "property values must be scalar, got {other}"
        ))),
    }
}

fn place(
    db: &Database,
    t: &Target,
    slots: &mut [Option<VertexId>],
    created: &mut u64,
) -> Result<VertexId> {
    match t {
        Target::Existing(v) => Ok(*v),
        Target::Slot(i) => slots[*i].ok_or_else(|| {
            EngineError::Runtime("created variable used before its defining pattern".into())
        }),
        Target::Fresh { label, props, slot } => {
            let v = db.create_vertex(*label)?;
            for (f, val) in props {
                db.set_attribute(Owner::Vertex(v), *f, val.clone())?;
            }
            slots[*slot] = Some(v);
            *created += 1;
            Ok(v)
        }
    }
}
