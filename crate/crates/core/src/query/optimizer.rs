//! Rule-based plan rewrites. The single rule turns a full scan ordered by
//! vector proximity with a row limit into a probe of the backing vector
//! index, absorbing payload-field filters into the probe. The rewrite only
//! fires when every intervening filter can be absorbed; a leftover filter
//! would make index top-k a different query than filter-then-top-k.

use crate::engine::State;
use crate::query::plan::{PExpr, Plan, PlanNode};
use crate::query::planner::absorb_filter;
use crate::value::PropertyValue;

pub fn optimize(plan: Plan, state: &State) -> Plan {
    rewrite_vector_topk(plan, state)
}

fn rewrite_vector_topk(mut plan: Plan, state: &State) -> Plan {
    let nodes = &plan.nodes;
    let Some(PlanNode::VertexScan {
        var,
        var_name,
        label: Some(label),
        label_name: Some(label_name),
        cross: false,
    }) = nodes.first()
    else {
        return plan;
    };
    let (var, var_name, label, label_name) =
        (*var, var_name.clone(), *label, label_name.clone());

    let mut i = 1;
    let mut filters = Vec::new();
    while let Some(PlanNode::Filter { pred }) = nodes.get(i) {
        filters.push(pred.clone());
        i += 1;
    }
    let Some(PlanNode::OrderBy { keys }) = nodes.get(i) else {
        return plan;
    };
    if keys.len() != 1 {
        return plan;
    }
    // Nearest-seeking orders only: ascending distance or descending score.
    let (a, b) = match &keys[0] {
        (PExpr::VectorDistance(a, b, _), true) => (&**a, &**b),
        (PExpr::Similarity(a, b, _), false) => (&**a, &**b),
        _ => return plan,
    };
    let Some(PlanNode::Limit { n: k }) = nodes.get(i + 1) else {
        return plan;
    };
    let k = *k;
    if i + 3 != nodes.len() || !matches!(nodes.get(i + 2), Some(PlanNode::Project { .. })) {
        return plan;
    }

    let (field, query) = match (a, b) {
        (PExpr::Prop { col, field, .. }, q) if *col == var && is_query(q) => (*field, q.clone()),
        (q, PExpr::Prop { col, field, .. }) if *col == var && is_query(q) => (*field, q.clone()),
        _ => return plan,
    };
    let Some(def) = state.catalog.vector_index_for(label, field) else {
        return plan;
    };

    let mut preds = Vec::new();
    for f in &filters {
        if !absorb_filter(f, var, &def.payload_fields, &mut preds) {
            return plan;
        }
    }

    let project = plan.nodes.pop().expect("shape checked above");
    let scan = PlanNode::VertexVectorScan {
        var,
        var_name,
        score_col: plan.schema.len(),
        collection: def.name.clone(),
        query,
        k: k as usize,
        preds,
        label_name,
    };
    plan.schema.push("#score".to_string());
    plan.nodes = vec![scan, project];
    plan
}

/// Query-vector shapes a probe can evaluate without a row.
fn is_query(e: &PExpr) -> bool {
    matches!(
        e,
        PExpr::Const(PropertyValue::Vector(_)) | PExpr::Param(_) | PExpr::Array(_)
    )
}
