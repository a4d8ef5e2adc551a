//! Whole-graph procedures. Each runs over an immutable adjacency snapshot
//! captured at call time, so results reflect one consistent topology and no
//! lock is held while iterating. Results can be returned to queries or
//! written back through the ordinary logged attribute path.

use std::collections::HashMap;

use crate::engine::Database;
use crate::error::{EngineError, Result};
use crate::graph::GraphTopology;
use crate::value::{Direction, FieldId, Owner, PropertyValue, VertexId};

/// Frozen adjacency in compressed sparse rows, vertices ascending.
pub struct TopologySnapshot {
    verts: Vec<VertexId>,
    out_offsets: Vec<u32>,
    out_targets: Vec<u32>,
    in_offsets: Vec<u32>,
    in_targets: Vec<u32>,
}

impl TopologySnapshot {
    pub fn capture(topo: &GraphTopology) -> TopologySnapshot {
        let verts: Vec<VertexId> = topo.all_vertices().collect();
        let index: HashMap<VertexId, u32> = verts
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut snap = TopologySnapshot {
            out_offsets: Vec::with_capacity(verts.len() + 1),
            out_targets: Vec::new(),
            in_offsets: Vec::with_capacity(verts.len() + 1),
            in_targets: Vec::new(),
            verts,
        };
        snap.out_offsets.push(0);
        snap.in_offsets.push(0);
        for &v in &snap.verts {
            for key in topo
                .neighbors(v, Direction::Out, None)
                .expect("snapshot vertex")
            {
                snap.out_targets.push(index[&key.neighbor]);
            }
            snap.out_offsets.push(snap.out_targets.len() as u32);
            for key in topo
                .neighbors(v, Direction::In, None)
                .expect("snapshot vertex")
            {
                snap.in_targets.push(index[&key.neighbor]);
            }
            snap.in_offsets.push(snap.in_targets.len() as u32);
        }
        snap
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.verts
    }

    fn out(&self, i: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[i] as usize..self.out_offsets[i + 1] as usize]
    }

    fn inc(&self, i: usize) -> &[u32] {
        &self.in_targets[self.in_offsets[i] as usize..self.in_offsets[i + 1] as usize]
    }
}

/// One row per vertex in scope, plus how the computation went.
pub struct ProcedureResult {
    pub rows: Vec<(VertexId, PropertyValue)>,
    pub iterations: usize,
    pub delta: f64,
}

/// Power iteration. Dangling mass is spread uniformly each step, so scores
/// stay a probability distribution at every iteration, not only at the
/// fixed point. Parallel edges count as repeated weight.
pub fn pagerank(
    snap: &TopologySnapshot,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ProcedureResult> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(EngineError::Semantic(format!(
            "damping must be inside (0, 1), got {damping}"
        )));
    }
    if max_iter == 0 {
        return Err(EngineError::Semantic("max_iter must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(EngineError::Semantic(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = snap.vertex_count();
    if n == 0 {
        return Err(EngineError::EmptyGraph);
    }
    let uniform = 1.0 / n as f64;
    let mut scores = vec![uniform; n];
    let mut next = vec![0.0f64; n];
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < max_iter && delta >= tol {
        let mut dangling = 0.0;
        for (i, s) in scores.iter().enumerate() {
            if snap.out(i).is_empty() {
                dangling += s;
            }
        }
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for (i, s) in scores.iter().enumerate() {
            let out = snap.out(i);
            if !out.is_empty() {
                let share = damping * s / out.len() as f64;
                for &t in out {
                    next[t as usize] += share;
                }
            }
        }
        delta = scores
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut scores, &mut next);
        iterations += 1;
    }
    Ok(ProcedureResult {
        rows: snap
            .verts
            .iter()
            .zip(&scores)
            .map(|(&v, &s)| (v, PropertyValue::Float(s)))
            .collect(),
        iterations,
        delta,
    })
}

/// Component labels fit an i64 by packing (label, local); locals stay well
/// under 2^48 in practice.
pub fn component_id(v: VertexId) -> Result<i64> {
    if v.local >= 1 << 48 {
        return Err(EngineError::Runtime(format!(
            "vertex local id {} too large for a component label",
            v.local
        )));
    }
    Ok(((v.label as i64) << 48) | v.local as i64)
}

/// Flood fill in ascending vertex order over undirected reach. The seed of
/// each fill is its component's minimum vertex, so labels are the
/// "min id in component" directly.
pub fn weakly_connected_components(snap: &TopologySnapshot) -> Result<ProcedureResult> {
    let n = snap.vertex_count();
    let mut label: Vec<u32> = vec![u32::MAX; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = start as u32;
        stack.push(start as u32);
        while let Some(i) = stack.pop() {
            let i = i as usize;
            for &t in snap.out(i).iter().chain(snap.inc(i)) {
                if label[t as usize] == u32::MAX {
                    label[t as usize] = start as u32;
                    stack.push(t);
                }
            }
        }
    }
    let rows = snap
        .verts
        .iter()
        .zip(&label)
        .map(|(&v, &l)| Ok((v, PropertyValue::Int(component_id(snap.verts[l as usize])?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProcedureResult {
        rows,
        iterations: 1,
        delta: 0.0,
    })
}

impl Database {
    pub fn snapshot_topology(&self) -> TopologySnapshot {
        TopologySnapshot::capture(&self.read().topo)
    }

    pub fn pagerank(&self, damping: f64, max_iter: usize, tol: f64) -> Result<ProcedureResult> {
        let snap = self.snapshot_topology();
        pagerank(&snap, damping, max_iter, tol)
    }

    pub fn weakly_connected_components(&self) -> Result<ProcedureResult> {
        let snap = self.snapshot_topology();
        weakly_connected_components(&snap)
    }

    /// Store procedure rows as vertex attributes, one logged write per row.
    pub fn writeback(&self, field: FieldId, rows: &[(VertexId, PropertyValue)]) -> Result<usize> {
        for (v, value) in rows {
            self.set_attribute(Owner::Vertex(*v), field, value.clone())?;
        }
        Ok(rows.len())
    }
}
