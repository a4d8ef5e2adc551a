//! In-memory graph topology: label-partitioned vertex sets plus forward and
//! reverse adjacency built from adaptive edge collections. Every edge is
//! mirrored, so out/in traversals are both single map lookups.

pub mod aec;
pub mod cache;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::value::{Direction, EdgeKey, EdgeRef, LabelId, VertexId};

use aec::{AdaptiveEdgeCollection, AecIter, Repr};

/// Adjacency for one vertex in one direction. Labels are kept in a sorted
/// flat vec: per-vertex label counts are tiny and the fixed overhead of a
/// map would dominate the footprint.
#[derive(Debug, Default, Clone)]
struct VertexAdj {
    labels: Vec<(LabelId, AdaptiveEdgeCollection)>,
    degree: u64,
}

impl VertexAdj {
    fn collection(&self, label: LabelId) -> Option<&AdaptiveEdgeCollection> {
        self.labels
            .binary_search_by_key(&label, |(l, _)| *l)
            .ok()
            .map(|i| &self.labels[i].1)
    }

    fn collection_mut(&mut self, label: LabelId) -> &mut AdaptiveEdgeCollection {
        match self.labels.binary_search_by_key(&label, |(l, _)| *l) {
            Ok(i) => &mut self.labels[i].1,
            Err(i) => {
                self.labels.insert(i, (label, AdaptiveEdgeCollection::new()));
                &mut self.labels[i].1
            }
        }
    }
}

/// Structural memory accounting for the topology, reported in bytes.
///
/// Collection sizes follow [`AdaptiveEdgeCollection::heap_bytes`]; map and
/// set overheads use fixed per-node models so the number is deterministic
/// for a given operation history rather than an OS-level measurement.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct TopologyFootprint {
    pub topology_bytes: u64,
    pub small_collections: u64,
    pub large_collections: u64,
}

#[derive(Debug)]
pub struct GraphTopology {
    threshold: usize,
    /// label -> local ids, ascending. Drives ordered label scans.
    vertices: BTreeMap<LabelId, BTreeSet<u64>>,
    forward: HashMap<VertexId, VertexAdj>,
    reverse: HashMap<VertexId, VertexAdj>,
    vertex_count: u64,
    edge_count: u64,
    /// Next local id to hand out per label (max seen + 1).
    next_local: BTreeMap<LabelId, u64>,
    next_edge_id: u64,
}

impl GraphTopology {
    pub fn new(threshold: usize) -> Self {
        GraphTopology {
            threshold,
            vertices: BTreeMap::new(),
            forward: HashMap::new(),
            reverse: HashMap::new(),
            vertex_count: 0,
            edge_count: 0,
            next_local: BTreeMap::new(),
            next_edge_id: 1,
        }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn vertex_count(&self) -> u64 {
        self.vertex_count
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices
            .get(&v.label)
            .is_some_and(|s| s.contains(&v.local))
    }

    /// Returns false if the vertex already exists.
    pub fn create_vertex(&mut self, v: VertexId) -> bool {
        let inserted = self.vertices.entry(v.label).or_default().insert(v.local);
        if inserted {
            self.vertex_count += 1;
            let next = self.next_local.entry(v.label).or_insert(0);
            *next = (*next).max(v.local + 1);
        }
        inserted
    }

    /// Removes the vertex and every incident edge. Returns the removed
    /// forward-oriented edges so callers can cascade cleanup, sorted by
    /// (src, key).
    pub fn delete_vertex(&mut self, v: VertexId) -> Result<Vec<EdgeRef>> {
        if !self.contains_vertex(v) {
            return Err(EngineError::UnknownVertex(v));
        }
        let mut removed: BTreeSet<EdgeRef> = BTreeSet::new();
        if let Some(adj) = self.forward.remove(&v) {
            for (_, aec) in &adj.labels {
                for key in aec.iter() {
                    removed.insert(EdgeRef { src: v, key: *key });
                }
            }
        }
        if let Some(adj) = self.reverse.remove(&v) {
            for (_, aec) in &adj.labels {
                for key in aec.iter() {
                    removed.insert(EdgeRef {
                        src: key.neighbor,
                        key: EdgeKey::new(key.edge_label, v, key.edge_id),
                    });
                }
            }
        }
        // Unhook the far ends. Self-loops vanished with the maps above.
        for edge in &removed {
            if edge.src != v {
                self.unhook(edge.src, Direction::Out, edge.key);
            }
            if edge.key.neighbor != v {
                self.unhook(
                    edge.key.neighbor,
                    Direction::In,
                    EdgeKey::new(edge.key.edge_label, edge.src, edge.key.edge_id),
                );
            }
        }
        self.edge_count -= removed.len() as u64;
        let set = self.vertices.get_mut(&v.label).expect("label present");
        set.remove(&v.local);
        if set.is_empty() {
            self.vertices.remove(&v.label);
        }
        self.vertex_count -= 1;
        Ok(removed.into_iter().collect())
    }

    fn unhook(&mut self, v: VertexId, dir: Direction, key: EdgeKey) {
        let map = match dir {
            Direction::Out => &mut self.forward,
            Direction::In => &mut self.reverse,
        };
        if let Some(adj) = map.get_mut(&v) {
            let idx = adj
                .labels
                .binary_search_by_key(&key.edge_label, |(l, _)| *l);
            if let Ok(i) = idx {
                if adj.labels[i].1.remove(&key) {
                    adj.degree -= 1;
                }
            }
        }
    }

    /// Returns false on duplicate (same src, dst, label, edge id).
    pub fn insert_edge(
        &mut self,
        src: VertexId,
        edge_label: LabelId,
        dst: VertexId,
        edge_id: u64,
    ) -> Result<bool> {
        if !self.contains_vertex(src) {
            return Err(EngineError::UnknownVertex(src));
        }
        if !self.contains_vertex(dst) {
            return Err(EngineError::UnknownVertex(dst));
        }
        let fwd_key = EdgeKey::new(edge_label, dst, edge_id);
        let threshold = self.threshold;
        let fadj = self.forward.entry(src).or_default();
        if !fadj.collection_mut(edge_label).insert(fwd_key, threshold) {
            return Ok(false);
        }
        fadj.degree += 1;
        let rev_key = EdgeKey::new(edge_label, src, edge_id);
        let radj = self.reverse.entry(dst).or_default();
        let mirrored = radj.collection_mut(edge_label).insert(rev_key, threshold);
        debug_assert!(mirrored, "forward and reverse maps out of sync");
        radj.degree += 1;
        self.edge_count += 1;
        self.next_edge_id = self.next_edge_id.max(edge_id + 1);
        Ok(true)
    }

    /// Returns false if no such edge exists.
    pub fn remove_edge(
        &mut self,
        src: VertexId,
        edge_label: LabelId,
        dst: VertexId,
        edge_id: u64,
    ) -> Result<bool> {
        if !self.contains_vertex(src) {
            return Err(EngineError::UnknownVertex(src));
        }
        if !self.contains_vertex(dst) {
            return Err(EngineError::UnknownVertex(dst));
        }
        let fwd_key = EdgeKey::new(edge_label, dst, edge_id);
        let found = self
            .forward
            .get_mut(&src)
            .is_some_and(|adj| {
                if adj.collection_mut(edge_label).remove(&fwd_key) {
                    adj.degree -= 1;
                    true
                } else {
                    false
                }
            });
        if !found {
            return Ok(false);
        }
        self.unhook(dst, Direction::In, EdgeKey::new(edge_label, src, edge_id));
        self.edge_count -= 1;
        Ok(true)
    }

    pub fn has_edge(
        &self,
        src: VertexId,
        edge_label: LabelId,
        dst: VertexId,
        edge_id: u64,
    ) -> bool {
        self.forward
            .get(&src)
            .and_then(|adj| adj.collection(edge_label))
            .is_some_and(|aec| aec.contains(&EdgeKey::new(edge_label, dst, edge_id)))
    }

    /// Degree lookup is a counter read, never an iteration.
    pub fn degree(&self, v: VertexId, dir: Direction) -> Result<u64> {
        if !self.contains_vertex(v) {
            return Err(EngineError::UnknownVertex(v));
        }
        let map = match dir {
            Direction::Out => &self.forward,
            Direction::In => &self.reverse,
        };
        Ok(map.get(&v).map_or(0, |adj| adj.degree))
    }

    /// Edges incident to `v` in `dir`, ascending (edge_label, neighbor,
    /// edge_id), optionally restricted to one edge label.
    pub fn neighbors(
        &self,
        v: VertexId,
        dir: Direction,
        label: Option<LabelId>,
    ) -> Result<NeighborIter<'_>> {
        if !self.contains_vertex(v) {
            return Err(EngineError::UnknownVertex(v));
        }
        let map = match dir {
            Direction::Out => &self.forward,
            Direction::In => &self.reverse,
        };
        let adj = map.get(&v);
        Ok(match (adj, label) {
            (None, _) => NeighborIter::empty(),
            (Some(adj), Some(l)) => match adj.collection(l) {
                Some(aec) => NeighborIter::single(aec.iter()),
                None => NeighborIter::empty(),
            },
            (Some(adj), None) => NeighborIter::all(&adj.labels),
        })
    }

    /// Local ids of one label, ascending.
    pub fn vertices_of_label(
        &self,
        label: LabelId,
    ) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .get(&label)
            .into_iter()
            .flatten()
            .map(move |&local| VertexId::new(label, local))
    }

    /// All vertices, ascending (label, local).
    pub fn all_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().flat_map(|(&label, set)| {
            set.iter().map(move |&local| VertexId::new(label, local))
        })
    }

    pub fn labels_in_use(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.vertices.keys().copied()
    }

    pub fn label_cardinality(&self, label: LabelId) -> u64 {
        self.vertices.get(&label).map_or(0, |s| s.len() as u64)
    }

    /// Hand out the next unused local id for a label.
    pub fn alloc_local(&mut self, label: LabelId) -> u64 {
        *self.next_local.get(&label).unwrap_or(&0)
    }

    /// Hand out the next unused edge id.
    pub fn alloc_edge_id(&mut self) -> u64 {
        self.next_edge_id
    }

    /// Canonical byte image: vertices, edges, and allocation counters in
    /// sorted order. Representation choices (Small/Large) are not part of
    /// the image; decode rebuilds them under the decoder's threshold.
    pub fn encode_image(&self, enc: &mut crate::codec::Enc) {
        enc.u32(self.vertices.len() as u32);
        for (label, set) in &self.vertices {
            enc.u16(*label);
            enc.u64(set.len() as u64);
            for &local in set {
                enc.u64(local);
            }
        }
        enc.u64(self.edge_count);
        let mut written = 0u64;
        for v in self.all_vertices() {
            let adj = match self.forward.get(&v) {
                Some(adj) => adj,
                None => continue,
            };
            for (_, aec) in &adj.labels {
                for key in aec.iter() {
                    enc.vertex_id(v);
                    enc.edge_key(key);
                    written += 1;
                }
            }
        }
        debug_assert_eq!(written, self.edge_count);
        enc.u32(self.next_local.len() as u32);
        for (label, next) in &self.next_local {
            enc.u16(*label);
            enc.u64(*next);
        }
        enc.u64(self.next_edge_id);
    }

    pub fn decode_image(dec: &mut crate::codec::Dec, threshold: usize) -> Result<GraphTopology> {
        let corrupt = |what: &str| EngineError::CorruptCheckpoint(what.to_string());
        let mut topo = GraphTopology::new(threshold);
        let labels = dec.u32()?;
        for _ in 0..labels {
            let label = dec.u16()?;
            let n = dec.u64()?;
            for _ in 0..n {
                let local = dec.u64()?;
                if !topo.create_vertex(VertexId::new(label, local)) {
                    return Err(corrupt("duplicate vertex in image"));
                }
            }
        }
        let edges = dec.u64()?;
        for _ in 0..edges {
            let src = dec.vertex_id()?;
            let key = dec.edge_key()?;
            match topo.insert_edge(src, key.edge_label, key.neighbor, key.edge_id) {
                Ok(true) => {}
                Ok(false) => return Err(corrupt("duplicate edge in image")),
                Err(_) => return Err(corrupt("edge references missing vertex")),
            }
        }
        let locals = dec.u32()?;
        for _ in 0..locals {
            let label = dec.u16()?;
            let next = dec.u64()?;
            let slot = topo.next_local.entry(label).or_insert(0);
            *slot = (*slot).max(next);
        }
        topo.next_edge_id = topo.next_edge_id.max(dec.u64()?);
        Ok(topo)
    }

    pub fn footprint(&self) -> TopologyFootprint {
        let mut fp = TopologyFootprint::default();
        // Vertex sets: B-tree over u64 locals (same node model as the edge
        // collections, u64 keys).
        for set in self.vertices.values() {
            fp.topology_bytes += btree_u64_bytes(set.len()) as u64;
        }
        for map in [&self.forward, &self.reverse] {
            // Hash table: one (key, value) slot plus a control byte per
            // bucket; capacity() reflects the allocated table.
            let slot = std::mem::size_of::<(VertexId, VertexAdj)>() + 1;
            fp.topology_bytes += (map.capacity() * slot) as u64;
            for adj in map.values() {
                let pair = std::mem::size_of::<(LabelId, AdaptiveEdgeCollection)>();
                fp.topology_bytes += (adj.labels.capacity() * pair) as u64;
                for (_, aec) in &adj.labels {
                    fp.topology_bytes += aec.heap_bytes() as u64;
                    match aec.repr() {
                        Repr::Small => fp.small_collections += 1,
                        Repr::Large => fp.large_collections += 1,
                    }
                }
            }
        }
        fp
    }
}

fn btree_u64_bytes(n: usize) -> usize {
    const LEAF: usize = 16 + 11 * 8;
    const INTERNAL: usize = LEAF + 12 * 8;
    if n == 0 {
        return 0;
    }
    let mut level = n.div_ceil(8);
    let mut bytes = level * LEAF;
    while level > 1 {
        level = level.div_ceil(9);
        bytes += level * INTERNAL;
    }
    bytes
}

/// Iterator over one vertex's incident edges in one direction.
pub struct NeighborIter<'a> {
    rest: &'a [(LabelId, AdaptiveEdgeCollection)],
    cur: Option<AecIter<'a>>,
}

impl<'a> NeighborIter<'a> {
    fn empty() -> Self {
        NeighborIter { rest: &[], cur: None }
    }

    fn single(iter: AecIter<'a>) -> Self {
        NeighborIter { rest: &[], cur: Some(iter) }
    }

    fn all(labels: &'a [(LabelId, AdaptiveEdgeCollection)]) -> Self {
        NeighborIter { rest: labels, cur: None }
    }
}

impl<'a> Iterator for NeighborIter<'a> {
    type Item = &'a EdgeKey;

    fn next(&mut self) -> Option<&'a EdgeKey> {
        loop {
            if let Some(it) = &mut self.cur {
                if let Some(key) = it.next() {
                    return Some(key);
                }
            }
            let ((_, aec), rest) = self.rest.split_first()?;
            self.rest = rest;
            self.cur = Some(aec.iter());
        }
    }
}
