//! One slab of vectors with its own proximity graph. Segments are append
//! only: an overwrite or delete tombstones the old ordinal and the graph
//! keeps routing through dead nodes, they just stop surfacing as results.
//! Serialization writes the graph verbatim, so a reloaded segment answers
//! searches identically to the one that was saved.

use std::collections::HashMap;

use crate::catalog::{decode_metric, encode_metric};
use crate::codec::{check_trailing_crc, crc32c, Dec, Enc};
use crate::error::{EngineError, Result};
use crate::value::{Metric, VertexId};

use super::distance::distance;
use super::hnsw::{Entry, HnswGraph};

/// Ordinal slot whose point was overwritten or deleted.
pub const TOMBSTONE: VertexId = VertexId {
    label: u16::MAX,
    local: u64::MAX,
};

const MAGIC: &[u8; 4] = b"AVS1";

#[derive(Debug, Clone)]
pub struct Segment {
    pub id: u64,
    dim: usize,
    metric: Metric,
    sealed: bool,
    vectors: Vec<f32>,
    keys: Vec<VertexId>,
    ordinals: HashMap<VertexId, u32>,
    graph: HnswGraph,
}

impl Segment {
    pub fn new(id: u64, dim: usize, metric: Metric, m: usize, ef_construction: usize, seed: u64) -> Self {
        Segment {
            id,
            dim,
            metric,
            sealed: false,
            vectors: Vec::new(),
            keys: Vec::new(),
            ordinals: HashMap::new(),
            graph: HnswGraph::new(m, ef_construction, seed),
        }
    }

    /// Derives a per-segment level seed that differs across segments of one
    /// collection and across collections sharing segment ids.
    pub fn seed_for(collection: &str, id: u64) -> u64 {
        super::hnsw::splitmix64((crc32c(collection.as_bytes()) as u64) << 32 | id)
    }

    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    pub fn live_count(&self) -> usize {
        self.ordinals.len()
    }

    pub fn tombstone_count(&self) -> usize {
        self.keys.len() - self.ordinals.len()
    }

    pub fn tombstone_ratio(&self) -> f64 {
        if self.keys.is_empty() {
            0.0
        } else {
            self.tombstone_count() as f64 / self.keys.len() as f64
        }
    }

    pub fn sealed(&self) -> bool {
        self.sealed
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn contains(&self, key: VertexId) -> bool {
        self.ordinals.contains_key(&key)
    }

    fn row(&self, ordinal: u32) -> &[f32] {
        let start = ordinal as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn vector_of(&self, key: VertexId) -> Option<&[f32]> {
        self.ordinals.get(&key).map(|&o| self.row(o))
    }

    /// Live points in ordinal (insertion) order.
    pub fn live_points(&self) -> impl Iterator<Item = (VertexId, &[f32])> + '_ {
        self.keys
            .iter()
            .enumerate()
            .filter(|(_, k)| **k != TOMBSTONE)
            .map(|(o, k)| (*k, self.row(o as u32)))
    }

    /// Append a point. An existing live ordinal for the same key is
    /// tombstoned first. Caller has already validated the dimension.
    pub fn insert(&mut self, key: VertexId, vector: &[f32]) {
        debug_assert_eq!(vector.len(), self.dim);
        if let Some(old) = self.ordinals.remove(&key) {
            self.keys[old as usize] = TOMBSTONE;
        }
        let ordinal = self.keys.len() as u32;
        self.vectors.extend_from_slice(vector);
        self.keys.push(key);
        self.ordinals.insert(key, ordinal);
        let metric = self.metric;
        let dim = self.dim;
        let vectors = &self.vectors;
        let dist2 = |a: u32, b: u32| {
            let ra = &vectors[a as usize * dim..a as usize * dim + dim];
            let rb = &vectors[b as usize * dim..b as usize * dim + dim];
            distance(metric, ra, rb)
        };
        let got = self.graph.insert(&dist2);
        debug_assert_eq!(got, ordinal);
    }

    pub fn tombstone(&mut self, key: VertexId) -> bool {
        match self.ordinals.remove(&key) {
            Some(o) => {
                self.keys[o as usize] = TOMBSTONE;
                true
            }
            None => false,
        }
    }

    /// Graph search returning up to k live hits as (score, key), score
    /// descending, plus whether the walk drained the reachable graph. A
    /// drained walk cannot return more hits at any larger ef. `accept`
    /// further narrows which live keys may surface; tombstoned and rejected
    /// nodes are still traversed for routing.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        ef: usize,
        accept: Option<&dyn Fn(VertexId) -> bool>,
    ) -> (Vec<(f32, VertexId)>, bool) {
        debug_assert_eq!(query.len(), self.dim);
        let dist = |n: u32| distance(self.metric, query, self.row(n));
        let keys = &self.keys;
        let admit = move |n: u32| {
            let key = keys[n as usize];
            key != TOMBSTONE && accept.map_or(true, |f| f(key))
        };
        let (entries, drained) = self.graph.search(&dist, k, ef, Some(&admit));
        let hits = entries
            .into_iter()
            .map(|Entry { d, id }| (-d, self.keys[id as usize]))
            .collect();
        (hits, drained)
    }

    pub fn encode_bytes(&self) -> Vec<u8> {
        let mut enc = Enc::with_capacity(64 + self.vectors.len() * 4 + self.keys.len() * 16);
        enc.raw(MAGIC);
        enc.u64(self.id);
        enc.u32(self.dim as u32);
        encode_metric(&mut enc, self.metric);
        enc.bool(self.sealed);
        enc.u32(self.keys.len() as u32);
        for &v in &self.vectors {
            enc.f32(v);
        }
        self.graph.encode(&mut enc);
        for &k in &self.keys {
            enc.vertex_id(k);
        }
        enc.finish_with_crc()
    }

    pub fn decode_bytes(buf: &[u8]) -> Result<Segment> {
        let body = check_trailing_crc(buf, "vector segment")?;
        let mut dec = Dec::new(body);
        let mut magic = [0u8; 4];
        for b in &mut magic {
            *b = dec.u8()?;
        }
        if &magic != MAGIC {
            return Err(EngineError::CorruptCheckpoint("bad segment magic".into()));
        }
        let id = dec.u64()?;
        let dim = dec.u32()? as usize;
        let metric = decode_metric(&mut dec)?;
        let sealed = dec.bool()?;
        let n = dec.u32()? as usize;
        if dim == 0 {
            return Err(EngineError::CorruptCheckpoint("segment dimension 0".into()));
        }
        let mut vectors = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            vectors.push(dec.f32()?);
        }
        let graph = HnswGraph::decode(&mut dec)?;
        if graph.len() != n {
            return Err(EngineError::CorruptCheckpoint(
                "segment graph size mismatch".into(),
            ));
        }
        let mut keys = Vec::with_capacity(n);
        let mut ordinals = HashMap::new();
        for o in 0..n {
            let k = dec.vertex_id()?;
            if k != TOMBSTONE && ordinals.insert(k, o as u32).is_some() {
                return Err(EngineError::CorruptCheckpoint(
                    "duplicate live key in segment".into(),
                ));
            }
            keys.push(k);
        }
        if !dec.is_empty() {
            return Err(EngineError::CorruptCheckpoint(
                "trailing bytes in segment".into(),
            ));
        }
        Ok(Segment {
            id,
            dim,
            metric,
            sealed,
            vectors,
            keys,
            ordinals,
            graph,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn vid(n: u64) -> VertexId {
        VertexId::new(1, n)
    }

    fn filled_segment(n: u64, dim: usize) -> (Segment, StdRng) {
        let mut rng = StdRng::seed_from_u64(77);
        let mut seg = Segment::new(3, dim, Metric::Euclidean, 16, 100, 42);
        for i in 0..n {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            seg.insert(vid(i), &v);
        }
        (seg, rng)
    }

    #[test]
    fn overwrite_tombstones_old_ordinal() {
        let mut seg = Segment::new(0, 2, Metric::Euclidean, 4, 16, 1);
        seg.insert(vid(1), &[0.0, 0.0]);
        seg.insert(vid(2), &[5.0, 5.0]);
        seg.insert(vid(1), &[9.0, 9.0]);
        assert_eq!(seg.node_count(), 3);
        assert_eq!(seg.live_count(), 2);
        assert_eq!(seg.tombstone_count(), 1);
        assert_eq!(seg.vector_of(vid(1)), Some(&[9.0f32, 9.0][..]));
        let (hits, _) = seg.search(&[9.0, 9.0], 1, 16, None);
        assert_eq!(hits[0].1, vid(1));
        assert_eq!(hits[0].0, 0.0); // negated euclidean distance of exact match
    }

    #[test]
    fn tombstoned_points_never_surface() {
        let (mut seg, _) = filled_segment(100, 4);
        for i in 0..50 {
            assert!(seg.tombstone(vid(i)));
        }
        assert!(!seg.tombstone(vid(0)));
        let (hits, _) = seg.search(&[0.0; 4], 100, 200, None);
        assert_eq!(hits.len(), 50);
        assert!(hits.iter().all(|(_, k)| k.local >= 50));
    }

    #[test]
    fn accept_filter_narrows_results() {
        let (seg, _) = filled_segment(200, 4);
        let accept = |k: VertexId| k.local % 7 == 0;
        let (hits, _) = seg.search(&[0.0; 4], 10, 64, Some(&accept));
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|(_, k)| k.local % 7 == 0));
    }

    #[test]
    fn roundtrip_preserves_search_results_exactly() {
        let (mut seg, mut rng) = filled_segment(300, 8);
        for i in (0..300).step_by(3) {
            seg.tombstone(vid(i));
        }
        seg.seal();
        let bytes = seg.encode_bytes();
        let back = Segment::decode_bytes(&bytes).unwrap();
        assert_eq!(back.id, seg.id);
        assert!(back.sealed());
        assert_eq!(back.node_count(), seg.node_count());
        assert_eq!(back.live_count(), seg.live_count());
        for _ in 0..20 {
            let q: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let a = seg.search(&q, 10, 50, None);
            let b = back.search(&q, 10, 50, None);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn corrupt_bytes_are_rejected() {
        let (seg, _) = filled_segment(20, 4);
        let mut bytes = seg.encode_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        assert!(matches!(
            Segment::decode_bytes(&bytes),
            Err(EngineError::CorruptCheckpoint(_))
        ));
        assert!(Segment::decode_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn seed_for_distinguishes_collections_and_segments() {
        let a = Segment::seed_for("people", 0);
        let b = Segment::seed_for("people", 1);
        let c = Segment::seed_for("posts", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
