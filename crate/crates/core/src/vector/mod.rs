//! Vector collections: segmented storage with per-segment proximity graphs,
//! payload maps with a range-scannable index, filtered and unfiltered k-NN,
//! and tombstone compaction. Scores are "higher is better" for every metric
//! (cosine similarity, dot product, negated euclidean distance); ties break
//! on ascending key so results are stable across segmentation choices.

pub mod distance;
pub mod filter;
pub mod hnsw;
pub mod segment;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::catalog::{decode_metric, encode_metric};
use crate::codec::{Dec, Enc};
use crate::error::{EngineError, Result};
use crate::value::{FieldId, Metric, PayloadKey, Point, PropertyValue, VertexId};

use distance::{check_dims, score};
use filter::PayloadFilter;
use segment::Segment;

/// A mutable segment seals once it holds this many physical points.
pub const SEAL_LIMIT: usize = 50_000;
/// Segments at or above this tombstone share qualify for compaction.
pub const COMPACT_RATIO: f64 = 0.3;
/// Filtered searches with at most this many index candidates skip the graph
/// and score candidates directly, which is exact.
pub const BRUTE_FORCE_LIMIT: usize = 1000;
/// Search beam width when the caller leaves it unspecified.
pub const DEFAULT_EF_SEARCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub key: VertexId,
    pub score: f32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompactStats {
    pub merged_segments: usize,
    pub dropped_tombstones: usize,
    pub new_segment: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentSummary {
    pub id: u64,
    pub live: usize,
    pub physical: usize,
    pub sealed: bool,
}

#[derive(Debug, Clone)]
pub struct Collection {
    name: String,
    dimension: usize,
    metric: Metric,
    m: usize,
    ef_construction: usize,
    seal_limit: usize,
    segments: Vec<Segment>, // ascending by id
    next_segment_id: u64,
    mutable: Option<u64>,
    locator: HashMap<VertexId, u64>,
    /// One entry per live point, possibly an empty map.
    payloads: BTreeMap<VertexId, BTreeMap<FieldId, PropertyValue>>,
    payload_index: BTreeSet<(FieldId, PayloadKey, VertexId)>,
}

impl Collection {
    pub fn new(name: &str, dimension: usize, metric: Metric, m: usize, ef_construction: usize) -> Self {
        Collection {
            name: name.to_string(),
            dimension,
            metric,
            m,
            ef_construction,
            seal_limit: SEAL_LIMIT,
            segments: Vec::new(),
            next_segment_id: 0,
            mutable: None,
            locator: HashMap::new(),
            payloads: BTreeMap::new(),
            payload_index: BTreeSet::new(),
        }
    }

    /// Tuning hook for tests and benchmarks that need small segments.
    pub fn set_seal_limit(&mut self, n: usize) {
        self.seal_limit = n.max(1);
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn point_count(&self) -> usize {
        self.locator.len()
    }

    /// Physical points including tombstoned slots.
    pub fn physical_count(&self) -> usize {
        self.segments.iter().map(|s| s.node_count()).sum()
    }

    pub fn segment_summaries(&self) -> Vec<SegmentSummary> {
        self.segments
            .iter()
            .map(|s| SegmentSummary {
                id: s.id,
                live: s.live_count(),
                physical: s.node_count(),
                sealed: s.sealed(),
            })
            .collect()
    }

    pub fn contains(&self, key: VertexId) -> bool {
        self.locator.contains_key(&key)
    }

    fn seg_index(&self, id: u64) -> usize {
        self.segments
            .binary_search_by_key(&id, |s| s.id)
            .expect("segment id out of sync")
    }

    pub fn vector_of(&self, key: VertexId) -> Option<&[f32]> {
        let id = *self.locator.get(&key)?;
        self.segments[self.seg_index(id)].vector_of(key)
    }

    pub fn payload_of(&self, key: VertexId) -> Option<&BTreeMap<FieldId, PropertyValue>> {
        self.payloads.get(&key)
    }

    /// Live points in ascending key order, for canonical state comparison.
    pub fn live_points_sorted(
        &self,
    ) -> impl Iterator<Item = (VertexId, &[f32], &BTreeMap<FieldId, PropertyValue>)> + '_ {
        self.payloads.iter().map(|(k, p)| {
            (
                *k,
                self.vector_of(*k).expect("payload without point"),
                p,
            )
        })
    }

    fn unindex_payload(&mut self, key: VertexId) {
        if let Some(old) = self.payloads.remove(&key) {
            for (f, v) in old {
                self.payload_index.remove(&(f, PayloadKey(v), key));
            }
        }
    }

    fn index_payload(&mut self, key: VertexId, fields: &[(FieldId, PropertyValue)]) {
        let mut map = BTreeMap::new();
        for (f, v) in fields {
            if matches!(v, PropertyValue::Null) {
                continue;
            }
            self.payload_index.insert((*f, PayloadKey(v.clone()), key));
            map.insert(*f, v.clone());
        }
        self.payloads.insert(key, map);
    }

    /// Insert or replace a batch of points. Dimensions are validated for the
    /// whole batch before anything is applied, so a failed call leaves the
    /// collection untouched.
    pub fn upsert(&mut self, points: &[Point]) -> Result<()> {
        for p in points {
            check_dims(self.dimension, p.vector.len())?;
        }
        for p in points {
            self.upsert_one(p);
        }
        Ok(())
    }

    fn upsert_one(&mut self, p: &Point) {
        if let Some(old_seg) = self.locator.remove(&p.key) {
            let idx = self.seg_index(old_seg);
            self.segments[idx].tombstone(p.key);
        }
        self.unindex_payload(p.key);
        self.index_payload(p.key, &p.payload);

        let seg_id = match self.mutable {
            Some(id) => id,
            None => {
                let id = self.next_segment_id;
                self.next_segment_id += 1;
                self.segments.push(Segment::new(
                    id,
                    self.dimension,
                    self.metric,
                    self.m,
                    self.ef_construction,
                    Segment::seed_for(&self.name, id),
                ));
                self.mutable = Some(id);
                id
            }
        };
        let idx = self.seg_index(seg_id);
        self.segments[idx].insert(p.key, &p.vector);
        self.locator.insert(p.key, seg_id);
        if self.segments[idx].node_count() >= self.seal_limit {
            self.segments[idx].seal();
            self.mutable = None;
        }
    }

    /// Remove points by key; unknown keys are ignored. Returns how many
    /// were actually removed.
    pub fn delete(&mut self, keys: &[VertexId]) -> usize {
        let mut removed = 0;
        for key in keys {
            if let Some(seg_id) = self.locator.remove(key) {
                let idx = self.seg_index(seg_id);
                self.segments[idx].tombstone(*key);
                self.unindex_payload(*key);
                removed += 1;
            }
        }
        removed
    }

    /// Update one payload field of a live point without touching its vector.
    /// `None` clears the field. Returns false if the key has no live point.
    pub fn set_payload_field(
        &mut self,
        key: VertexId,
        field: FieldId,
        value: Option<PropertyValue>,
    ) -> bool {
        if !self.locator.contains_key(&key) {
            return false;
        }
        let map = self.payloads.entry(key).or_default();
        if let Some(old) = map.remove(&field) {
            self.payload_index.remove(&(field, PayloadKey(old), key));
        }
        if let Some(v) = value {
            if !matches!(v, PropertyValue::Null) {
                self.payload_index.insert((field, PayloadKey(v.clone()), key));
                map.insert(field, v);
            }
        }
        true
    }

    /// k-nearest search. An empty or absent filter searches every segment's
    /// graph. A filter first resolves its candidate set through the payload
    /// index: small sets are scored exhaustively (exact), larger ones run
    /// the graphs with an acceptance callback. An ef of at least the live
    /// point count is answered exhaustively either way.
    pub fn knn(
        &self,
        query: &[f32],
        k: usize,
        ef: usize,
        filter: Option<&PayloadFilter>,
    ) -> Result<Vec<ScoredPoint>> {
        check_dims(self.dimension, query.len())?;
        let mut hits: Vec<(f32, VertexId)> = Vec::new();
        match filter {
            Some(f) if !f.is_empty() => {
                let cands = f.candidates(&self.payload_index, &self.payloads);
                if cands.len() <= BRUTE_FORCE_LIMIT || ef >= self.point_count() {
                    for &key in &cands {
                        if let Some(v) = self.vector_of(key) {
                            hits.push((score(self.metric, query, v), key));
                        }
                    }
                } else {
                    let payloads = &self.payloads;
                    let accept =
                        move |key: VertexId| payloads.get(&key).is_some_and(|p| f.matches(p));
                    for seg in &self.segments {
                        // Selective filters starve the candidate list, so ef
                        // doubles until k hits surface or the walk drains.
                        let mut cur = ef.max(k);
                        loop {
                            let (res, drained) = seg.search(query, k, cur, Some(&accept));
                            if res.len() >= k || drained {
                                hits.extend(res);
                                break;
                            }
                            cur *= 2;
                        }
                    }
                }
            }
            _ => {
                if ef >= self.point_count() {
                    // A full-width search is answered exactly; the graph
                    // walk only promises to reach what the entry point can
                    // see.
                    for (key, v, _) in self.live_points_sorted() {
                        hits.push((score(self.metric, query, v), key));
                    }
                } else {
                    for seg in &self.segments {
                        hits.extend(seg.search(query, k, ef, None).0);
                    }
                }
            }
        }
        hits.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        hits.truncate(k);
        Ok(hits
            .into_iter()
            .map(|(score, key)| ScoredPoint { key, score })
            .collect())
    }

    /// Merge every segment whose tombstone share reaches the threshold into
    /// one fresh segment, dropping dead slots. The merged segment stays
    /// mutable only when it absorbed the mutable segment and is still under
    /// the seal limit.
    pub fn compact(&mut self) -> CompactStats {
        let victims: Vec<usize> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.node_count() > 0 && s.tombstone_ratio() >= COMPACT_RATIO)
            .map(|(i, _)| i)
            .collect();
        if victims.is_empty() {
            return CompactStats::default();
        }
        let merged_mutable = victims
            .iter()
            .any(|&i| Some(self.segments[i].id) == self.mutable);
        let new_id = self.next_segment_id;
        self.next_segment_id += 1;
        let mut new_seg = Segment::new(
            new_id,
            self.dimension,
            self.metric,
            self.m,
            self.ef_construction,
            Segment::seed_for(&self.name, new_id),
        );
        let mut dropped = 0;
        let mut moved: Vec<VertexId> = Vec::new();
        for &i in &victims {
            dropped += self.segments[i].tombstone_count();
            for (key, vec) in self.segments[i].live_points() {
                new_seg.insert(key, vec);
                moved.push(key);
            }
        }
        let victim_ids: BTreeSet<u64> = victims.iter().map(|&i| self.segments[i].id).collect();
        self.segments.retain(|s| !victim_ids.contains(&s.id));
        if merged_mutable {
            self.mutable = None;
        }
        let stats = CompactStats {
            merged_segments: victims.len(),
            dropped_tombstones: dropped,
            new_segment: (new_seg.node_count() > 0).then_some(new_id),
        };
        if new_seg.node_count() > 0 {
            if merged_mutable && new_seg.node_count() < self.seal_limit {
                self.mutable = Some(new_id);
            } else {
                new_seg.seal();
            }
            for key in moved {
                self.locator.insert(key, new_id);
            }
            self.segments.push(new_seg);
        }
        stats
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Everything except segment bodies; those are serialized separately.
    pub fn encode_meta(&self, enc: &mut Enc) {
        enc.str(&self.name);
        enc.u32(self.dimension as u32);
        encode_metric(enc, self.metric);
        enc.u32(self.m as u32);
        enc.u32(self.ef_construction as u32);
        enc.u64(self.seal_limit as u64);
        enc.u64(self.next_segment_id);
        enc.u64(self.mutable.unwrap_or(u64::MAX));
        enc.u32(self.segments.len() as u32);
        for s in &self.segments {
            enc.u64(s.id);
        }
        enc.u64(self.payloads.len() as u64);
        for (key, fields) in &self.payloads {
            enc.vertex_id(*key);
            enc.u16(fields.len() as u16);
            for (f, v) in fields {
                enc.u16(*f);
                enc.value(v);
            }
        }
    }

    /// Inverse of [`encode_meta`]: a collection with no segments attached
    /// yet, plus the segment ids it expects.
    pub fn decode_meta(dec: &mut Dec) -> Result<(Collection, Vec<u64>)> {
        let name = dec.str()?;
        let dimension = dec.u32()? as usize;
        let metric = decode_metric(dec)?;
        let m = dec.u32()? as usize;
        let ef_construction = dec.u32()? as usize;
        let seal_limit = dec.u64()? as usize;
        let next_segment_id = dec.u64()?;
        let mutable = match dec.u64()? {
            u64::MAX => None,
            id => Some(id),
        };
        let seg_count = dec.u32()? as usize;
        let mut expected = Vec::with_capacity(seg_count);
        for _ in 0..seg_count {
            expected.push(dec.u64()?);
        }
        let payload_count = dec.u64()? as usize;
        let mut payloads = BTreeMap::new();
        let mut payload_index = BTreeSet::new();
        for _ in 0..payload_count {
            let key = dec.vertex_id()?;
            let nf = dec.u16()? as usize;
            let mut map = BTreeMap::new();
            for _ in 0..nf {
                let f = dec.u16()?;
                let v = dec.value()?;
                payload_index.insert((f, PayloadKey(v.clone()), key));
                map.insert(f, v);
            }
            payloads.insert(key, map);
        }
        Ok((
            Collection {
                name,
                dimension,
                metric,
                m,
                ef_construction,
                seal_limit,
                segments: Vec::new(),
                next_segment_id,
                mutable,
                locator: HashMap::new(),
                payloads,
                payload_index,
            },
            expected,
        ))
    }

    /// Attach decoded segments (in expected-id order) and rebuild the
    /// locator. Validates ids, shapes, and live-key uniqueness.
    pub fn attach_segments(&mut self, segs: Vec<Segment>, expected: &[u64]) -> Result<()> {
        if segs.len() != expected.len() {
            return Err(EngineError::CorruptCheckpoint(
                "segment count mismatch".into(),
            ));
        }
        let mut locator = HashMap::new();
        for (seg, &want) in segs.iter().zip(expected) {
            if seg.id != want {
                return Err(EngineError::CorruptCheckpoint("segment id mismatch".into()));
            }
            if seg.dim() != self.dimension || seg.metric() != self.metric {
                return Err(EngineError::CorruptCheckpoint(
                    "segment shape mismatch".into(),
                ));
            }
            for (key, _) in seg.live_points() {
                if locator.insert(key, seg.id).is_some() {
                    return Err(EngineError::CorruptCheckpoint(
                        "key live in two segments".into(),
                    ));
                }
            }
        }
        if locator.len() != self.payloads.len()
            || !self.payloads.keys().all(|k| locator.contains_key(k))
        {
            return Err(EngineError::CorruptCheckpoint(
                "payload map out of sync with segments".into(),
            ));
        }
        self.segments = segs;
        self.locator = locator;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    collections: BTreeMap<String, Collection>,
}

impl VectorStore {
    pub fn new() -> Self {
        VectorStore::default()
    }

    pub fn create(
        &mut self,
        name: &str,
        dimension: usize,
        metric: Metric,
        m: usize,
        ef_construction: usize,
    ) -> Result<()> {
        if dimension == 0 {
            return Err(EngineError::BadDimension(0));
        }
        if self.collections.contains_key(name) {
            return Err(EngineError::DuplicateCollection(name.to_string()));
        }
        self.collections.insert(
            name.to_string(),
            Collection::new(name, dimension, metric, m, ef_construction),
        );
        Ok(())
    }

    /// Install a fully decoded collection.
    pub fn attach(&mut self, col: Collection) -> Result<()> {
        if self.collections.contains_key(col.name()) {
            return Err(EngineError::DuplicateCollection(col.name().to_string()));
        }
        self.collections.insert(col.name().to_string(), col);
        Ok(())
    }

    pub fn drop_collection(&mut self, name: &str) -> Result<Collection> {
        self.collections
            .remove(name)
            .ok_or_else(|| EngineError::UnknownCollection(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&Collection> {
        self.collections
            .get(name)
            .ok_or_else(|| EngineError::UnknownCollection(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Collection> {
        self.collections
            .get_mut(name)
            .ok_or_else(|| EngineError::UnknownCollection(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.collections.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Collection)> {
        self.collections.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Collection)> {
        self.collections.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.collections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collections.is_empty()
    }
}
