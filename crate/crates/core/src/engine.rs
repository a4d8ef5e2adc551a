//! The database: one in-memory state behind a reader-writer lock, one
//! write-ahead log behind a mutex. Every mutation is validated, appended to
//! the log, then applied; replay uses the same applier, so a recovered
//! engine converges on the same state byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use parking_lot::{Mutex, RwLock, RwLockReadGuard};
use serde::Serialize;

use crate::attrs::AttributeStore;
use crate::catalog::{Catalog, LabelKind, SchemaChange};
use crate::checkpoint;
use crate::codec::Enc;
use crate::error::{EngineError, Result};
use crate::graph::cache::LruCache;
use crate::graph::{GraphTopology, TopologyFootprint};
use crate::value::{
    Direction, EdgeKey, EdgeRef, FieldId, FieldType, LabelId, Metric, Owner, Point,
    PropertyValue, VertexId,
};
use crate::vector::filter::PayloadFilter;
use crate::vector::{CompactStats, ScoredPoint, VectorStore, DEFAULT_EF_SEARCH};
use crate::wal::record::WalOp;
use crate::wal::{Durability, Wal, WalOptions};

#[derive(Debug, Clone)]
pub struct EngineOptions {
    /// Edge-collection representation threshold: counts at or below stay
    /// arrays, above become ordered sets. 0 forces all sets, usize::MAX all
    /// arrays.
    pub threshold: usize,
    pub durability: Durability,
    pub max_segment_bytes: u64,
    /// Attribute read cache entries; 0 disables.
    pub cache_capacity: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            threshold: 128,
            durability: Durability::Always,
            max_segment_bytes: 64 * 1024 * 1024,
            cache_capacity: 8192,
        }
    }
}

/// Everything the log determines. Guarded by the database's RwLock; readers
/// see consistent snapshots, writers serialize.
pub struct State {
    pub catalog: Catalog,
    pub topo: GraphTopology,
    pub attrs: AttributeStore,
    pub vectors: VectorStore,
    pub applied_lsn: u64,
}

impl State {
    pub fn empty(threshold: usize) -> State {
        State {
            catalog: Catalog::new(),
            topo: GraphTopology::new(threshold),
            attrs: AttributeStore::new(),
            vectors: VectorStore::new(),
            applied_lsn: 0,
        }
    }

    /// Attribute lookup that routes vector-indexed fields to their backing
    /// collection. For readers that already hold the state lock and know the
    /// owner exists; bypasses the property cache.
    pub fn attribute(&self, owner: Owner, field: FieldId) -> Option<PropertyValue> {
        if let Owner::Vertex(v) = owner {
            if let Some(def) = self.catalog.vector_index_for(v.label, field) {
                let col = self.vectors.get(&def.name).ok()?;
                return col.vector_of(v).map(|s| PropertyValue::Vector(s.to_vec()));
            }
        }
        self.attrs.get(owner, field).cloned()
    }

    /// Logical content in one deterministic byte string: catalog, topology
    /// image, attributes, and each collection's live points. Physical
    /// details (segmentation, graph links, lsns) are excluded, so two
    /// engines that applied the same operations compare equal regardless of
    /// how they got there.
    pub fn canonical_image(&self) -> Vec<u8> {
        let mut enc = Enc::new();
        self.catalog.encode(&mut enc);
        self.topo.encode_image(&mut enc);
        self.attrs.encode(&mut enc);
        enc.u32(self.vectors.len() as u32);
        for (name, col) in self.vectors.iter() {
            enc.str(name);
            enc.u32(col.dimension() as u32);
            crate::catalog::encode_metric(&mut enc, col.metric());
            enc.u64(col.point_count() as u64);
            for (key, vector, payload) in col.live_points_sorted() {
                enc.vertex_id(key);
                for &x in vector {
                    enc.f32(x);
                }
                enc.u16(payload.len() as u16);
                for (f, v) in payload {
                    enc.u16(*f);
                    enc.value(v);
                }
            }
        }
        enc.into_bytes()
    }
}

/// Check an operation against current state. Everything `apply` assumes is
/// verified here, which is why apply itself never fails.
pub(crate) fn validate(state: &State, op: &WalOp) -> Result<()> {
    match op {
        WalOp::CreateVertex { v } => {
            let def = state.catalog.label_def(v.label)?;
            if def.kind != LabelKind::Vertex {
                return Err(EngineError::Schema(format!(
                    "label '{}' is an edge label, not a vertex label",
                    def.name
                )));
            }
            if state.topo.contains_vertex(*v) {
                return Err(EngineError::DuplicateVertex(*v));
            }
            Ok(())
        }
        WalOp::DeleteVertex { v } => {
            if !state.topo.contains_vertex(*v) {
                return Err(EngineError::UnknownVertex(*v));
            }
            Ok(())
        }
        WalOp::InsertEdge {
            src,
            edge_label,
            dst,
            edge_id,
        } => {
            let def = state.catalog.label_def(*edge_label)?;
            if def.kind != LabelKind::Edge {
                return Err(EngineError::Schema(format!(
                    "label '{}' is not an edge label",
                    def.name
                )));
            }
            if !state.topo.contains_vertex(*src) {
                return Err(EngineError::UnknownVertex(*src));
            }
            if !state.topo.contains_vertex(*dst) {
                return Err(EngineError::UnknownVertex(*dst));
            }
            if state.topo.has_edge(*src, *edge_label, *dst, *edge_id) {
                return Err(EngineError::Schema(format!(
                    "edge id {edge_id} already exists between {src} and {dst}"
                )));
            }
            Ok(())
        }
        WalOp::RemoveEdge {
            src,
            edge_label,
            dst,
            edge_id,
        } => {
            if !state.topo.contains_vertex(*src) {
                return Err(EngineError::UnknownVertex(*src));
            }
            if !state.topo.has_edge(*src, *edge_label, *dst, *edge_id) {
                return Err(EngineError::UnknownEdge(format!(
                    "{src}-[{}#{edge_id}]->{dst}",
                    state.catalog.label_name(*edge_label)
                )));
            }
            Ok(())
        }
        WalOp::SetAttribute {
            owner,
            field,
            value,
        } => {
            let def = state.catalog.field_def(*field)?;
            if !value.conforms_to(def.ftype) {
                return Err(EngineError::TypeMismatch {
                    field: def.name.clone(),
                    expected: def.ftype.name().to_string(),
                    got: value.type_name().to_string(),
                });
            }
            match owner {
                Owner::Vertex(v) => {
                    if !state.topo.contains_vertex(*v) {
                        return Err(EngineError::UnknownVertex(*v));
                    }
                }
                Owner::Edge(e) => {
                    if !state
                        .topo
                        .has_edge(e.src, e.key.edge_label, e.key.neighbor, e.key.edge_id)
                    {
                        return Err(EngineError::UnknownEdge(e.to_string()));
                    }
                }
            }
            Ok(())
        }
        WalOp::CreateCollection {
            name, dimension, ..
        } => {
            if *dimension == 0 {
                return Err(EngineError::BadDimension(0));
            }
            if state.vectors.contains(name) {
                return Err(EngineError::DuplicateCollection(name.clone()));
            }
            Ok(())
        }
        WalOp::DeleteCollection { name } => {
            state.vectors.get(name)?;
            if state.catalog.vector_indexes().iter().any(|d| &d.name == name) {
                return Err(EngineError::Schema(format!(
                    "collection '{name}' backs a vector index and cannot be dropped directly"
                )));
            }
            Ok(())
        }
        WalOp::UpsertPoints { collection, points } => {
            let col = state.vectors.get(collection)?;
            for p in points {
                if p.vector.len() != col.dimension() {
                    return Err(EngineError::DimensionMismatch {
                        expected: col.dimension(),
                        got: p.vector.len(),
                    });
                }
                if !state.topo.contains_vertex(p.key) {
                    return Err(EngineError::UnknownVertex(p.key));
                }
                for (f, v) in &p.payload {
                    if !matches!(
                        v,
                        PropertyValue::Null
                            | PropertyValue::Bool(_)
                            | PropertyValue::Int(_)
                            | PropertyValue::Float(_)
                            | PropertyValue::Text(_)
                    ) {
                        return Err(EngineError::BadPayloadValue(format!(
                            "field {} holds {}, payloads take scalars",
                            state.catalog.field_name(*f),
                            v.type_name()
                        )));
                    }
                }
            }
            Ok(())
        }
        WalOp::DeletePoints { collection, .. } => {
            state.vectors.get(collection)?;
            Ok(())
        }
        WalOp::SchemaChange(change) => {
            state.catalog.check(change)?;
            if let SchemaChange::CreateVectorIndex { name, .. } = change {
                if state.vectors.contains(name) {
                    return Err(EngineError::DuplicateCollection(name.clone()));
                }
            }
            Ok(())
        }
    }
}

/// Apply a validated operation. Shared by the live write path and replay;
/// must stay deterministic given (state, op).
pub(crate) fn apply(state: &mut State, op: &WalOp) {
    match op {
        WalOp::CreateVertex { v } => {
            let created = state.topo.create_vertex(*v);
            debug_assert!(created, "validated vertex create failed");
        }
        WalOp::DeleteVertex { v } => {
            let removed = state
                .topo
                .delete_vertex(*v)
                .expect("validated vertex delete failed");
            for e in &removed {
                state.attrs.remove_owner(Owner::Edge(*e));
            }
            state.attrs.remove_owner(Owner::Vertex(*v));
            for (_, col) in state.vectors.iter_mut() {
                col.delete(&[*v]);
            }
        }
        WalOp::InsertEdge {
            src,
            edge_label,
            dst,
            edge_id,
        } => {
            let inserted = state
                .topo
                .insert_edge(*src, *edge_label, *dst, *edge_id)
                .expect("validated edge insert failed");
            debug_assert!(inserted);
        }
        WalOp::RemoveEdge {
            src,
            edge_label,
            dst,
            edge_id,
        } => {
            let removed = state
                .topo
                .remove_edge(*src, *edge_label, *dst, *edge_id)
                .expect("validated edge remove failed");
            debug_assert!(removed);
            state.attrs.remove_owner(Owner::Edge(EdgeRef {
                src: *src,
                key: EdgeKey::new(*edge_label, *dst, *edge_id),
            }));
        }
        WalOp::SetAttribute {
            owner,
            field,
            value,
        } => apply_set_attribute(state, *owner, *field, value),
        WalOp::CreateCollection {
            name,
            dimension,
            metric,
            m,
            ef_construction,
        } => {
            state
                .vectors
                .create(
                    name,
                    *dimension as usize,
                    *metric,
                    *m as usize,
                    *ef_construction as usize,
                )
                .expect("validated collection create failed");
        }
        WalOp::DeleteCollection { name } => {
            state
                .vectors
                .drop_collection(name)
                .expect("validated collection drop failed");
        }
        WalOp::UpsertPoints { collection, points } => {
            state
                .vectors
                .get_mut(collection)
                .expect("validated collection")
                .upsert(points)
                .expect("validated dimensions");
        }
        WalOp::DeletePoints { collection, keys } => {
            state
                .vectors
                .get_mut(collection)
                .expect("validated collection")
                .delete(keys);
        }
        WalOp::SchemaChange(change) => {
            state.catalog.apply(change);
            if let SchemaChange::CreateVectorIndex {
                name,
                label,
                field,
                dimension,
                metric,
                m,
                ef_construction,
                payload_fields,
            } = change
            {
                state
                    .vectors
                    .create(
                        name,
                        *dimension as usize,
                        *metric,
                        *m as usize,
                        *ef_construction as usize,
                    )
                    .expect("validated index collection create failed");
                backfill_index(state, name, *label, *field, payload_fields);
            }
        }
    }
}

/// Move pre-existing vector attribute values of (label, field) into the
/// freshly created index collection, in ascending vertex order.
fn backfill_index(
    state: &mut State,
    collection: &str,
    label: LabelId,
    field: FieldId,
    payload_fields: &[FieldId],
) {
    let vertices: Vec<VertexId> = state.topo.vertices_of_label(label).collect();
    let mut points = Vec::new();
    for v in vertices {
        let owner = Owner::Vertex(v);
        if let Some(PropertyValue::Vector(data)) = state.attrs.get(owner, field) {
            let data = data.clone();
            let payload = gather_payload(state, owner, payload_fields);
            points.push(Point::with_payload(v, data, payload));
            state.attrs.set(owner, field, PropertyValue::Null);
        }
    }
    if !points.is_empty() {
        state
            .vectors
            .get_mut(collection)
            .expect("collection just created")
            .upsert(&points)
            .expect("schema guarantees dimensions");
    }
}

fn gather_payload(
    state: &State,
    owner: Owner,
    payload_fields: &[FieldId],
) -> Vec<(FieldId, PropertyValue)> {
    payload_fields
        .iter()
        .filter_map(|&pf| state.attrs.get(owner, pf).map(|v| (pf, v.clone())))
        .collect()
}

/// Attribute writes route by schema: a value on a vector-indexed field
/// lives in the collection (and only there); a value on a payload field of
/// some index mirrors into that index's payload before landing in the
/// attribute store like any other.
fn apply_set_attribute(state: &mut State, owner: Owner, field: FieldId, value: &PropertyValue) {
    if let Owner::Vertex(v) = owner {
        if let Some(def) = state.catalog.vector_index_for(v.label, field) {
            let name = def.name.clone();
            let payload_fields = def.payload_fields.clone();
            match value {
                PropertyValue::Null => {
                    state
                        .vectors
                        .get_mut(&name)
                        .expect("index-backed collection")
                        .delete(&[v]);
                }
                PropertyValue::Vector(data) => {
                    let payload = gather_payload(state, owner, &payload_fields);
                    state
                        .vectors
                        .get_mut(&name)
                        .expect("index-backed collection")
                        .upsert(&[Point::with_payload(v, data.clone(), payload)])
                        .expect("schema guarantees dimensions");
                }
                _ => unreachable!("validated against the vector field type"),
            }
            return;
        }
        let mirrors: Vec<String> = state
            .catalog
            .indexes_with_payload(v.label, field)
            .map(|d| d.name.clone())
            .collect();
        for name in mirrors {
            let val = match value {
                PropertyValue::Null => None,
                other => Some(other.clone()),
            };
            state
                .vectors
                .get_mut(&name)
                .expect("index-backed collection")
                .set_payload_field(v, field, val);
        }
    }
    state.attrs.set(owner, field, value.clone());
}

#[derive(Debug, Clone, Serialize)]
pub struct CollectionInfo {
    pub name: String,
    pub dimension: usize,
    pub metric: String,
    pub points: usize,
    pub physical_points: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineStats {
    pub vertices: u64,
    pub edges: u64,
    pub attributes: u64,
    pub labels: usize,
    pub fields: usize,
    pub applied_lsn: u64,
    pub checkpoint_lsn: u64,
    pub wal_segments: usize,
    pub footprint: TopologyFootprint,
    pub collections: Vec<CollectionInfo>,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

type AttrCache = LruCache<(Owner, FieldId), PropertyValue>;

pub struct Database {
    dir: PathBuf,
    opts: EngineOptions,
    state: RwLock<State>,
    wal: Mutex<Wal>,
    cache: Mutex<AttrCache>,
    checkpoint_lsn: AtomicU64,
    ckpt_guard: Mutex<()>,
}

impl Database {
    /// Open or create a database under `dir`. Recovery loads the newest
    /// usable checkpoint (older ones are tried if the newest is damaged)
    /// and replays the log tail; a damaged log tail is truncated at the
    /// first bad frame.
    pub fn open(dir: &Path, opts: EngineOptions) -> Result<Database> {
        Self::open_inner(dir, opts, true)
    }

    /// Open ignoring checkpoints entirely, rebuilding from the full log.
    /// The log must reach back to lsn 1.
    pub fn open_replay_only(dir: &Path, opts: EngineOptions) -> Result<Database> {
        Self::open_inner(dir, opts, false)
    }

    fn open_inner(dir: &Path, opts: EngineOptions, use_checkpoints: bool) -> Result<Database> {
        fs::create_dir_all(dir)?;
        let ckpt_root = dir.join("checkpoint");
        let (mut state, ck_lsn) = if use_checkpoints {
            match checkpoint::load_best(&ckpt_root, opts.threshold)? {
                Some((s, lsn)) => (s, lsn),
                None => (State::empty(opts.threshold), 0),
            }
        } else {
            (State::empty(opts.threshold), 0)
        };

        let wal_opts = WalOptions {
            durability: opts.durability,
            max_segment_bytes: opts.max_segment_bytes,
        };
        let (mut wal, records) = Wal::open(&dir.join("wal"), wal_opts)?;

        if let Some(&(first, _)) = records.first() {
            if first > state.applied_lsn + 1 {
                return Err(EngineError::CorruptCheckpoint(format!(
                    "log starts at lsn {first} but recovered state ends at {}; \
                     intervening records were pruned",
                    state.applied_lsn
                )));
            }
        } else if state.applied_lsn == 0 && crate::wal::first_lsn(&dir.join("wal"))?.is_some() {
            // Segments exist but hold no valid records; Wal::open already
            // truncated them. Nothing to replay.
        }
        for (lsn, op) in &records {
            if *lsn > state.applied_lsn {
                apply(&mut state, op);
                state.applied_lsn = *lsn;
            }
        }
        if wal.next_lsn() <= state.applied_lsn {
            wal.reset_to(state.applied_lsn + 1)?;
        }

        Ok(Database {
            dir: dir.to_path_buf(),
            cache: Mutex::new(LruCache::new(opts.cache_capacity)),
            opts,
            state: RwLock::new(state),
            wal: Mutex::new(wal),
            checkpoint_lsn: AtomicU64::new(ck_lsn),
            ckpt_guard: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn options(&self) -> &EngineOptions {
        &self.opts
    }

    pub(crate) fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read()
    }

    /// Validate, log, apply. The state is untouched when logging fails.
    fn write_locked(&self, state: &mut State, op: WalOp) -> Result<u64> {
        validate(state, &op)?;
        let lsn = self.wal.lock().append(&op)?;
        apply(state, &op);
        state.applied_lsn = lsn;
        self.invalidate_cache(&op);
        Ok(lsn)
    }

    pub(crate) fn write_op(&self, op: WalOp) -> Result<u64> {
        let mut state = self.state.write();
        self.write_locked(&mut state, op)
    }

    fn invalidate_cache(&self, op: &WalOp) {
        match op {
            WalOp::SetAttribute { owner, field, .. } => {
                self.cache.lock().remove(&(*owner, *field));
            }
            WalOp::DeleteVertex { .. }
            | WalOp::RemoveEdge { .. }
            | WalOp::SchemaChange(_) => {
                self.cache.lock().clear();
            }
            _ => {}
        }
    }

    // Schema -----------------------------------------------------------

    pub fn define_label(&self, name: &str, kind: LabelKind) -> Result<LabelId> {
        let mut state = self.state.write();
        let id = state.catalog.labels().len() as LabelId;
        self.write_locked(
            &mut state,
            WalOp::SchemaChange(SchemaChange::DefineLabel {
                name: name.to_string(),
                kind,
            }),
        )?;
        Ok(id)
    }

    pub fn define_field(&self, name: &str, ftype: FieldType) -> Result<FieldId> {
        let mut state = self.state.write();
        let id = state.catalog.fields().len() as FieldId;
        self.write_locked(
            &mut state,
            WalOp::SchemaChange(SchemaChange::DefineField {
                name: name.to_string(),
                ftype,
            }),
        )?;
        Ok(id)
    }

    /// Create a vector index over (label, field). The index owns a
    /// collection named after it; existing vector values on that field are
    /// migrated in.
    pub fn create_vector_index(
        &self,
        name: &str,
        label: LabelId,
        field: FieldId,
        metric: Metric,
        m: u32,
        ef_construction: u32,
        payload_fields: Vec<FieldId>,
    ) -> Result<()> {
        let mut state = self.state.write();
        let dimension = match state.catalog.field_def(field)?.ftype {
            FieldType::Vector(d) => d,
            other => {
                return Err(EngineError::Schema(format!(
                    "field '{}' is {}, a vector index needs a vector field",
                    state.catalog.field_name(field),
                    other.name()
                )))
            }
        };
        self.write_locked(
            &mut state,
            WalOp::SchemaChange(SchemaChange::CreateVectorIndex {
                name: name.to_string(),
                label,
                field,
                dimension,
                metric,
                m,
                ef_construction,
                payload_fields,
            }),
        )?;
        Ok(())
    }

    pub fn label_id(&self, name: &str) -> Result<LabelId> {
        self.state.read().catalog.label_id(name)
    }

    pub fn field_id(&self, name: &str) -> Result<FieldId> {
        self.state.read().catalog.field_id(name)
    }

    // Graph ------------------------------------------------------------

    pub fn create_vertex(&self, label: LabelId) -> Result<VertexId> {
        let mut state = self.state.write();
        let v = VertexId::new(label, state.topo.alloc_local(label));
        self.write_locked(&mut state, WalOp::CreateVertex { v })?;
        Ok(v)
    }

    /// Create a vertex with a caller-chosen id.
    pub fn create_vertex_at(&self, v: VertexId) -> Result<()> {
        self.write_op(WalOp::CreateVertex { v })?;
        Ok(())
    }

    pub fn delete_vertex(&self, v: VertexId) -> Result<()> {
        self.write_op(WalOp::DeleteVertex { v })?;
        Ok(())
    }

    pub fn insert_edge(&self, src: VertexId, label: LabelId, dst: VertexId) -> Result<EdgeRef> {
        let mut state = self.state.write();
        let edge_id = state.topo.alloc_edge_id();
        self.write_locked(
            &mut state,
            WalOp::InsertEdge {
                src,
                edge_label: label,
                dst,
                edge_id,
            },
        )?;
        Ok(EdgeRef {
            src,
            key: EdgeKey::new(label, dst, edge_id),
        })
    }

    pub fn remove_edge(&self, e: EdgeRef) -> Result<()> {
        self.write_op(WalOp::RemoveEdge {
            src: e.src,
            edge_label: e.key.edge_label,
            dst: e.key.neighbor,
            edge_id: e.key.edge_id,
        })?;
        Ok(())
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.state.read().topo.contains_vertex(v)
    }

    pub fn degree(&self, v: VertexId, dir: Direction) -> Result<u64> {
        self.state.read().topo.degree(v, dir)
    }

    /// Incident edges as true (src → dst) references, ascending by
    /// (edge label, far vertex, edge id).
    pub fn edges_of(
        &self,
        v: VertexId,
        dir: Direction,
        label: Option<LabelId>,
    ) -> Result<Vec<EdgeRef>> {
        let state = self.state.read();
        let iter = state.topo.neighbors(v, dir, label)?;
        Ok(iter
            .map(|key| match dir {
                Direction::Out => EdgeRef { src: v, key: *key },
                Direction::In => EdgeRef {
                    src: key.neighbor,
                    key: EdgeKey::new(key.edge_label, v, key.edge_id),
                },
            })
            .collect())
    }

    pub fn vertices_of_label(&self, label: LabelId) -> Vec<VertexId> {
        self.state.read().topo.vertices_of_label(label).collect()
    }

    // Attributes --------------------------------------------------------

    pub fn set_attribute(&self, owner: Owner, field: FieldId, value: PropertyValue) -> Result<()> {
        self.write_op(WalOp::SetAttribute {
            owner,
            field,
            value,
        })?;
        Ok(())
    }

    /// Read one attribute. Vector-indexed fields are served from their
    /// collection; everything else from the attribute store through the
    /// read cache.
    pub fn get_attribute(&self, owner: Owner, field: FieldId) -> Result<Option<PropertyValue>> {
        let state = self.state.read();
        state.catalog.field_def(field)?;
        match owner {
            Owner::Vertex(v) => {
                if !state.topo.contains_vertex(v) {
                    return Err(EngineError::UnknownVertex(v));
                }
                if let Some(def) = state.catalog.vector_index_for(v.label, field) {
                    let col = state.vectors.get(&def.name)?;
                    return Ok(col.vector_of(v).map(|s| PropertyValue::Vector(s.to_vec())));
                }
            }
            Owner::Edge(e) => {
                if !state
                    .topo
                    .has_edge(e.src, e.key.edge_label, e.key.neighbor, e.key.edge_id)
                {
                    return Err(EngineError::UnknownEdge(e.to_string()));
                }
            }
        }
        let mut cache = self.cache.lock();
        if let Some(v) = cache.get(&(owner, field)) {
            return Ok(Some(v.clone()));
        }
        match state.attrs.get(owner, field) {
            Some(v) => {
                cache.insert((owner, field), v.clone());
                Ok(Some(v.clone()))
            }
            None => Ok(None),
        }
    }

    // Vectors ------------------------------------------------------------

    pub fn create_collection(&self, name: &str, dimension: u32, metric: Metric) -> Result<()> {
        self.create_collection_with(name, dimension, metric, 16, 200)
    }

    pub fn create_collection_with(
        &self,
        name: &str,
        dimension: u32,
        metric: Metric,
        m: u32,
        ef_construction: u32,
    ) -> Result<()> {
        self.write_op(WalOp::CreateCollection {
            name: name.to_string(),
            dimension,
            metric,
            m,
            ef_construction,
        })?;
        Ok(())
    }

    pub fn delete_collection(&self, name: &str) -> Result<()> {
        self.write_op(WalOp::DeleteCollection {
            name: name.to_string(),
        })?;
        Ok(())
    }

    /// Insert or replace points as one atomic batch: any bad dimension,
    /// unknown vertex, or non-scalar payload rejects the whole call.
    pub fn bulk_upsert(&self, collection: &str, points: Vec<Point>) -> Result<()> {
        self.write_op(WalOp::UpsertPoints {
            collection: collection.to_string(),
            points,
        })?;
        Ok(())
    }

    pub fn delete_points(&self, collection: &str, keys: Vec<VertexId>) -> Result<()> {
        self.write_op(WalOp::DeletePoints {
            collection: collection.to_string(),
            keys,
        })?;
        Ok(())
    }

    pub fn knn_search(
        &self,
        collection: &str,
        query: &[f32],
        k: usize,
        ef: Option<usize>,
        filter: Option<&PayloadFilter>,
    ) -> Result<Vec<ScoredPoint>> {
        let state = self.state.read();
        let col = state.vectors.get(collection)?;
        col.knn(query, k, ef.unwrap_or(DEFAULT_EF_SEARCH), filter)
    }

    /// Merge tombstone-heavy segments. Physical reorganization only: the
    /// log is not involved and logical content is unchanged.
    pub fn compact(&self, collection: &str) -> Result<CompactStats> {
        let mut state = self.state.write();
        let col = state.vectors.get_mut(collection)?;
        Ok(col.compact())
    }

    // Durability ----------------------------------------------------------

    /// Write a checkpoint of the current state and return its lsn. Readers
    /// proceed during the write; writers wait.
    pub fn checkpoint(&self) -> Result<u64> {
        let _serialize = self.ckpt_guard.lock();
        let state = self.state.read();
        let lsn = state.applied_lsn;
        checkpoint::write(&self.dir.join("checkpoint"), &state)?;
        drop(state);
        self.checkpoint_lsn.store(lsn, AtomicOrdering::SeqCst);
        Ok(lsn)
    }

    pub fn checkpoint_lsn(&self) -> u64 {
        self.checkpoint_lsn.load(AtomicOrdering::SeqCst)
    }

    /// Drop log segments wholly below `upto`, which must not exceed the
    /// last checkpoint.
    pub fn prune_wal(&self, upto: u64) -> Result<usize> {
        let ck = self.checkpoint_lsn();
        if upto > ck {
            return Err(EngineError::PruneBeyondCheckpoint {
                requested: upto,
                checkpoint: ck,
            });
        }
        self.wal.lock().prune(upto)
    }

    pub fn sync(&self) -> Result<()> {
        self.wal.lock().sync()
    }

    pub fn applied_lsn(&self) -> u64 {
        self.state.read().applied_lsn
    }

    pub fn canonical_image(&self) -> Vec<u8> {
        self.state.read().canonical_image()
    }

    pub fn stats(&self) -> EngineStats {
        let state = self.state.read();
        let cache = self.cache.lock().stats();
        let wal_segments = self.wal.lock().segment_count().unwrap_or(0);
        EngineStats {
            vertices: state.topo.vertex_count(),
            edges: state.topo.edge_count(),
            attributes: state.attrs.len() as u64,
            labels: state.catalog.labels().len(),
            fields: state.catalog.fields().len(),
            applied_lsn: state.applied_lsn,
            checkpoint_lsn: self.checkpoint_lsn(),
            wal_segments,
            footprint: state.topo.footprint(),
            collections: state
                .vectors
                .iter()
                .map(|(name, c)| CollectionInfo {
                    name: name.clone(),
                    dimension: c.dimension(),
                    metric: c.metric().name().to_string(),
                    points: c.point_count(),
                    physical_points: c.physical_count(),
                    segments: c.segment_summaries().len(),
                })
                .collect(),
            cache_hits: cache.hits,
            cache_misses: cache.misses,
        }
    }
}
