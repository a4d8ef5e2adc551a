//! Schema catalog: label and field name tables plus vector index
//! definitions. Ids are assigned in declaration order, so replaying the same
//! schema changes always reproduces the same id mapping.

use std::collections::HashMap;

use crate::codec::{Dec, Enc};
use crate::error::{EngineError, Result};
use crate::value::{FieldId, FieldType, LabelId, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Vertex,
    Edge,
}

impl LabelKind {
    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Vertex => "vertex",
            LabelKind::Edge => "edge",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabelDef {
    pub name: String,
    pub kind: LabelKind,
}

#[derive(Debug, Clone)]
pub struct FieldDef {
    pub name: String,
    pub ftype: FieldType,
}

/// A vector index declaration. The backing collection carries the index
/// name; `payload_fields` are mirrored into point payloads so they can be
/// filtered inside a vector search.
#[derive(Debug, Clone)]
pub struct VectorIndexDef {
    pub name: String,
    pub label: LabelId,
    pub field: FieldId,
    pub dimension: u32,
    pub metric: Metric,
    pub m: u32,
    pub ef_construction: u32,
    pub payload_fields: Vec<FieldId>,
}

/// One catalog mutation, WAL-logged as a schema change record.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaChange {
    DefineLabel { name: String, kind: LabelKind },
    DefineField { name: String, ftype: FieldType },
    CreateVectorIndex {
        name: String,
        label: LabelId,
        field: FieldId,
        dimension: u32,
        metric: Metric,
        m: u32,
        ef_construction: u32,
        payload_fields: Vec<FieldId>,
    },
}

#[derive(Debug, Default, Clone)]
pub struct Catalog {
    labels: Vec<LabelDef>,
    label_names: HashMap<String, LabelId>,
    fields: Vec<FieldDef>,
    field_names: HashMap<String, FieldId>,
    vector_indexes: Vec<VectorIndexDef>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn labels(&self) -> &[LabelDef] {
        &self.labels
    }

    pub fn fields(&self) -> &[FieldDef] {
        &self.fields
    }

    pub fn vector_indexes(&self) -> &[VectorIndexDef] {
        &self.vector_indexes
    }

    pub fn label_id(&self, name: &str) -> Result<LabelId> {
        self.label_names
            .get(name)
            .copied()
            .ok_or_else(|| EngineError::UnknownLabel(name.to_string()))
    }

    pub fn label_def(&self, id: LabelId) -> Result<&LabelDef> {
        self.labels
            .get(id as usize)
            .ok_or_else(|| EngineError::UnknownLabel(format!("#{id}")))
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        self.labels
            .get(id as usize)
            .map_or("?", |d| d.name.as_str())
    }

    pub fn field_id(&self, name: &str) -> Result<FieldId> {
        self.field_names
            .get(name)
            .copied()
            .ok_or_else(|| EngineError::UnknownField(name.to_string()))
    }

    pub fn field_def(&self, id: FieldId) -> Result<&FieldDef> {
        self.fields
            .get(id as usize)
            .ok_or_else(|| EngineError::UnknownField(format!("#{id}")))
    }

    pub fn field_name(&self, id: FieldId) -> &str {
        self.fields
            .get(id as usize)
            .map_or("?", |d| d.name.as_str())
    }

    pub fn vector_index(&self, name: &str) -> Option<&VectorIndexDef> {
        self.vector_indexes.iter().find(|d| d.name == name)
    }

    /// The index (and thus collection) serving a (label, field) pair.
    pub fn vector_index_for(&self, label: LabelId, field: FieldId) -> Option<&VectorIndexDef> {
        self.vector_indexes
            .iter()
            .find(|d| d.label == label && d.field == field)
    }

    /// Indexes whose payload includes `field` for vertices of `label`.
    pub fn indexes_with_payload(
        &self,
        label: LabelId,
        field: FieldId,
    ) -> impl Iterator<Item = &VectorIndexDef> {
        self.vector_indexes
            .iter()
            .filter(move |d| d.label == label && d.payload_fields.contains(&field))
    }

    pub fn indexes_on_label(&self, label: LabelId) -> impl Iterator<Item = &VectorIndexDef> {
        self.vector_indexes.iter().filter(move |d| d.label == label)
    }

    /// Validate a change against the current catalog without applying it.
    pub fn check(&self, change: &SchemaChange) -> Result<()> {
        match change {
            SchemaChange::DefineLabel { name, .. } => {
                if name.is_empty() {
                    return Err(EngineError::Schema("empty label name".into()));
                }
                if self.label_names.contains_key(name) {
                    return Err(EngineError::Schema(format!("label '{name}' already defined")));
                }
                if self.labels.len() >= LabelId::MAX as usize {
                    return Err(EngineError::Schema("label table full".into()));
                }
                Ok(())
            }
            SchemaChange::DefineField { name, ftype } => {
                if name.is_empty() {
                    return Err(EngineError::Schema("empty field name".into()));
                }
                if self.field_names.contains_key(name) {
                    return Err(EngineError::Schema(format!("field '{name}' already defined")));
                }
                if self.fields.len() >= FieldId::MAX as usize {
                    return Err(EngineError::Schema("field table full".into()));
                }
                if let FieldType::Vector(0) = ftype {
                    return Err(EngineError::BadDimension(0));
                }
                Ok(())
            }
            SchemaChange::CreateVectorIndex {
                name,
                label,
                field,
                dimension,
                payload_fields,
                ..
            } => {
                if *dimension == 0 {
                    return Err(EngineError::BadDimension(0));
                }
                if self.vector_index(name).is_some() {
                    return Err(EngineError::DuplicateCollection(name.clone()));
                }
                let ldef = self.label_def(*label)?;
                if ldef.kind != LabelKind::Vertex {
                    return Err(EngineError::Schema(format!(
                        "vector index target '{}' is not a vertex label",
                        ldef.name
                    )));
                }
                let fdef = self.field_def(*field)?;
                match fdef.ftype {
                    FieldType::Vector(d) if d == *dimension => {}
                    FieldType::Vector(d) => {
                        return Err(EngineError::DimensionMismatch {
                            expected: d as usize,
                            got: *dimension as usize,
                        })
                    }
                    _ => {
                        return Err(EngineError::Schema(format!(
                            "field '{}' is {}, not a vector field",
                            fdef.name,
                            fdef.ftype.name()
                        )))
                    }
                }
                if self.vector_index_for(*label, *field).is_some() {
                    return Err(EngineError::Schema(format!(
                        "field '{}' of label '{}' already has a vector index",
                        fdef.name, ldef.name
                    )));
                }
                for pf in payload_fields {
                    let pdef = self.field_def(*pf)?;
                    if !matches!(
                        pdef.ftype,
                        FieldType::Bool | FieldType::Int | FieldType::Float | FieldType::Text
                    ) {
                        return Err(EngineError::Schema(format!(
                            "payload field '{}' must be scalar or text",
                            pdef.name
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Apply a previously checked change. Must be called in WAL order so id
    /// assignment replays identically.
    pub fn apply(&mut self, change: &SchemaChange) {
        match change {
            SchemaChange::DefineLabel { name, kind } => {
                let id = self.labels.len() as LabelId;
                self.labels.push(LabelDef { name: name.clone(), kind: *kind });
                self.label_names.insert(name.clone(), id);
            }
            SchemaChange::DefineField { name, ftype } => {
                let id = self.fields.len() as FieldId;
                self.fields.push(FieldDef { name: name.clone(), ftype: *ftype });
                self.field_names.insert(name.clone(), id);
            }
            SchemaChange::CreateVectorIndex {
                name,
                label,
                field,
                dimension,
                metric,
                m,
                ef_construction,
                payload_fields,
            } => {
                self.vector_indexes.push(VectorIndexDef {
                    name: name.clone(),
                    label: *label,
                    field: *field,
                    dimension: *dimension,
                    metric: *metric,
                    m: *m,
                    ef_construction: *ef_construction,
                    payload_fields: payload_fields.clone(),
                });
            }
        }
    }

    pub fn encode(&self, enc: &mut Enc) {
        enc.u32(self.labels.len() as u32);
        for l in &self.labels {
            enc.str(&l.name);
            enc.u8(match l.kind {
                LabelKind::Vertex => 0,
                LabelKind::Edge => 1,
            });
        }
        enc.u32(self.fields.len() as u32);
        for f in &self.fields {
            enc.str(&f.name);
            encode_field_type(enc, f.ftype);
        }
        enc.u32(self.vector_indexes.len() as u32);
        for ix in &self.vector_indexes {
            enc.str(&ix.name);
            enc.u16(ix.label);
            enc.u16(ix.field);
            enc.u32(ix.dimension);
            encode_metric(enc, ix.metric);
            enc.u32(ix.m);
            enc.u32(ix.ef_construction);
            enc.u32(ix.payload_fields.len() as u32);
            for pf in &ix.payload_fields {
                enc.u16(*pf);
            }
        }
    }

    pub fn decode(dec: &mut Dec) -> Result<Catalog> {
        let mut cat = Catalog::new();
        let nlabels = dec.u32()?;
        for _ in 0..nlabels {
            let name = dec.str()?;
            let kind = match dec.u8()? {
                0 => LabelKind::Vertex,
                1 => LabelKind::Edge,
                t => return Err(EngineError::CorruptLog(format!("bad label kind {t}"))),
            };
            cat.apply(&SchemaChange::DefineLabel { name, kind });
        }
        let nfields = dec.u32()?;
        for _ in 0..nfields {
            let name = dec.str()?;
            let ftype = decode_field_type(dec)?;
            cat.apply(&SchemaChange::DefineField { name, ftype });
        }
        let nix = dec.u32()?;
        for _ in 0..nix {
            let name = dec.str()?;
            let label = dec.u16()?;
            let field = dec.u16()?;
            let dimension = dec.u32()?;
            let metric = decode_metric(dec)?;
            let m = dec.u32()?;
            let ef_construction = dec.u32()?;
            let npf = dec.u32()?;
            let mut payload_fields = Vec::with_capacity(npf as usize);
            for _ in 0..npf {
                payload_fields.push(dec.u16()?);
            }
            cat.apply(&SchemaChange::CreateVectorIndex {
                name,
                label,
                field,
                dimension,
                metric,
                m,
                ef_construction,
                payload_fields,
            });
        }
        Ok(cat)
    }
}

pub fn encode_field_type(enc: &mut Enc, ftype: FieldType) {
    match ftype {
        FieldType::Bool => enc.u8(0),
        FieldType::Int => enc.u8(1),
        FieldType::Float => enc.u8(2),
        FieldType::Text => enc.u8(3),
        FieldType::Json => enc.u8(4),
        FieldType::Vector(d) => {
            enc.u8(5);
            enc.u32(d);
        }
    }
}

pub fn decode_field_type(dec: &mut Dec) -> Result<FieldType> {
    Ok(match dec.u8()? {
        0 => FieldType::Bool,
        1 => FieldType::Int,
        2 => FieldType::Float,
        3 => FieldType::Text,
        4 => FieldType::Json,
        5 => FieldType::Vector(dec.u32()?),
        t => return Err(EngineError::CorruptLog(format!("bad field type tag {t}"))),
    })
}

pub fn encode_metric(enc: &mut Enc, metric: Metric) {
    enc.u8(match metric {
        Metric::Cosine => 0,
        Metric::Euclidean => 1,
        Metric::Dot => 2,
    });
}

pub fn decode_metric(dec: &mut Dec) -> Result<Metric> {
    Ok(match dec.u8()? {
        0 => Metric::Cosine,
        1 => Metric::Euclidean,
        2 => Metric::Dot,
        t => return Err(EngineError::CorruptLog(format!("bad metric tag {t}"))),
    })
}
