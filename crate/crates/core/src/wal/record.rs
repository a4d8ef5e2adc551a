//! Logged operation bodies. A record on disk is
//! `[len: u32][body][crc32c(body): u32]` where body = lsn + tagged op.

use crate::catalog::{
    decode_field_type, decode_metric, encode_field_type, encode_metric, SchemaChange,
};
use crate::catalog::LabelKind;
use crate::codec::{Dec, Enc};
use crate::error::{EngineError, Result};
use crate::value::{FieldId, LabelId, Metric, Owner, Point, PropertyValue, VertexId};

#[derive(Debug, Clone, PartialEq)]
pub enum WalOp {
    CreateVertex {
        v: VertexId,
    },
    DeleteVertex {
        v: VertexId,
    },
    InsertEdge {
        src: VertexId,
        edge_label: LabelId,
        dst: VertexId,
        edge_id: u64,
    },
    RemoveEdge {
        src: VertexId,
        edge_label: LabelId,
        dst: VertexId,
        edge_id: u64,
    },
    SetAttribute {
        owner: Owner,
        field: FieldId,
        value: PropertyValue,
    },
    CreateCollection {
        name: String,
        dimension: u32,
        metric: Metric,
        m: u32,
        ef_construction: u32,
    },
    DeleteCollection {
        name: String,
    },
    UpsertPoints {
        collection: String,
        points: Vec<Point>,
    },
    DeletePoints {
        collection: String,
        keys: Vec<VertexId>,
    },
    SchemaChange(SchemaChange),
}

impl WalOp {
    pub fn kind(&self) -> &'static str {
        match self {
            WalOp::CreateVertex { .. } => "CreateVertex",
            WalOp::DeleteVertex { .. } => "DeleteVertex",
            WalOp::InsertEdge { .. } => "InsertEdge",
            WalOp::RemoveEdge { .. } => "RemoveEdge",
            WalOp::SetAttribute { .. } => "SetAttribute",
            WalOp::CreateCollection { .. } => "CreateCollection",
            WalOp::DeleteCollection { .. } => "DeleteCollection",
            WalOp::UpsertPoints { .. } => "UpsertPoints",
            WalOp::DeletePoints { .. } => "DeletePoints",
            WalOp::SchemaChange(..) => "SchemaChange",
        }
    }

    pub fn encode(&self, enc: &mut Enc) {
        match self {
            WalOp::CreateVertex { v } => {
                enc.u8(0);
                enc.vertex_id(*v);
            }
            WalOp::DeleteVertex { v } => {
                enc.u8(1);
                enc.vertex_id(*v);
            }
            WalOp::InsertEdge { src, edge_label, dst, edge_id } => {
                enc.u8(2);
                enc.vertex_id(*src);
                enc.u16(*edge_label);
                enc.vertex_id(*dst);
                enc.u64(*edge_id);
            }
            WalOp::RemoveEdge { src, edge_label, dst, edge_id } => {
                enc.u8(3);
                enc.vertex_id(*src);
                enc.u16(*edge_label);
                enc.vertex_id(*dst);
                enc.u64(*edge_id);
            }
            WalOp::SetAttribute { owner, field, value } => {
                enc.u8(4);
                enc.owner(owner);
                enc.u16(*field);
                enc.value(value);
            }
            WalOp::CreateCollection { name, dimension, metric, m, ef_construction } => {
                enc.u8(5);
                enc.str(name);
                enc.u32(*dimension);
                encode_metric(enc, *metric);
                enc.u32(*m);
                enc.u32(*ef_construction);
            }
            WalOp::DeleteCollection { name } => {
                enc.u8(6);
                enc.str(name);
            }
            WalOp::UpsertPoints { collection, points } => {
                enc.u8(7);
                enc.str(collection);
                enc.u32(points.len() as u32);
                for p in points {
                    enc.vertex_id(p.key);
                    enc.u32(p.vector.len() as u32);
                    for x in &p.vector {
                        enc.f32(*x);
                    }
                    enc.u32(p.payload.len() as u32);
                    for (f, v) in &p.payload {
                        enc.u16(*f);
                        enc.value(v);
                    }
                }
            }
            WalOp::DeletePoints { collection, keys } => {
                enc.u8(8);
                enc.str(collection);
                enc.u32(keys.len() as u32);
                for k in keys {
                    enc.vertex_id(*k);
                }
            }
            WalOp::SchemaChange(change) => {
                enc.u8(9);
                match change {
                    SchemaChange::DefineLabel { name, kind } => {
                        enc.u8(0);
                        enc.str(name);
                        enc.u8(match kind {
                            LabelKind::Vertex => 0,
                            LabelKind::Edge => 1,
                        });
                    }
                    SchemaChange::DefineField { name, ftype } => {
                        enc.u8(1);
                        enc.str(name);
                        encode_field_type(enc, *ftype);
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
                        enc.u8(2);
                        enc.str(name);
                        enc.u16(*label);
                        enc.u16(*field);
                        enc.u32(*dimension);
                        encode_metric(enc, *metric);
                        enc.u32(*m);
                        enc.u32(*ef_construction);
                        enc.u32(payload_fields.len() as u32);
                        for pf in payload_fields {
                            enc.u16(*pf);
                        }
                    }
                }
            }
        }
    }

    pub fn decode(dec: &mut Dec) -> Result<WalOp> {
        Ok(match dec.u8()? {
            0 => WalOp::CreateVertex { v: dec.vertex_id()? },
            1 => WalOp::DeleteVertex { v: dec.vertex_id()? },
            2 => WalOp::InsertEdge {
                src: dec.vertex_id()?,
                edge_label: dec.u16()?,
                dst: dec.vertex_id()?,
                edge_id: dec.u64()?,
            },
            3 => WalOp::RemoveEdge {
                src: dec.vertex_id()?,
                edge_label: dec.u16()?,
                dst: dec.vertex_id()?,
                edge_id: dec.u64()?,
            },
            4 => WalOp::SetAttribute {
                owner: dec.owner()?,
                field: dec.u16()?,
                value: dec.value()?,
            },
            5 => WalOp::CreateCollection {
                name: dec.str()?,
                dimension: dec.u32()?,
                metric: decode_metric(dec)?,
                m: dec.u32()?,
                ef_construction: dec.u32()?,
            },
            6 => WalOp::DeleteCollection { name: dec.str()? },
            7 => {
                let collection = dec.str()?;
                let n = dec.u32()? as usize;
                let mut points = Vec::with_capacity(n);
                for _ in 0..n {
                    let key = dec.vertex_id()?;
                    let dim = dec.u32()? as usize;
                    let mut vector = Vec::with_capacity(dim);
                    for _ in 0..dim {
                        vector.push(dec.f32()?);
                    }
                    let np = dec.u32()? as usize;
                    let mut payload = Vec::with_capacity(np);
                    for _ in 0..np {
                        payload.push((dec.u16()?, dec.value()?));
                    }
                    points.push(Point { key, vector, payload });
                }
                WalOp::UpsertPoints { collection, points }
            }
            8 => {
                let collection = dec.str()?;
                let n = dec.u32()? as usize;
                let mut keys = Vec::with_capacity(n);
                for _ in 0..n {
                    keys.push(dec.vertex_id()?);
                }
                WalOp::DeletePoints { collection, keys }
            }
            9 => WalOp::SchemaChange(match dec.u8()? {
                0 => SchemaChange::DefineLabel {
                    name: dec.str()?,
                    kind: match dec.u8()? {
                        0 => LabelKind::Vertex,
                        1 => LabelKind::Edge,
                        t => {
                            return Err(EngineError::CorruptLog(format!("bad label kind {t}")))
                        }
                    },
                },
                1 => SchemaChange::DefineField {
                    name: dec.str()?,
                    ftype: decode_field_type(dec)?,
                },
                2 => SchemaChange::CreateVectorIndex {
                    name: dec.str()?,
                    label: dec.u16()?,
                    field: dec.u16()?,
                    dimension: dec.u32()?,
                    metric: decode_metric(dec)?,
                    m: dec.u32()?,
                    ef_construction: dec.u32()?,
                    payload_fields: {
                        let n = dec.u32()? as usize;
                        let mut pf = Vec::with_capacity(n);
                        for _ in 0..n {
                            pf.push(dec.u16()?);
                        }
                        pf
                    },
                },
                t => return Err(EngineError::CorruptLog(format!("bad schema change tag {t}"))),
            }),
            t => return Err(EngineError::CorruptLog(format!("bad wal op tag {t}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::FieldType;

    fn v(l: u16, n: u64) -> VertexId {
        VertexId::new(l, n)
    }

    #[test]
    fn every_op_roundtrips() {
        let ops = vec![
            WalOp::CreateVertex { v: v(1, 2) },
            WalOp::DeleteVertex { v: v(1, 2) },
            WalOp::InsertEdge { src: v(0, 1), edge_label: 3, dst: v(0, 2), edge_id: 9 },
            WalOp::RemoveEdge { src: v(0, 1), edge_label: 3, dst: v(0, 2), edge_id: 9 },
            WalOp::SetAttribute {
                owner: Owner::Vertex(v(0, 1)),
                field: 4,
                value: PropertyValue::Text("x".into()),
            },
            WalOp::CreateCollection {
                name: "c".into(),
                dimension: 8,
                metric: Metric::Euclidean,
                m: 16,
                ef_construction: 200,
            },
            WalOp::DeleteCollection { name: "c".into() },
            WalOp::UpsertPoints {
                collection: "c".into(),
                points: vec![Point::with_payload(
                    v(0, 1),
                    vec![1.0, 2.0],
                    vec![(0, PropertyValue::Int(3))],
                )],
            },
            WalOp::DeletePoints { collection: "c".into(), keys: vec![v(0, 1), v(0, 2)] },
            WalOp::SchemaChange(SchemaChange::DefineLabel {
                name: "person".into(),
                kind: LabelKind::Vertex,
            }),
            WalOp::SchemaChange(SchemaChange::DefineField {
                name: "emb".into(),
                ftype: FieldType::Vector(8),
            }),
            WalOp::SchemaChange(SchemaChange::CreateVectorIndex {
                name: "ix".into(),
                label: 0,
                field: 0,
                dimension: 8,
                metric: Metric::Dot,
                m: 12,
                ef_construction: 100,
                payload_fields: vec![1, 2],
            }),
        ];
        for op in &ops {
            let mut enc = Enc::new();
            op.encode(&mut enc);
            let bytes = enc.into_bytes();
            let mut dec = Dec::new(&bytes);
            assert_eq!(&WalOp::decode(&mut dec).unwrap(), op);
            assert!(dec.is_empty());
        }
    }

    #[test]
    fn bad_tag_is_corrupt_log() {
        let mut dec = Dec::new(&[0xFE]);
        assert!(matches!(
            WalOp::decode(&mut dec),
            Err(EngineError::CorruptLog(_))
        ));
    }
}
