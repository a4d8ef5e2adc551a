//! Little-endian binary encode/decode helpers shared by the WAL, checkpoint
//! images, and vector segment files, plus CRC32C.

use crate::error::{EngineError, Result};
use crate::value::{EdgeKey, EdgeRef, Owner, PropertyValue, VertexId};

// CRC32C (Castagnoli), reflected polynomial 0x82F63B78, table-driven.
static CRC32C_TABLE: [u32; 256] = build_crc32c_table();

const fn build_crc32c_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut j = 0;
        while j < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0x82F6_3B78
            } else {
                crc >> 1
            };
            j += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

pub fn crc32c(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in data {
        crc = (crc >> 8) ^ CRC32C_TABLE[((crc ^ b as u32) & 0xFF) as usize];
    }
    !crc
}

/// Append-only little-endian writer.
#[derive(Default)]
pub struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    pub fn new() -> Self {
        Enc { buf: Vec::new() }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Enc {
            buf: Vec::with_capacity(cap),
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn vertex_id(&mut self, v: VertexId) {
        self.u16(v.label);
        self.u64(v.local);
    }

    pub fn edge_key(&mut self, k: &EdgeKey) {
        self.u16(k.edge_label);
        self.vertex_id(k.neighbor);
        self.u64(k.edge_id);
    }

    pub fn owner(&mut self, o: &Owner) {
        match o {
            Owner::Vertex(v) => {
                self.u8(0);
                self.vertex_id(*v);
            }
            Owner::Edge(e) => {
                self.u8(1);
                self.vertex_id(e.src);
                self.edge_key(&e.key);
            }
        }
    }

    pub fn value(&mut self, v: &PropertyValue) {
        match v {
            PropertyValue::Null => self.u8(0),
            PropertyValue::Bool(b) => {
                self.u8(1);
                self.bool(*b);
            }
            PropertyValue::Int(i) => {
                self.u8(2);
                self.i64(*i);
            }
            PropertyValue::Float(f) => {
                self.u8(3);
                self.f64(*f);
            }
            PropertyValue::Text(s) => {
                self.u8(4);
                self.str(s);
            }
            PropertyValue::Json(j) => {
                self.u8(5);
                self.str(&j.to_string());
            }
            PropertyValue::Vector(xs) => {
                self.u8(6);
                self.u32(xs.len() as u32);
                for x in xs {
                    self.f32(*x);
                }
            }
        }
    }

    /// Append crc32c of everything written so far.
    pub fn finish_with_crc(mut self) -> Vec<u8> {
        let crc = crc32c(&self.buf);
        self.u32(crc);
        self.buf
    }
}

fn truncated(what: &str) -> EngineError {
    EngineError::CorruptLog(format!("truncated {what}"))
}

/// Checked little-endian reader over a byte slice.
pub struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Dec { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1, "u8")?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, "u16")?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, "u32")?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, "u64")?.try_into().unwrap()))
    }
    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8, "i64")?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, "f32")?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, "f64")?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool> {
        Ok(self.u8()? != 0)
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len, "string body")?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| EngineError::CorruptLog("invalid utf-8 in string".into()))
    }

    pub fn vertex_id(&mut self) -> Result<VertexId> {
        Ok(VertexId::new(self.u16()?, self.u64()?))
    }

    pub fn edge_key(&mut self) -> Result<EdgeKey> {
        Ok(EdgeKey {
            edge_label: self.u16()?,
            neighbor: self.vertex_id()?,
            edge_id: self.u64()?,
        })
    }

    pub fn owner(&mut self) -> Result<Owner> {
        match self.u8()? {
            0 => Ok(Owner::Vertex(self.vertex_id()?)),
            1 => Ok(Owner::Edge(EdgeRef {
                src: self.vertex_id()?,
                key: self.edge_key()?,
            })),
            t => Err(EngineError::CorruptLog(format!("bad owner tag {t}"))),
        }
    }

    pub fn value(&mut self) -> Result<PropertyValue> {
        match self.u8()? {
            0 => Ok(PropertyValue::Null),
            1 => Ok(PropertyValue::Bool(self.bool()?)),
            2 => Ok(PropertyValue::Int(self.i64()?)),
            3 => Ok(PropertyValue::Float(self.f64()?)),
            4 => Ok(PropertyValue::Text(self.str()?)),
            5 => {
                let s = self.str()?;
                serde_json::from_str(&s)
                    .map(PropertyValue::Json)
                    .map_err(|e| EngineError::CorruptLog(format!("bad json value: {e}")))
            }
            6 => {
                let n = self.u32()? as usize;
                let mut xs = Vec::with_capacity(n);
                for _ in 0..n {
                    xs.push(self.f32()?);
                }
                Ok(PropertyValue::Vector(xs))
            }
            t => Err(EngineError::CorruptLog(format!("bad value tag {t}"))),
        }
    }
}

/// Verify a trailing crc32c and return the payload slice in front of it.
pub fn check_trailing_crc<'a>(buf: &'a [u8], what: &str) -> Result<&'a [u8]> {
    if buf.len() < 4 {
        return Err(EngineError::CorruptCheckpoint(format!("{what}: too short")));
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32c(body) != stored {
        return Err(EngineError::CorruptCheckpoint(format!(
            "{what}: crc mismatch"
        )));
    }
    Ok(body)
}
