//! Property storage for vertices and edges: one ordered map keyed by
//! (owner, field). Ordering groups an owner's fields together, so cascade
//! removal and per-owner listing are range operations.

use std::collections::BTreeMap;

use crate::codec::{Dec, Enc};
use crate::error::Result;
use crate::value::{FieldId, Owner, PropertyValue};

#[derive(Debug, Clone, Default)]
pub struct AttributeStore {
    map: BTreeMap<(Owner, FieldId), PropertyValue>,
}

impl AttributeStore {
    pub fn new() -> Self {
        AttributeStore::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Set or clear one attribute; Null clears. Returns the previous value.
    pub fn set(&mut self, owner: Owner, field: FieldId, value: PropertyValue) -> Option<PropertyValue> {
        if matches!(value, PropertyValue::Null) {
            self.map.remove(&(owner, field))
        } else {
            self.map.insert((owner, field), value)
        }
    }

    pub fn get(&self, owner: Owner, field: FieldId) -> Option<&PropertyValue> {
        self.map.get(&(owner, field))
    }

    /// Remove every attribute of one owner, returning (field, value) pairs
    /// in field order.
    pub fn remove_owner(&mut self, owner: Owner) -> Vec<(FieldId, PropertyValue)> {
        let keys: Vec<(Owner, FieldId)> = self
            .map
            .range((owner, 0)..=(owner, FieldId::MAX))
            .map(|(k, _)| *k)
            .collect();
        keys.into_iter()
            .map(|k| (k.1, self.map.remove(&k).expect("key just listed")))
            .collect()
    }

    pub fn fields_of(&self, owner: Owner) -> impl Iterator<Item = (FieldId, &PropertyValue)> {
        self.map
            .range((owner, 0)..=(owner, FieldId::MAX))
            .map(|(k, v)| (k.1, v))
    }

    /// All entries in (owner, field) order.
    pub fn iter(&self) -> impl Iterator<Item = (&(Owner, FieldId), &PropertyValue)> {
        self.map.iter()
    }

    pub fn encode(&self, enc: &mut Enc) {
        enc.u64(self.map.len() as u64);
        for ((owner, field), value) in &self.map {
            enc.owner(owner);
            enc.u16(*field);
            enc.value(value);
        }
    }

    pub fn decode(dec: &mut Dec) -> Result<AttributeStore> {
        let n = dec.u64()? as usize;
        let mut map = BTreeMap::new();
        for _ in 0..n {
            let owner = dec.owner()?;
            let field = dec.u16()?;
            let value = dec.value()?;
            map.insert((owner, field), value);
        }
        Ok(AttributeStore { map })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{EdgeKey, EdgeRef, VertexId};

    fn vo(n: u64) -> Owner {
        Owner::Vertex(VertexId::new(0, n))
    }

    fn eo(n: u64) -> Owner {
        Owner::Edge(EdgeRef {
            src: VertexId::new(0, n),
            key: EdgeKey::new(1, VertexId::new(0, n + 1), n),
        })
    }

    #[test]
    fn set_get_and_null_clears() {
        let mut a = AttributeStore::new();
        assert!(a.set(vo(1), 0, PropertyValue::Int(5)).is_none());
        assert_eq!(a.get(vo(1), 0), Some(&PropertyValue::Int(5)));
        let old = a.set(vo(1), 0, PropertyValue::Null);
        assert_eq!(old, Some(PropertyValue::Int(5)));
        assert_eq!(a.get(vo(1), 0), None);
        assert!(a.is_empty());
    }

    #[test]
    fn remove_owner_is_scoped() {
        let mut a = AttributeStore::new();
        a.set(vo(1), 0, PropertyValue::Int(1));
        a.set(vo(1), 3, PropertyValue::Text("x".into()));
        a.set(vo(2), 0, PropertyValue::Int(2));
        a.set(eo(1), 1, PropertyValue::Bool(true));
        let removed = a.remove_owner(vo(1));
        assert_eq!(removed.len(), 2);
        assert_eq!(removed[0].0, 0);
        assert_eq!(removed[1].0, 3);
        assert_eq!(a.len(), 2);
        assert_eq!(a.get(vo(2), 0), Some(&PropertyValue::Int(2)));
        assert_eq!(a.get(eo(1), 1), Some(&PropertyValue::Bool(true)));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let mut a = AttributeStore::new();
        a.set(vo(1), 0, PropertyValue::Int(-7));
        a.set(eo(2), 5, PropertyValue::Float(1.5));
        a.set(vo(3), 2, PropertyValue::Vector(vec![1.0, 2.0]));
        let mut enc = Enc::new();
        a.encode(&mut enc);
        let bytes = enc.into_bytes();
        let b = AttributeStore::decode(&mut Dec::new(&bytes)).unwrap();
        let av: Vec<_> = a.iter().collect();
        let bv: Vec<_> = b.iter().collect();
        assert_eq!(av, bv);
    }
}
