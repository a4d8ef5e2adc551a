//! Payload predicates pushed into vector search. A filter is a conjunction
//! of per-field range constraints; equality is a degenerate range. The same
//! predicate can run two ways: `matches` evaluates one payload map, and
//! `candidates` range-scans the collection's payload index. Both must agree
//! with `value::compare`, otherwise a pushed-down filter would change query
//! results.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound as B;

use crate::value::{compare, FieldId, PayloadKey, PropertyValue, VertexId};

use super::segment::TOMBSTONE;

const VID_MIN: VertexId = VertexId { label: 0, local: 0 };
// The tombstone sentinel is the maximum possible id and never indexed,
// which makes it a safe upper endpoint.
const VID_MAX: VertexId = TOMBSTONE;

#[derive(Debug, Clone, PartialEq)]
pub enum Edge {
    Unbounded,
    Inclusive(PropertyValue),
    Exclusive(PropertyValue),
}

/// One field constraint: lo ≤/< value ≤/< hi under `value::compare`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangePred {
    pub field: FieldId,
    pub lo: Edge,
    pub hi: Edge,
}

impl RangePred {
    pub fn eq(field: FieldId, v: PropertyValue) -> Self {
        RangePred {
            field,
            lo: Edge::Inclusive(v.clone()),
            hi: Edge::Inclusive(v),
        }
    }

    fn satisfied_by(&self, v: &PropertyValue) -> bool {
        let lo_ok = match &self.lo {
            Edge::Unbounded => true,
            Edge::Inclusive(b) => matches!(
                compare(v, b),
                Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)
            ),
            Edge::Exclusive(b) => matches!(compare(v, b), Some(std::cmp::Ordering::Greater)),
        };
        if !lo_ok {
            return false;
        }
        match &self.hi {
            Edge::Unbounded => true,
            Edge::Inclusive(b) => matches!(
                compare(v, b),
                Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
            ),
            Edge::Exclusive(b) => matches!(compare(v, b), Some(std::cmp::Ordering::Less)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PayloadFilter {
    pub preds: Vec<RangePred>,
}

/// Whether an f64 names an exactly-representable i64.
fn int_exact(x: f64) -> Option<i64> {
    (x.fract() == 0.0 && x >= -9.223_372_036_854_776E18 && x < 9.223_372_036_854_776E18)
        .then_some(x as i64)
}

/// Key that sorts at or below every indexed value numerically equal to `v`.
/// Int sorts before Float at equal numeric value, so the low edge prefers
/// the Int form when one exists.
fn numeric_low_edge(v: &PropertyValue) -> PropertyValue {
    match v {
        PropertyValue::Int(_) => v.clone(),
        PropertyValue::Float(x) => match int_exact(*x) {
            Some(i) => PropertyValue::Int(i),
            None => v.clone(),
        },
        _ => v.clone(),
    }
}

/// Key that sorts at or above every indexed value numerically equal to `v`.
fn numeric_high_edge(v: &PropertyValue) -> PropertyValue {
    match v {
        PropertyValue::Int(i) => PropertyValue::Float(*i as f64),
        _ => v.clone(),
    }
}

fn is_numeric(v: &PropertyValue) -> bool {
    matches!(v, PropertyValue::Int(_) | PropertyValue::Float(_))
}

type IndexKey = (FieldId, PayloadKey, VertexId);

impl RangePred {
    /// Index scan bounds. The numeric zone interleaves Int and Float keys,
    /// so numeric edges widen to cover both spellings of the same value;
    /// the scan may therefore over-approximate at representation boundaries
    /// and callers re-check `matches` on the survivors.
    fn scan_bounds(&self) -> (B<IndexKey>, B<IndexKey>) {
        let lo = match &self.lo {
            Edge::Unbounded => B::Included((self.field, PayloadKey(PropertyValue::Null), VID_MIN)),
            Edge::Inclusive(v) if is_numeric(v) => {
                B::Included((self.field, PayloadKey(numeric_low_edge(v)), VID_MIN))
            }
            Edge::Inclusive(v) => B::Included((self.field, PayloadKey(v.clone()), VID_MIN)),
            Edge::Exclusive(v) if is_numeric(v) => {
                B::Excluded((self.field, PayloadKey(numeric_high_edge(v)), VID_MAX))
            }
            Edge::Exclusive(v) => B::Excluded((self.field, PayloadKey(v.clone()), VID_MAX)),
        };
        let hi = match &self.hi {
            Edge::Unbounded => match self.field.checked_add(1) {
                Some(next) => B::Excluded((next, PayloadKey(PropertyValue::Null), VID_MIN)),
                None => B::Unbounded,
            },
            Edge::Inclusive(v) if is_numeric(v) => {
                B::Included((self.field, PayloadKey(numeric_high_edge(v)), VID_MAX))
            }
            Edge::Inclusive(v) => B::Included((self.field, PayloadKey(v.clone()), VID_MAX)),
            Edge::Exclusive(v) if is_numeric(v) => {
                B::Excluded((self.field, PayloadKey(numeric_low_edge(v)), VID_MIN))
            }
            Edge::Exclusive(v) => B::Excluded((self.field, PayloadKey(v.clone()), VID_MIN)),
        };
        (lo, hi)
    }
}

impl PayloadFilter {
    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn matches(&self, payload: &BTreeMap<FieldId, PropertyValue>) -> bool {
        self.preds.iter().all(|p| {
            payload
                .get(&p.field)
                .is_some_and(|v| p.satisfied_by(v))
        })
    }

    /// Exact candidate set from the payload index: intersection of each
    /// predicate's range scan, re-checked against `matches` semantics.
    pub fn candidates(
        &self,
        index: &BTreeSet<IndexKey>,
        payloads: &BTreeMap<VertexId, BTreeMap<FieldId, PropertyValue>>,
    ) -> BTreeSet<VertexId> {
        let mut acc: Option<BTreeSet<VertexId>> = None;
        for pred in &self.preds {
            let bounds = pred.scan_bounds();
            let scanned: BTreeSet<VertexId> =
                index.range(bounds).map(|(_, _, v)| *v).collect();
            acc = Some(match acc {
                None => scanned,
                Some(prev) => prev.intersection(&scanned).copied().collect(),
            });
            if acc.as_ref().is_some_and(|s| s.is_empty()) {
                return BTreeSet::new();
            }
        }
        let mut out = acc.unwrap_or_default();
        out.retain(|v| payloads.get(v).is_some_and(|p| self.matches(p)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vid(n: u64) -> VertexId {
        VertexId::new(0, n)
    }

    fn build_index(
        rows: &[(u64, Vec<(FieldId, PropertyValue)>)],
    ) -> (
        BTreeSet<IndexKey>,
        BTreeMap<VertexId, BTreeMap<FieldId, PropertyValue>>,
    ) {
        let mut index = BTreeSet::new();
        let mut payloads = BTreeMap::new();
        for (id, fields) in rows {
            let mut m = BTreeMap::new();
            for (f, v) in fields {
                index.insert((*f, PayloadKey(v.clone()), vid(*id)));
                m.insert(*f, v.clone());
            }
            payloads.insert(vid(*id), m);
        }
        (index, payloads)
    }

    #[test]
    fn equality_covers_int_and_float_spellings() {
        let (index, payloads) = build_index(&[
            (1, vec![(0, PropertyValue::Int(30))]),
            (2, vec![(0, PropertyValue::Float(30.0))]),
            (3, vec![(0, PropertyValue::Int(31))]),
        ]);
        let f = PayloadFilter {
            preds: vec![RangePred::eq(0, PropertyValue::Int(30))],
        };
        let got = f.candidates(&index, &payloads);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![vid(1), vid(2)]);
        let g = PayloadFilter {
            preds: vec![RangePred::eq(0, PropertyValue::Float(30.0))],
        };
        let got = g.candidates(&index, &payloads);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![vid(1), vid(2)]);
    }

    #[test]
    fn range_scan_agrees_with_direct_matches() {
        let mut rows = Vec::new();
        for i in 0..200u64 {
            let v = if i % 2 == 0 {
                PropertyValue::Int(i as i64 - 100)
            } else {
                PropertyValue::Float((i as f64 - 100.0) / 2.0)
            };
            rows.push((i, vec![(5, v)]));
        }
        let (index, payloads) = build_index(&rows);
        let cases = vec![
            RangePred {
                field: 5,
                lo: Edge::Inclusive(PropertyValue::Int(-10)),
                hi: Edge::Exclusive(PropertyValue::Float(20.5)),
            },
            RangePred {
                field: 5,
                lo: Edge::Exclusive(PropertyValue::Float(0.0)),
                hi: Edge::Unbounded,
            },
            RangePred {
                field: 5,
                lo: Edge::Unbounded,
                hi: Edge::Inclusive(PropertyValue::Int(0)),
            },
        ];
        for pred in cases {
            let f = PayloadFilter { preds: vec![pred] };
            let scanned = f.candidates(&index, &payloads);
            let direct: BTreeSet<VertexId> = payloads
                .iter()
                .filter(|(_, p)| f.matches(p))
                .map(|(v, _)| *v)
                .collect();
            assert_eq!(scanned, direct, "filter: {f:?}");
        }
    }

    #[test]
    fn conjunction_intersects_fields() {
        let (index, payloads) = build_index(&[
            (1, vec![(0, PropertyValue::Text("de".into())), (1, PropertyValue::Int(20))]),
            (2, vec![(0, PropertyValue::Text("de".into())), (1, PropertyValue::Int(40))]),
            (3, vec![(0, PropertyValue::Text("fr".into())), (1, PropertyValue::Int(20))]),
        ]);
        let f = PayloadFilter {
            preds: vec![
                RangePred::eq(0, PropertyValue::Text("de".into())),
                RangePred {
                    field: 1,
                    lo: Edge::Unbounded,
                    hi: Edge::Inclusive(PropertyValue::Int(30)),
                },
            ],
        };
        let got = f.candidates(&index, &payloads);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![vid(1)]);
    }

    #[test]
    fn missing_field_never_matches() {
        let f = PayloadFilter {
            preds: vec![RangePred::eq(9, PropertyValue::Int(1))],
        };
        assert!(!f.matches(&BTreeMap::new()));
        let mut p = BTreeMap::new();
        p.insert(9u16, PropertyValue::Null);
        assert!(!f.matches(&p));
    }

    #[test]
    fn text_range_excludes_numeric_zone() {
        let (index, payloads) = build_index(&[
            (1, vec![(0, PropertyValue::Int(5))]),
            (2, vec![(0, PropertyValue::Text("abc".into()))]),
        ]);
        let f = PayloadFilter {
            preds: vec![RangePred {
                field: 0,
                lo: Edge::Inclusive(PropertyValue::Text("a".into())),
                hi: Edge::Unbounded,
            }],
        };
        let got = f.candidates(&index, &payloads);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![vid(2)]);
    }
}
