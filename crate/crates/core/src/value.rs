//! Core identifiers and the property value model.
//!
//! Vertices are addressed by `(label, local)` pairs, edges by an [`EdgeKey`]
//! relative to their source vertex. Attribute values are dynamically typed
//! [`PropertyValue`]s; the catalog constrains what a declared field accepts.

use std::cmp::Ordering;
use std::fmt;

pub type LabelId = u16;
pub type FieldId = u16;

/// Globally unique vertex identity: `(label, local)` with lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId {
    pub label: LabelId,
    pub local: u64,
}

impl VertexId {
    pub const fn new(label: LabelId, local: u64) -> Self {
        VertexId { label, local }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{})", self.label, self.local)
    }
}

/// Edge identity relative to a source vertex and a direction.
///
/// `edge_id` disambiguates parallel edges; 0 is the plain-graph case.
/// Lexicographic order on `(edge_label, neighbor, edge_id)` is the iteration
/// order of every edge container, regardless of representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub edge_label: LabelId,
    pub neighbor: VertexId,
    pub edge_id: u64,
}

impl EdgeKey {
    pub const fn new(edge_label: LabelId, neighbor: VertexId, edge_id: u64) -> Self {
        EdgeKey {
            edge_label,
            neighbor,
            edge_id,
        }
    }
}

/// A fully-qualified edge, as seen from its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub src: VertexId,
    pub key: EdgeKey,
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-[{}#{}]->{}",
            self.src, self.key.edge_label, self.key.edge_id, self.key.neighbor
        )
    }
}

/// Attribute owner: a vertex or an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    Vertex(VertexId),
    Edge(EdgeRef),
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Vertex(v) => write!(f, "{v}"),
            Owner::Edge(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Out,
    In,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Out => Direction::In,
            Direction::In => Direction::Out,
        }
    }
}

/// Similarity metric of a vector collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Cosine,
    Euclidean,
    Dot,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::Dot => "dot",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s {
            "cosine" => Some(Metric::Cosine),
            "euclidean" => Some(Metric::Euclidean),
            "dot" => Some(Metric::Dot),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One vector-store entry: the owning vertex, its embedding, and the scalar
/// payload fields that participate in filtered search.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub key: VertexId,
    pub vector: Vec<f32>,
    pub payload: Vec<(FieldId, PropertyValue)>,
}

impl Point {
    pub fn new(key: VertexId, vector: Vec<f32>) -> Self {
        Point { key, vector, payload: Vec::new() }
    }

    pub fn with_payload(
        key: VertexId,
        vector: Vec<f32>,
        payload: Vec<(FieldId, PropertyValue)>,
    ) -> Self {
        Point { key, vector, payload }
    }
}

/// Declared type of a catalog field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Bool,
    Int,
    Float,
    Text,
    Json,
    Vector(u32),
}

impl FieldType {
    pub fn name(&self) -> String {
        match self {
            FieldType::Bool => "bool".into(),
            FieldType::Int => "int".into(),
            FieldType::Float => "float".into(),
            FieldType::Text => "text".into(),
            FieldType::Json => "json".into(),
            FieldType::Vector(d) => format!("vector({d})"),
        }
    }
}

/// Dynamically typed attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Json(serde_json::Value),
    Vector(Vec<f32>),
}

impl PropertyValue {
    pub fn type_name(&self) -> String {
        match self {
            PropertyValue::Null => "null".into(),
            PropertyValue::Bool(_) => "bool".into(),
            PropertyValue::Int(_) => "int".into(),
            PropertyValue::Float(_) => "float".into(),
            PropertyValue::Text(_) => "text".into(),
            PropertyValue::Json(_) => "json".into(),
            PropertyValue::Vector(v) => format!("vector({})", v.len()),
        }
    }

    /// Whether this value is storable under the declared field type.
    /// Null is accepted everywhere; Int is accepted by Float fields.
    pub fn conforms_to(&self, ty: FieldType) -> bool {
        match (self, ty) {
            (PropertyValue::Null, _) => true,
            (PropertyValue::Bool(_), FieldType::Bool) => true,
            (PropertyValue::Int(_), FieldType::Int) => true,
            (PropertyValue::Int(_), FieldType::Float) => true,
            (PropertyValue::Float(_), FieldType::Float) => true,
            (PropertyValue::Text(_), FieldType::Text) => true,
            (PropertyValue::Json(_), FieldType::Json) => true,
            (PropertyValue::Vector(v), FieldType::Vector(d)) => v.len() == d as usize,
            _ => false,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            PropertyValue::Bool(_)
                | PropertyValue::Int(_)
                | PropertyValue::Float(_)
                | PropertyValue::Text(_)
        )
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            PropertyValue::Int(i) => Some(*i as f64),
            PropertyValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn tag_rank(&self) -> u8 {
        match self {
            PropertyValue::Null => 0,
            PropertyValue::Bool(_) => 1,
            PropertyValue::Int(_) => 2,
            PropertyValue::Float(_) => 2, // numerics compare together
            PropertyValue::Text(_) => 3,
            PropertyValue::Json(_) => 4,
            PropertyValue::Vector(_) => 5,
        }
    }

    /// Deterministic total order across all value types: rank by type class,
    /// numerics (Int/Float) compare as f64 with total_cmp tie-broken so that
    /// Int(1) and Float(1.0) order stably.
    pub fn total_cmp(&self, other: &PropertyValue) -> Ordering {
        use PropertyValue::*;
        let ra = self.tag_rank();
        let rb = other.tag_rank();
        if ra != rb {
            return ra.cmp(&rb);
        }
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Float(a), Float(b)) => a.total_cmp(b),
            (Int(a), Float(b)) => (*a as f64).total_cmp(b).then(Ordering::Less),
            (Float(a), Int(b)) => a.total_cmp(&(*b as f64)).then(Ordering::Greater),
            (Text(a), Text(b)) => a.cmp(b),
            (Json(a), Json(b)) => a.to_string().cmp(&b.to_string()),
            (Vector(a), Vector(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    let c = x.total_cmp(y);
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => unreachable!("rank equality covers remaining pairs"),
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Null => write!(f, "null"),
            PropertyValue::Bool(b) => write!(f, "{b}"),
            PropertyValue::Int(i) => write!(f, "{i}"),
            PropertyValue::Float(x) => write!(f, "{x}"),
            PropertyValue::Text(s) => write!(f, "{s}"),
            PropertyValue::Json(j) => write!(f, "{j}"),
            PropertyValue::Vector(v) => {
                write!(f, "[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Comparison semantics for query predicates: numerics compare numerically
/// across Int/Float (Int pairs exactly, mixed pairs through f64 using the
/// same conversion the payload index key order uses), text and bool compare
/// within their own type, and everything else (Null included) is
/// incomparable. Filters treat `None` as not-satisfied, so a pushed-down
/// index predicate and an in-row evaluation of the same expression agree.
pub fn compare(a: &PropertyValue, b: &PropertyValue) -> Option<Ordering> {
    use PropertyValue::*;
    match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Int(_) | Float(_), Int(_) | Float(_)) => {
            Some(a.as_f64()?.total_cmp(&b.as_f64()?))
        }
        (Text(x), Text(y)) => Some(x.cmp(y)),
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Ord wrapper for scalar payload values, used as a range-scannable index key.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadKey(pub PropertyValue);

impl Eq for PayloadKey {}

impl PartialOrd for PayloadKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PayloadKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
