//! Scalar distance/similarity kernels. Every ranking surface in the engine
//! funnels through [`score`] so ordering and tie-breaking are bit-identical
//! whether a result came from the index or from a full scan.

use crate::error::{EngineError, Result};
use crate::value::Metric;

/// The metric's conventional value: cosine similarity, euclidean distance,
/// or dot product. Cosine with a zero-norm operand is defined as 0.
pub fn metric_value(metric: Metric, a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    match metric {
        Metric::Cosine => {
            let mut dot = 0.0f32;
            let mut na = 0.0f32;
            let mut nb = 0.0f32;
            for (x, y) in a.iter().zip(b.iter()) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na.sqrt() * nb.sqrt())
            }
        }
        Metric::Euclidean => {
            let mut sum = 0.0f32;
            for (x, y) in a.iter().zip(b.iter()) {
                let d = x - y;
                sum += d * d;
            }
            sum.sqrt()
        }
        Metric::Dot => {
            let mut dot = 0.0f32;
            for (x, y) in a.iter().zip(b.iter()) {
                dot += x * y;
            }
            dot
        }
    }
}

/// Similarity score: higher is better for every metric. Euclidean distances
/// are negated.
pub fn score(metric: Metric, a: &[f32], b: &[f32]) -> f32 {
    match metric {
        Metric::Cosine | Metric::Dot => metric_value(metric, a, b),
        Metric::Euclidean => -metric_value(metric, a, b),
    }
}

/// Distance for ORDER BY ... ASC surfaces: exactly the negated score, so
/// ascending distance order is identical to descending score order.
pub fn distance(metric: Metric, a: &[f32], b: &[f32]) -> f32 {
    -score(metric, a, b)
}

pub fn norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

pub fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(EngineError::DimensionMismatch { expected, got });
    }
    Ok(())
}
