//! Deterministic synthetic data for benches and tests: graphs with a
//! skewed degree distribution and random vectors. Same seed, same bytes,
//! on every platform.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Directed edges with uniformly random sources and power-law destinations:
/// vertex v is chosen with weight 1/(v+1)^exponent, so low-numbered
/// vertices become heavily linked hubs. Self-loops and parallel edges are
/// possible, as in scraped real-world graphs.
pub fn power_law_edges(seed: u64, vertices: u64, edges: u64, exponent: f64) -> Vec<(u64, u64)> {
    assert!(vertices > 0, "need at least one vertex");
    let mut cumulative = Vec::with_capacity(vertices as usize);
    let mut total = 0.0f64;
    for i in 0..vertices {
        total += ((i + 1) as f64).powf(-exponent);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..edges)
        .map(|_| {
            let src = rng.gen_range(0..vertices);
            let r = rng.gen_range(0.0..total);
            let dst = cumulative.partition_point(|&c| c <= r) as u64;
            (src, dst.min(vertices - 1))
        })
        .collect()
}

/// `count` vectors of `dim` coordinates, each uniform in [-1, 1).
pub fn random_vectors(seed: u64, count: usize, dim: usize) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
        .collect()
}
