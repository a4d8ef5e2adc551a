use std::time::Instant;

use arcforge_core::gen::power_law_edges;
use arcforge_core::graph::GraphTopology;
use arcforge_core::value::{Direction, VertexId};

#[test]
fn iteration_cost() {
    let edges = power_law_edges(0xC4, 100_000, 1_000_000, 1.0);
    for &threshold in &[128usize, 0] {
        let mut topo = GraphTopology::new(threshold);
        for v in 0..100_000u64 {
            topo.create_vertex(VertexId::new(0, v));
        }
        for (i, &(s, d)) in edges.iter().enumerate() {
            topo.insert_edge(VertexId::new(0, s), 0, VertexId::new(0, d), i as u64)
                .unwrap();
        }
        for _ in 0..3 {
            let t0 = Instant::now();
            let mut acc = 0u64;
            for _ in 0..200 {
                for v in 0..1024u64 {
                    for key in topo.neighbors(VertexId::new(0, v), Direction::Out, None).unwrap() {
                        acc = acc.wrapping_add(key.edge_id);
                    }
                }
            }
            std::hint::black_box(acc);
            println!("threshold {threshold:>3}: {:?} for 200 sweeps", t0.elapsed());
        }
    }
}
