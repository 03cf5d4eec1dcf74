//! The closed-form merge gain against a direct energy difference.
use superpoint::energy::{energy, merge_gain, superpoint_stats};
use superpoint::features::EmbeddingMatrix;
use superpoint::graph::AdjacencyGraph;

fn main() -> superpoint::Result<()> {
    // Path 0-1-2-3 with 1-D embeddings; blocks {0,1} and {2,3}.
    let f = EmbeddingMatrix::new(vec![0.0, 0.4, 1.0, 1.6], 4, 1)?;
    let g = AdjacencyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[1.0, 0.8, 1.0]);
    let positions = [[0.0; 3]; 4];
    let split = [0, 0, 1, 1];
    let merged = [0, 0, 0, 0];
    let stats = superpoint_stats(&f, &split, &positions)?;

    for lambda in [0.1, 0.5, 1.0, 2.0] {
        let before = energy(&f, &g, &split, lambda)?;
        let after = energy(&f, &g, &merged, lambda)?;
        let gain = merge_gain(&stats[0], &stats[1], 0.8, lambda);
        println!(
            "lambda {lambda:>3}: energy {:.4} -> {:.4}, decrease {:+.4}, gain {:+.4}",
            before.total,
            after.total,
            before.total - after.total,
            gain
        );
    }
    Ok(())
}
