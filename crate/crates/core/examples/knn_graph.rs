//! Build the symmetric k-NN adjacency graph and write it as CSV.
use std::time::Instant;

use superpoint::graph::{build_knn_graph, GraphConfig};
use superpoint::synth::bench_cloud;

fn main() -> superpoint::Result<()> {
    let cloud = bench_cloud(100_000, 3)?;
    for k in [4, 8, 16] {
        let start = Instant::now();
        let g = build_knn_graph(&cloud, &GraphConfig { k })?;
        let degrees = g.degrees();
        let max = degrees.iter().max().unwrap();
        let mean = 2.0 * g.n_edges() as f64 / g.n_nodes as f64;
        println!(
            "k={k:>2}: {} edges, mean degree {mean:.2}, max {max}, {:.2?}",
            g.n_edges(),
            start.elapsed()
        );
    }
    let g = build_knn_graph(&cloud, &GraphConfig::default())?;
    g.write_csv("knn_graph.csv")?;
    println!("wrote knn_graph.csv");
    Ok(())
}
