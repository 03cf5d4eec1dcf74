//! Three-level superpoint hierarchy with the reference settings.
//!
//! cargo run --release --example partition -- [cloud.ply]
use superpoint::features::{geometric_features, FeatureConfig};
use superpoint::graph::{build_knn_graph, GraphConfig};
use superpoint::io::{read_ply, write_partition, PartitionFormat};
use superpoint::partition::{hierarchical_partition, PartitionConfig};
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE, QUALITY_SEED};

fn main() -> superpoint::Result<()> {
    let cloud = match std::env::args().nth(1) {
        Some(path) => read_ply(path)?,
        None => synth_scene(QUALITY_SEED, &SceneSpec::parse(QUALITY_SCENE)?)?,
    };
    let graph = build_knn_graph(&cloud, &GraphConfig { k: 8 })?;
    let f = geometric_features(&cloud, &FeatureConfig::default())?;
    let levels = PartitionConfig::levels(0.02, &[5, 30, 90], 8, 1);
    let h = hierarchical_partition(&f, &graph, &cloud.positions, &levels)?;

    for (l, level) in h.levels.iter().enumerate() {
        let sizes: Vec<usize> = level.components.iter().map(|c| c.size).collect();
        println!(
            "level {}: {:>6} superpoints, sizes {}..{}, {} adjacent pairs",
            l + 1,
            level.n_components(),
            sizes.iter().min().unwrap(),
            sizes.iter().max().unwrap(),
            level.component_graph.n_edges()
        );
    }
    write_partition("partition.csv", &h, PartitionFormat::Csv)?;
    println!("wrote partition.csv");
    Ok(())
}
