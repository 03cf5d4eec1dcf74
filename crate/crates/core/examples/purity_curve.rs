//! Oracle mIoU against superpoint count over a lambda sweep, as CSV.
use superpoint::features::{geometric_features, FeatureConfig};
use superpoint::graph::{build_knn_graph, GraphConfig};
use superpoint::metrics::{purity_curve, Sweep};
use superpoint::partition::PartitionConfig;
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE};

fn main() -> superpoint::Result<()> {
    let mut spec = SceneSpec::parse(QUALITY_SCENE)?;
    spec.density_scale = 0.5;
    let cloud = synth_scene(2, &spec)?;
    let f = geometric_features(&cloud, &FeatureConfig::default())?;
    let g = build_knn_graph(&cloud, &GraphConfig::default())?;
    let grid: Vec<f64> = (-12..=4).map(|e| 10f64.powf(e as f64 / 4.0)).collect();
    let rows = purity_curve(&cloud, &f, &g, &PartitionConfig::default(), &Sweep::Lambda(grid))?;
    println!("n_superpoints,oracle_miou");
    for r in rows {
        println!("{},{:.3}", r.n_superpoints, r.oracle_miou);
    }
    Ok(())
}
