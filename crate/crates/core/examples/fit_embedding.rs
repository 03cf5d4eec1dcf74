//! Fit a linear map of the handcrafted features with the contrastive
//! transition loss, then compare partitions before and after.
use superpoint::features::{fit_linear_embedding, geometric_features, FeatureConfig, FitConfig};
use superpoint::graph::{build_knn_graph, GraphConfig};
use superpoint::metrics::oracle_miou;
use superpoint::partition::{greedy_partition, PartitionConfig};
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE};
use superpoint::transition::TransitionConfig;

fn main() -> superpoint::Result<()> {
    let mut spec = SceneSpec::parse(QUALITY_SCENE)?;
    spec.density_scale = 0.3;
    let cloud = synth_scene(11, &spec)?;
    let labels = cloud.labels.clone().unwrap();
    let graph = build_knn_graph(&cloud, &GraphConfig::default())?;
    let x = geometric_features(&cloud, &FeatureConfig::default())?;

    let transition = TransitionConfig { rho_intra: 0.2, seed: 1, ..Default::default() };
    let fit = fit_linear_embedding(&x, &graph, &labels, &transition, &FitConfig { steps: 100, ..Default::default() })?;
    // The step objective is the sampled loss; the full loss is what the
    // returned weights are guaranteed not to worsen.
    for (i, s) in fit.sampled_loss.iter().enumerate().step_by(20) {
        println!("step {i:>3}  sampled {s:.4}  full {:.2}", fit.loss_history[i + 1]);
    }
    println!("best full loss {:.2} (from {:.2})", fit.final_loss(), fit.initial_loss());
    let last = x.matmul(&fit.last_weights);

    let cfg = PartitionConfig { sigma_min: 5, ..Default::default() };
    for (name, f) in [("handcrafted", &x), ("best", &fit.embeddings), ("last", &last)] {
        let p = greedy_partition(f, &graph, &cloud.positions, &cfg)?;
        let r = oracle_miou(&p.assignment, &labels, 3)?;
        println!("{name:<12} {:>6} superpoints, oracle mIoU {:.2}", r.n_superpoints, r.oracle_miou);
    }
    Ok(())
}
