//! Oracle mIoU per hierarchy level against the voxel baseline at a
//! similar superpoint count.
use superpoint::config::RunConfig;
use superpoint::metrics::{oracle_miou, OracleReport};
use superpoint::pipeline::run_pipeline;
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE, QUALITY_SEED};
use superpoint::voxel::{voxel_partition_baseline, VoxelGridSpec};

fn main() -> superpoint::Result<()> {
    let cloud = synth_scene(QUALITY_SEED, &SceneSpec::parse(QUALITY_SCENE)?)?;
    let labels = cloud.labels.as_ref().unwrap();
    let out = run_pipeline(&cloud, &RunConfig::default(), None)?;

    println!("source,{}", OracleReport::csv_header(3));
    for (l, level) in out.hierarchy.levels.iter().enumerate() {
        let r = oracle_miou(&level.assignment, labels, 3)?;
        println!("level{},{}", l + 1, r.csv_row());
    }
    for cell in [0.15, 0.3, 0.6] {
        let (a, _) = voxel_partition_baseline(&cloud, &VoxelGridSpec::new(cell)?)?;
        println!("voxel{cell},{}", oracle_miou(&a, labels, 3)?.csv_row());
    }
    Ok(())
}
