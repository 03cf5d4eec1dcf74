//! Voxel-grid subsampling and the voxel baseline partition.
use superpoint::metrics::oracle_miou;
use superpoint::synth::{bench_cloud};
use superpoint::voxel::{voxel_partition_baseline, voxel_subsample, VoxelGridSpec};

fn main() -> superpoint::Result<()> {
    let cloud = bench_cloud(200_000, 1)?;
    for cell in [0.02, 0.05, 0.1, 0.2] {
        let spec = VoxelGridSpec::new(cell)?;
        let (sub, _) = voxel_subsample(&cloud, &spec)?;
        // Every voxel as its own superpoint: the baseline to beat.
        let (assignment, n) = voxel_partition_baseline(&cloud, &spec)?;
        let r = oracle_miou(&assignment, cloud.labels.as_ref().unwrap(), cloud.num_classes as usize)?;
        println!(
            "cell {cell:>5} m: {:>7} -> {:>6} points, baseline {n:>6} superpoints, oracle mIoU {:.2}",
            cloud.len(),
            sub.len(),
            r.oracle_miou
        );
    }
    Ok(())
}
