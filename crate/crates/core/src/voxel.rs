//! Regular-grid subsampling and the voxel-grouping baseline partition.

use std::collections::HashMap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// A regular grid of cubic cells. Cells are anchored at integer multiples of
/// `cell_size`; the grid origin is the cell corner containing the cloud's
/// minimum corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    pub cell_size: f64,
}

impl VoxelGridSpec {
    pub fn new(cell_size: f64) -> Result<Self> {
        let spec = VoxelGridSpec { cell_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::Config(format!(
                "voxel cell size must be positive, got {}",
                self.cell_size
            )));
        }
        Ok(())
    }

    /// Integer cell coordinates of `p`, relative to the grid origin of `cloud_min`.
    pub fn cell_of(&self, p: &[f64; 3], cloud_min: &[f64; 3]) -> [i64; 3] {
        let mut key = [0i64; 3];
        for a in 0..3 {
            let origin = (cloud_min[a] / self.cell_size).floor() as i64;
            key[a] = (p[a] / self.cell_size).floor() as i64 - origin;
        }
        key
    }
}

/// Voxel id of every point, numbered in order of first appearance.
fn voxel_ids(cloud: &PointCloud, spec: &VoxelGridSpec) -> (Vec<u32>, usize) {
    let (lo, _) = cloud.bounding_box();
    let mut index: HashMap<[i64; 3], u32> = HashMap::with_capacity(cloud.len() / 4 + 1);
    let ids = cloud
        .positions
        .iter()
        .map(|p| {
            let next = index.len() as u32;
            *index.entry(spec.cell_of(p, &lo)).or_insert(next)
        })
        .collect();
    (ids, index.len())
}

/// One point per occupied voxel: centroid position, mean radiometry and the
/// majority label (ties go to the smaller class id). Also returns, for every
/// input point, the index of its voxel's representative in the output.
pub fn voxel_subsample(cloud: &PointCloud, spec: &VoxelGridSpec) -> Result<(PointCloud, Vec<u32>)> {
    spec.validate()?;
    cloud.validate()?;
    let (ids, n_voxels) = voxel_ids(cloud, spec);

    let mut counts = vec![0usize; n_voxels];
    let mut pos = vec![[0.0f64; 3]; n_voxels];
    for (p, &v) in cloud.positions.iter().zip(&ids) {
        let v = v as usize;
        counts[v] += 1;
        for a in 0..3 {
            pos[v][a] += p[a];
        }
    }
    for (s, &c) in pos.iter_mut().zip(&counts) {
        for x in s.iter_mut() {
            *x /= c as f64;
        }
    }

    let colors = cloud.colors.as_ref().map(|colors| {
        let mut acc = vec![[0.0f64; 3]; n_voxels];
        for (c, &v) in colors.iter().zip(&ids) {
            for a in 0..3 {
                acc[v as usize][a] += c[a];
            }
        }
        for (s, &n) in acc.iter_mut().zip(&counts) {
            for x in s.iter_mut() {
                *x /= n as f64;
            }
        }
        acc
    });
    let intensity = cloud.intensity.as_ref().map(|vals| {
        let mut acc = vec![0.0f64; n_voxels];
        for (x, &v) in vals.iter().zip(&ids) {
            acc[v as usize] += x;
        }
        acc.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect()
    });
    let labels = cloud
        .labels
        .as_ref()
        .map(|labels| majority_labels(labels, &ids, n_voxels, cloud.num_classes as usize));

    let out = PointCloud {
        positions: pos,
        colors,
        intensity,
        labels,
        num_classes: cloud.num_classes,
    };
    Ok((out, ids))
}

/// Majority label per group, ties broken toward the smaller class id.
pub fn majority_labels(labels: &[u32], groups: &[u32], n_groups: usize, n_classes: usize) -> Vec<u32> {
    let mut hist = vec![0u32; n_groups * n_classes];
    for (&l, &g) in labels.iter().zip(groups) {
        hist[g as usize * n_classes + l as usize] += 1;
    }
    hist.chunks_exact(n_classes.max(1))
        .map(|row| {
            let mut best = 0usize;
            for (c, &count) in row.iter().enumerate() {
                if count > row[best] {
                    best = c;
                }
            }
            best as u32
        })
        .collect()
}

/// Baseline oversegmentation: every point gets the id of its voxel, with ids
/// consecutive from 0 in order of first appearance. Returns the per-point
/// assignment and the number of superpoints.
pub fn voxel_partition_baseline(cloud: &PointCloud, spec: &VoxelGridSpec) -> Result<(Vec<u32>, usize)> {
    spec.validate()?;
    cloud.validate()?;
    Ok(voxel_ids(cloud, spec))
}
