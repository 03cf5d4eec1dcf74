//! Raw points to hierarchical superpoints, with per-stage timings.

use std::time::{Duration, Instant};

use crate::cloud::PointCloud;
use crate::config::RunConfig;
use crate::energy::{superpoint_stats, Superpoint};
use crate::error::{Error, Result};
use crate::features::{geometric_features_with_neighbors, EmbeddingMatrix};
use crate::graph::{graph_from_neighbors, AdjacencyGraph};
use crate::kdtree::knn_all;
use crate::metrics::StageTiming;
use crate::partition::{hierarchical_partition, HierarchicalPartition};
use crate::voxel::voxel_subsample;

pub const STAGES: [&str; 5] = ["voxelize", "knn", "point_features", "partition", "superpoint_features"];

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The cloud that was partitioned (voxelized when a voxel size is set).
    pub cloud: PointCloud,
    /// Voxel of every input point, when voxelized.
    pub voxel_of_point: Option<Vec<u32>>,
    pub graph: AdjacencyGraph,
    pub embeddings: EmbeddingMatrix,
    pub hierarchy: HierarchicalPartition,
    /// Superpoint statistics per level.
    pub superpoints: Vec<Vec<Superpoint>>,
    pub timings: Vec<StageTiming>,
    pub end_to_end: Duration,
}

impl PipelineOutput {
    /// Level assignments expressed on the input points.
    pub fn input_assignments(&self) -> Vec<Vec<u32>> {
        self.hierarchy
            .levels
            .iter()
            .map(|level| match &self.voxel_of_point {
                Some(v) => v.iter().map(|&c| level.assignment[c as usize]).collect(),
                None => level.assignment.clone(),
            })
            .collect()
    }
}

fn timed<T>(timings: &mut Vec<StageTiming>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push(StageTiming {
        name: name.to_string(),
        elapsed: start.elapsed(),
    });
    Ok(out)
}

/// Runs voxelization, the k-NN query, point features (skipped when
/// `embeddings` are given), the hierarchical partition and superpoint
/// statistics. One k-NN query serves both the graph and the features.
pub fn run_pipeline(
    cloud: &PointCloud,
    cfg: &RunConfig,
    embeddings: Option<&EmbeddingMatrix>,
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let mut timings = Vec::with_capacity(STAGES.len());
    let voxel = cfg.voxel_spec()?;
    let (work, voxel_of_point) = timed(&mut timings, "voxelize", || match voxel {
        Some(spec) => voxel_subsample(cloud, &spec).map(|(c, m)| (c, Some(m))),
        None => Ok((cloud.clone(), None)),
    })?;
    let n = work.len();

    let k_graph = cfg.graph.k;
    let k_query = if embeddings.is_some() {
        k_graph
    } else {
        k_graph.max(cfg.features.neighborhood_k)
    };
    if n <= k_query {
        return Err(Error::invalid(format!("need more than {k_query} points, got {n}")));
    }
    let (neighbors, graph) = timed(&mut timings, "knn", || {
        let nn = knn_all(&work.positions, k_query);
        let graph = graph_from_neighbors(n, &nn, k_query, k_graph);
        Ok((nn, graph))
    })?;

    let f = timed(&mut timings, "point_features", || match embeddings {
        Some(e) if e.rows() != n => Err(Error::invalid(format!(
            "embeddings have {} rows but the cloud has {n} points",
            e.rows()
        ))),
        Some(e) => Ok(e.clone()),
        None => geometric_features_with_neighbors(&work, &cfg.features, &neighbors, k_query),
    })?;
    drop(neighbors);

    let levels = cfg.partition_levels();
    let hierarchy = timed(&mut timings, "partition", || {
        hierarchical_partition(&f, &graph, &work.positions, &levels)
    })?;

    let superpoints = timed(&mut timings, "superpoint_features", || {
        hierarchy
            .levels
            .iter()
            .map(|l| superpoint_stats(&f, &l.assignment, &work.positions))
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(PipelineOutput {
        cloud: work,
        voxel_of_point,
        graph,
        embeddings: f,
        hierarchy,
        superpoints,
        timings,
        end_to_end: start.elapsed(),
    })
}

/// Points per second of one stage over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub name: String,
    pub mean_seconds: f64,
    pub mean_pps: f64,
    pub min_pps: f64,
    pub max_pps: f64,
    /// Mean share of the end-to-end time.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub n_points: usize,
    pub repeats: usize,
    /// Stages in pipeline order, then `end_to_end`.
    pub stages: Vec<StageSummary>,
    /// Superpoint counts per level, identical across repeats.
    pub counts: Vec<usize>,
}

impl BenchResult {
    pub fn stage(&self, name: &str) -> Option<&StageSummary> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{} points, {} runs, superpoints per level {:?}\n", self.n_points, self.repeats, self.counts);
        s.push_str(&format!(
            "{:<20} {:>10} {:>14} {:>14} {:>14} {:>7}\n",
            "stage", "mean s", "mean pts/s", "min pts/s", "max pts/s", "share"
        ));
        for r in &self.stages {
            s.push_str(&format!(
                "{:<20} {:>10.4} {:>14.0} {:>14.0} {:>14.0} {:>6.1}%\n",
                r.name,
                r.mean_seconds,
                r.mean_pps,
                r.min_pps,
                r.max_pps,
                100.0 * r.share
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,mean_seconds,mean_pps,min_pps,max_pps,share\n");
        for r in &self.stages {
            s.push_str(&format!(
                "{},{:.6},{:.1},{:.1},{:.1},{:.4}\n",
                r.name, r.mean_seconds, r.mean_pps, r.min_pps, r.max_pps, r.share
            ));
        }
        s
    }
}

/// Runs the pipeline `repeats` times on `cloud`. Rates are computed on the
/// input point count.
pub fn bench(cloud: &PointCloud, cfg: &RunConfig, repeats: usize) -> Result<BenchResult> {
    if repeats == 0 {
        return Err(Error::Config("bench needs at least one repeat".into()));
    }
    let n = cloud.len();
    let mut runs: Vec<(Vec<StageTiming>, Duration)> = Vec::with_capacity(repeats);
    let mut counts = Vec::new();
    for _ in 0..repeats {
        let out = run_pipeline(cloud, cfg, None)?;
        counts = out.hierarchy.levels.iter().map(|l| l.n_components()).collect();
        runs.push((out.timings, out.end_to_end));
    }
    let summarize = |name: &str, secs: Vec<f64>, totals: &[f64]| {
        let pps: Vec<f64> = secs.iter().map(|&t| n as f64 / t.max(1e-9)).collect();
        let r = secs.len() as f64;
        StageSummary {
            name: name.to_string(),
            mean_seconds: secs.iter().sum::<f64>() / r,
            mean_pps: pps.iter().sum::<f64>() / r,
            min_pps: pps.iter().cloned().fold(f64::INFINITY, f64::min),
            max_pps: pps.iter().cloned().fold(0.0, f64::max),
            share: secs.iter().zip(totals).map(|(s, t)| s / t.max(1e-9)).sum::<f64>() / r,
        }
    };
    let totals: Vec<f64> = runs.iter().map(|(_, t)| t.as_secs_f64()).collect();
    let mut stages: Vec<StageSummary> = STAGES
        .iter()
        .map(|&name| {
            let secs = runs
                .iter()
                .map(|(t, _)| t.iter().find(|s| s.name == name).map_or(0.0, |s| s.elapsed.as_secs_f64()))
                .collect();
            summarize(name, secs, &totals)
        })
        .collect();
    stages.push(summarize("end_to_end", totals.clone(), &totals));
    Ok(BenchResult {
        n_points: n,
        repeats,
        stages,
        counts,
    })
}
