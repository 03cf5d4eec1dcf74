//! Oversegmentation quality and throughput reporting.

use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::graph::AdjacencyGraph;
use crate::partition::{greedy_partition, PartitionConfig};
use crate::voxel::majority_labels;

/// Quality of a partition when each superpoint predicts its majority label.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub n_superpoints: usize,
    /// Mean IoU in percent over classes present in the labels or predictions.
    pub oracle_miou: f64,
    /// Per-class IoU in percent; `None` for classes absent from both.
    pub per_class_iou: Vec<Option<f64>>,
    /// Majority class per superpoint id (ids that do not occur get 0).
    pub majority_labels: Vec<u32>,
    /// `confusion[truth * C + predicted]` point counts.
    pub confusion: Vec<u64>,
}

impl OracleReport {
    pub fn csv_header(num_classes: usize) -> String {
        let mut s = String::from("n_superpoints,oracle_miou");
        for c in 0..num_classes {
            let _ = write!(s, ",iou_{c}");
        }
        s
    }

    /// Fraction of points whose superpoint majority equals their label.
    pub fn overall_accuracy(&self) -> f64 {
        let c = self.per_class_iou.len();
        let correct: u64 = (0..c).map(|k| self.confusion[k * c + k]).sum();
        let total: u64 = self.confusion.iter().sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{:.4}", self.n_superpoints, self.oracle_miou);
        for iou in &self.per_class_iou {
            match iou {
                Some(v) => {
                    let _ = write!(s, ",{v:.4}");
                }
                None => s.push(','),
            }
        }
        s
    }
}

/// Confusion matrix of per-point predictions against labels, accumulated in
/// fixed blocks and merged in block order.
fn confusion_matrix(truth: &[u32], predicted: &[u32], c: usize) -> Vec<u64> {
    const BLOCK: usize = 1 << 16;
    truth
        .par_chunks(BLOCK)
        .zip(predicted.par_chunks(BLOCK))
        .map(|(t, p)| {
            let mut m = vec![0u64; c * c];
            for (&ti, &pi) in t.iter().zip(p) {
                m[ti as usize * c + pi as usize] += 1;
            }
            m
        })
        .reduce(
            || vec![0u64; c * c],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

pub fn oracle_miou(assignment: &[u32], labels: &[u32], num_classes: usize) -> Result<OracleReport> {
    if assignment.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} assignments for {} labels",
            assignment.len(),
            labels.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::invalid("at least one class is required"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_classes) {
        return Err(Error::invalid(format!("label {l} out of range for {num_classes} classes")));
    }
    let bound = assignment.iter().max().map_or(0, |&m| m as usize + 1);
    let mut occupied = vec![false; bound];
    for &a in assignment {
        occupied[a as usize] = true;
    }
    let n_sp = occupied.iter().filter(|&&o| o).count();
    let majority = majority_labels(labels, assignment, bound, num_classes);
    let predicted: Vec<u32> = assignment.par_iter().map(|&a| majority[a as usize]).collect();
    let confusion = confusion_matrix(labels, &predicted, num_classes);

    let c = num_classes;
    let per_class: Vec<Option<f64>> = (0..c)
        .map(|k| {
            let tp = confusion[k * c + k];
            let gt: u64 = confusion[k * c..(k + 1) * c].iter().sum();
            let pred: u64 = (0..c).map(|t| confusion[t * c + k]).sum();
            let union = gt + pred - tp;
            (union > 0).then(|| 100.0 * tp as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::invalid("no class occurs in labels or predictions"));
    }
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok(OracleReport {
        n_superpoints: n_sp,
        oracle_miou: miou,
        per_class_iou: per_class,
        majority_labels: majority,
        confusion,
    })
}

/// Which partition parameter a purity curve sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Lambda(Vec<f64>),
    SigmaMin(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_superpoints: usize,
    pub oracle_miou: f64,
}

/// One single-level partition per grid value; rows sorted by superpoint count.
pub fn purity_curve(
    cloud: &PointCloud,
    f: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    base: &PartitionConfig,
    sweep: &Sweep,
) -> Result<Vec<CurvePoint>> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("purity curve needs ground-truth labels"))?;
    let configs: Vec<PartitionConfig> = match sweep {
        Sweep::Lambda(grid) => grid
            .iter()
            .map(|&lambda| PartitionConfig { lambda, ..*base })
            .collect(),
        Sweep::SigmaMin(grid) => grid
            .iter()
            .map(|&sigma_min| PartitionConfig { sigma_min, ..*base })
            .collect(),
    };
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let p = greedy_partition(f, graph, &cloud.positions, cfg)?;
        let report = oracle_miou(&p.assignment, labels, cloud.num_classes as usize)?;
        rows.push(CurvePoint {
            n_superpoints: report.n_superpoints,
            oracle_miou: report.oracle_miou,
        });
    }
    rows.sort_by(|a, b| {
        a.n_superpoints
            .cmp(&b.n_superpoints)
            .then(a.oracle_miou.total_cmp(&b.oracle_miou))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub name: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRate {
    pub name: String,
    pub seconds: f64,
    /// `None` when the elapsed time is below timer resolution.
    pub points_per_second: Option<f64>,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub n_points: usize,
    pub stages: Vec<StageRate>,
    pub total: StageRate,
    /// Set when the stage times and the end-to-end time disagree by more
    /// than 10%.
    pub inconsistent: bool,
}

/// Durations shorter than this are reported as below resolution.
pub const MIN_RESOLUTION: Duration = Duration::from_nanos(1000);

fn rate(name: &str, elapsed: Duration, n_points: usize, total: Duration) -> StageRate {
    let seconds = elapsed.as_secs_f64();
    StageRate {
        name: name.to_string(),
        seconds,
        points_per_second: (elapsed >= MIN_RESOLUTION).then(|| n_points as f64 / seconds),
        share: if total.is_zero() {
            0.0
        } else {
            seconds / total.as_secs_f64()
        },
    }
}

pub fn throughput_report(n_points: usize, stages: &[StageTiming], end_to_end: Duration) -> ThroughputReport {
    let stage_sum: Duration = stages.iter().map(|s| s.elapsed).sum();
    let inconsistent = if end_to_end.is_zero() {
        !stage_sum.is_zero()
    } else {
        (stage_sum.as_secs_f64() - end_to_end.as_secs_f64()).abs() > 0.1 * end_to_end.as_secs_f64()
    };
    ThroughputReport {
        n_points,
        stages: stages
            .iter()
            .map(|s| rate(&s.name, s.elapsed, n_points, end_to_end))
            .collect(),
        total: rate("end_to_end", end_to_end, n_points, end_to_end),
        inconsistent,
    }
}

impl ThroughputReport {
    pub fn share_of(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.name == stage).map(|s| s.share)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,seconds,points_per_second,share\n");
        for r in self.stages.iter().chain(std::iter::once(&self.total)) {
            let pps = r
                .points_per_second
                .map_or_else(|| "<min resolution".to_string(), |v| format!("{v:.1}"));
            let _ = writeln!(s, "{},{:.6},{},{:.4}", r.name, r.seconds, pps, r.share);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{} points\n", self.n_points);
        let _ = writeln!(s, "{:<20} {:>12} {:>16} {:>8}", "stage", "seconds", "points/s", "share");
        for r in self.stages.iter().chain(std::iter::once(&self.total)) {
            let pps = r
                .points_per_second
                .map_or_else(|| "<min resolution".to_string(), |v| format!("{v:.0}"));
            let _ = writeln!(
                s,
                "{:<20} {:>12.4} {:>16} {:>7.1}%",
                r.name,
                r.seconds,
                pps,
                100.0 * r.share
            );
        }
        if self.inconsistent {
            s.push_str("warning: stage times differ from end-to-end time by more than 10%\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_superpoints_score_100() {
        let r = oracle_miou(&[0, 0, 1, 1, 2], &[1, 1, 0, 0, 1], 2).unwrap();
        assert_eq!(r.oracle_miou, 100.0);
        let singletons: Vec<u32> = (0..5).collect();
        assert_eq!(oracle_miou(&singletons, &[1, 0, 2, 2, 0], 3).unwrap().oracle_miou, 100.0);
    }

    #[test]
    fn mixed_superpoint() {
        let r = oracle_miou(&[0, 0, 0], &[0, 0, 1], 2).unwrap();
        assert_eq!(r.majority_labels, vec![0]);
        assert!((r.per_class_iou[0].unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class_iou[1], Some(0.0));
        assert!((r.oracle_miou - 100.0 / 3.0).abs() < 1e-12);
        let total: u64 = r.confusion.iter().sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn absent_classes_are_excluded() {
        let r = oracle_miou(&[0, 1], &[2, 2], 4).unwrap();
        assert_eq!(r.per_class_iou, vec![None, None, Some(100.0), None]);
        assert_eq!(r.oracle_miou, 100.0);
    }

    #[test]
    fn errors() {
        assert!(oracle_miou(&[0], &[0, 0], 1).is_err());
        assert!(oracle_miou(&[0], &[3], 2).is_err());
        assert!(oracle_miou(&[], &[], 2).is_err());
    }

    #[test]
    fn throughput_arithmetic() {
        let stages = vec![StageTiming {
            name: "partition".into(),
            elapsed: Duration::from_secs(2),
        }];
        let r = throughput_report(1_000_000, &stages, Duration::from_secs(2));
        assert_eq!(r.total.points_per_second, Some(500_000.0));
        assert!(!r.inconsistent);
    }

    #[test]
    fn zero_elapsed_is_guarded() {
        let r = throughput_report(10, &[], Duration::ZERO);
        assert_eq!(r.total.points_per_second, None);
        assert!(r.to_table().contains("<min resolution"));
        assert!(r.to_csv().contains("<min resolution"));
    }

    #[test]
    fn mismatch_is_flagged() {
        let stages = vec![StageTiming {
            name: "knn".into(),
            elapsed: Duration::from_millis(500),
        }];
        let r = throughput_report(10, &stages, Duration::from_secs(1));
        assert!(r.inconsistent);
        assert!(r.to_table().contains("warning"));
    }
}
