mod common;

use std::time::Duration;

use common::*;
use superpoint::features::{geometric_features, FeatureConfig};
use superpoint::graph::{build_knn_graph, GraphConfig};
use superpoint::metrics::{oracle_miou, purity_curve, throughput_report, StageTiming, Sweep};
use superpoint::partition::PartitionConfig;

#[test]
fn hand_built_confusion() {
    // Classes 0 and 1; one superpoint over [0, 0, 1] predicts 0.
    let r = oracle_miou(&[0, 0, 0], &[0, 0, 1], 2).unwrap();
    assert_eq!(r.majority_labels, vec![0]);
    assert!((r.per_class_iou[0].unwrap() - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(r.per_class_iou[1], Some(0.0));
    assert!((r.oracle_miou - 100.0 / 3.0).abs() < 1e-9);
    assert_eq!(r.confusion, vec![2, 0, 1, 0]);
}

#[test]
fn absent_classes_are_excluded() {
    let r = oracle_miou(&[0, 0, 1], &[2, 2, 0], 4).unwrap();
    assert_eq!(r.per_class_iou, vec![Some(100.0), None, Some(100.0), None]);
    assert_eq!(r.oracle_miou, 100.0);
}

/// Refinement raises accuracy here but lowers the mean IoU, because the new
/// piece predicts class 1 and spreads its errors over both classes.
#[test]
fn refinement_can_lower_miou() {
    let labels = [1, 0, 1, 0, 1, 0, 0, 0];
    let coarse = [1, 0, 0, 2, 0, 1, 2, 2];
    let fine = [5, 0, 1, 3, 0, 5, 4, 4];
    let a = oracle_miou(&coarse, &labels, 2).unwrap();
    let b = oracle_miou(&fine, &labels, 2).unwrap();
    assert!(b.oracle_miou < a.oracle_miou);
    assert!(b.overall_accuracy() >= a.overall_accuracy());
}

#[test]
fn purity_decreases_with_coarser_partitions() {
    let lambdas = [0.001, 0.01, 0.1, 1.0, 10.0];
    let mut mean_miou = vec![0.0; lambdas.len()];
    let mut mean_count = vec![0.0; lambdas.len()];
    for seed in 0..3 {
        let cloud = scene(FLOOR_AND_BOXES, 100 + seed);
        let f = geometric_features(&cloud, &FeatureConfig::default()).unwrap();
        let g = build_knn_graph(&cloud, &GraphConfig::default()).unwrap();
        let base = PartitionConfig { sigma_min: 1, seed, ..Default::default() };
        for (i, &lambda) in lambdas.iter().enumerate() {
            let rows = purity_curve(&cloud, &f, &g, &base, &Sweep::Lambda(vec![lambda])).unwrap();
            mean_miou[i] += rows[0].oracle_miou / 3.0;
            mean_count[i] += rows[0].n_superpoints as f64 / 3.0;
        }
    }
    for i in 1..lambdas.len() {
        assert!(mean_count[i] <= mean_count[i - 1], "{mean_count:?}");
        assert!(mean_miou[i] <= mean_miou[i - 1] + 1e-9, "{mean_miou:?}");
    }
    assert!(mean_miou[0] > 95.0);
}

#[test]
fn sigma_sweep_endpoints() {
    let cloud = scene(TWO_PLANES, 1);
    let f = geometric_features(&cloud, &FeatureConfig::default()).unwrap();
    let g = build_knn_graph(&cloud, &GraphConfig::default()).unwrap();
    let n = cloud.len();
    let rows = purity_curve(&cloud, &f, &g, &PartitionConfig::default(), &Sweep::SigmaMin(vec![n, 1])).unwrap();
    assert_eq!(rows[0].n_superpoints, 1);
    assert!(rows[1].n_superpoints >= 1 && rows[1].oracle_miou <= 100.0);
    assert!(rows[0].n_superpoints <= rows[1].n_superpoints);
}

#[test]
fn throughput_arithmetic() {
    let stages = vec![StageTiming { name: "partition".into(), elapsed: Duration::from_secs(2) }];
    let r = throughput_report(1_000_000, &stages, Duration::from_secs(2));
    assert_eq!(r.stages[0].points_per_second, Some(5e5));
    assert!(!r.inconsistent);
    let r = throughput_report(10, &stages, Duration::from_secs(3));
    assert!(r.inconsistent);
    let zero = vec![StageTiming { name: "knn".into(), elapsed: Duration::ZERO }];
    let r = throughput_report(10, &zero, Duration::ZERO);
    assert!(r.to_table().contains("<min resolution"));
}
