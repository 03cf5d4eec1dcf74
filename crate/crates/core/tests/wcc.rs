mod common;

use common::*;
use rand::Rng;
use superpoint::wcc::wcc_max_prop;

#[test]
fn matches_disjoint_set_forest() {
    let mut r = rng(31);
    for g in 0..500 {
        let n = r.random_range(1..=2000);
        // Sweep the expected degree from very sparse to well connected.
        let degree = [0.2, 0.6, 1.0, 1.5, 3.0][g % 5];
        let m = (degree * n as f64 / 2.0) as usize;
        let edges: Vec<(u32, u32)> = (0..m)
            .map(|_| (r.random_range(0..n as u32), r.random_range(0..n as u32)))
            .collect();
        let oracle = components_oracle(n, &edges);
        let first = wcc_max_prop(n, &edges, 0);
        for seed in 0..5 {
            let labels = wcc_max_prop(n, &edges, seed);
            assert!(same_partition(&labels, &oracle), "graph {g} seed {seed}");
            assert_eq!(labels, first);
            let k = labels.iter().max().map_or(0, |&x| x + 1);
            let mut seen = vec![false; k as usize];
            for &l in &labels {
                seen[l as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}

#[test]
fn star_and_path_shapes() {
    let star: Vec<(u32, u32)> = (1..100).map(|i| (0, i)).collect();
    assert!(wcc_max_prop(100, &star, 4).iter().all(|&c| c == 0));
    let reversed: Vec<(u32, u32)> = (0..500).rev().map(|i| (i + 1, i)).collect();
    assert!(wcc_max_prop(501, &reversed, 4).iter().all(|&c| c == 0));
}
