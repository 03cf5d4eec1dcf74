mod common;

use common::*;
use rand::Rng;
use superpoint::energy::{energy, merge_gain_raw, superpoint_stats};
use superpoint::partition::{greedy_partition_traced, PartitionConfig};

#[test]
fn merge_gain_equals_energy_decrease() {
    let mut r = rng(11);
    let mut checked = 0;
    while checked < 300 {
        let n = r.random_range(2..=50);
        let m = r.random_range(1..=8);
        let lambda = [0.0, 0.02, 1.0][checked % 3];
        let f = random_embeddings(&mut r, n, m);
        let g = random_graph(&mut r, n, 0.1, true);
        let blocks = r.random_range(2..=n) as u32;
        let assignment: Vec<u32> = (0..n).map(|_| r.random_range(0..blocks)).collect();
        let cut: Vec<_> = g
            .edges
            .iter()
            .filter(|&&(u, v)| assignment[u as usize] != assignment[v as usize])
            .collect();
        if cut.is_empty() {
            continue;
        }
        let &&(u, v) = &cut[r.random_range(0..cut.len())];
        let (p, q) = (assignment[u as usize], assignment[v as usize]);
        let merged: Vec<u32> = assignment.iter().map(|&a| if a == q { p } else { a }).collect();
        let direct = energy_oracle(&f, &g, &assignment, lambda) - energy_oracle(&f, &g, &merged, lambda);
        let (sp, mp) = block_stats(&f, &assignment, p);
        let (sq, mq) = block_stats(&f, &assignment, q);
        let gain = merge_gain_raw(sp, &mp, sq, &mq, boundary_weight(&g, &assignment, p, q), lambda);
        let scale = direct.abs().max(gain.abs()).max(1e-300);
        assert!((direct - gain).abs() / scale < 1e-9, "direct {direct} vs gain {gain}");
        checked += 1;
    }
}

#[test]
fn energy_matches_definition() {
    let mut r = rng(3);
    for _ in 0..200 {
        let n = 8;
        let f = random_embeddings(&mut r, n, 3);
        let g = random_graph(&mut r, n, 0.3, false);
        let assignment: Vec<u32> = (0..n).map(|_| r.random_range(0..4)).collect();
        let (a, _) = superpoint::numeric::to_consecutive_ids(&assignment, 4);
        let lambda = r.random_range(0.0..2.0);
        let e = energy(&f, &g, &a, lambda).unwrap();
        let o = energy_oracle(&f, &g, &a, lambda);
        assert!((e.total - o).abs() <= 1e-12 * o.max(1.0));
        assert!((e.fidelity + e.contour - e.total).abs() < 1e-15);
    }
}

#[test]
fn superpoint_means_match_naive_loop() {
    let mut r = rng(5);
    let n = 50;
    let f = random_embeddings(&mut r, n, 4);
    let positions = random_positions(&mut r, n);
    let raw: Vec<u32> = (0..n).map(|_| r.random_range(0..7)).collect();
    let (a, k) = superpoint::numeric::to_consecutive_ids(&raw, 7);
    let stats = superpoint_stats(&f, &a, &positions).unwrap();
    assert_eq!(stats.len(), k);
    for (b, sp) in stats.iter().enumerate() {
        let (size, mean) = block_stats(&f, &a, b as u32);
        assert_eq!(sp.size as f64, size);
        for (x, y) in sp.mean_embedding.iter().zip(&mean) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

/// Replays every traced iteration: the energy decrease of an iteration equals
/// the sum of gains of its merges applied one after another, and with
/// sigma_min = 1 every iteration lowers the energy.
#[test]
fn iteration_bookkeeping_matches_realized_gains() {
    let mut r = rng(17);
    let mut iterations = 0;
    let mut pairwise = 0;
    for case in 0..150 {
        let n = if case % 2 == 0 { 7 } else { 30 };
        let lambda = [0.01, 0.1, 1.0][case % 3];
        let f = random_embeddings(&mut r, n, 2);
        let g = random_graph(&mut r, n, 0.25, true);
        let positions = random_positions(&mut r, n);
        let cfg = PartitionConfig { lambda, sigma_min: 1, ..Default::default() };
        let mut trace = Vec::new();
        let part = greedy_partition_traced(&f, &g, &positions, &cfg, Some(&mut trace)).unwrap();
        let mut assignment: Vec<u32> = (0..n as u32).collect();
        for rec in &trace {
            let before = energy_oracle(&f, &g, &assignment, lambda);
            // Apply this iteration's merges one at a time on current blocks.
            let mut current = assignment.clone();
            let mut realized = 0.0;
            for e in &rec.merges {
                let (p, q) = (e.source, e.target);
                let (bp, bq) = (
                    current[assignment.iter().position(|&a| a == p).unwrap()],
                    current[assignment.iter().position(|&a| a == q).unwrap()],
                );
                if bp == bq {
                    continue;
                }
                let (sp, mp) = block_stats(&f, &current, bp);
                let (sq, mq) = block_stats(&f, &current, bq);
                realized += merge_gain_raw(sp, &mp, sq, &mq, boundary_weight(&g, &current, bp, bq), lambda);
                for c in current.iter_mut() {
                    if *c == bq {
                        *c = bp;
                    }
                }
            }
            assignment.iter_mut().for_each(|a| *a = rec.node_map[*a as usize]);
            assert!(same_partition(&current, &assignment));
            let after = energy_oracle(&f, &g, &assignment, lambda);
            let decrease = before - after;
            assert!(
                (decrease - realized).abs() <= 1e-9 * decrease.abs().max(realized.abs()).max(1e-12),
                "decrease {decrease} vs realized {realized}"
            );
            assert!(after < before, "iteration raised the energy: {before} -> {after}");
            // With only pairwise merges the pre-merge gains add up exactly.
            let mut members = vec![0usize; rec.n_after];
            for &g in &rec.node_map {
                members[g as usize] += 1;
            }
            if members.iter().all(|&m| m <= 2) {
                let mut gain_of_group = vec![None; rec.n_after];
                for e in &rec.merges {
                    gain_of_group[rec.node_map[e.source as usize] as usize].get_or_insert(e.gain);
                }
                let predicted: f64 = gain_of_group.iter().flatten().sum();
                assert!((decrease - predicted).abs() <= 1e-9 * decrease.abs().max(1e-12));
                pairwise += 1;
            }
            iterations += 1;
        }
        assert_eq!(assignment, part.assignment);
    }
    assert!(iterations > 150);
    assert!(pairwise > 20, "only {pairwise} pairwise iterations");
}
