//! Connected components by randomized max propagation and contraction.
//!
//! Each round assigns every node a random distinct id, lets every node take
//! the maximum id over its closed neighborhood, and contracts nodes sharing
//! an id. Rounds repeat on the contracted graph until no id changes.

use std::sync::atomic::{AtomicU32, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::numeric::to_consecutive_ids;

/// One round of max propagation over closed neighborhoods.
pub fn max_propagation(ids: &[u32], edges: &[(u32, u32)]) -> Vec<u32> {
    let out: Vec<AtomicU32> = ids.iter().map(|&i| AtomicU32::new(i)).collect();
    edges.par_iter().for_each(|&(u, v)| {
        out[u as usize].fetch_max(ids[v as usize], Ordering::Relaxed);
        out[v as usize].fetch_max(ids[u as usize], Ordering::Relaxed);
    });
    out.into_iter().map(AtomicU32::into_inner).collect()
}

/// Maps every edge through `labels`, dropping self-loops and duplicates.
pub fn contract_edges(labels: &[u32], edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut keys: Vec<u64> = edges
        .par_iter()
        .filter_map(|&(u, v)| {
            let (a, b) = (labels[u as usize], labels[v as usize]);
            (a != b).then(|| (u64::from(a.min(b)) << 32) | u64::from(a.max(b)))
        })
        .collect();
    keys.par_sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|k| ((k >> 32) as u32, k as u32))
        .collect()
}

/// Component id of every node: two nodes share an id iff they are connected.
/// Ids are consecutive from 0 in order of first appearance, so the output
/// does not depend on `seed`. Self-loops are ignored.
pub fn wcc_max_prop(n_nodes: usize, edges: &[(u32, u32)], seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // labels[v]: node of the current contracted graph that holds v.
    let mut labels: Vec<u32> = (0..n_nodes as u32).collect();
    let mut n = n_nodes;
    let mut current: Vec<(u32, u32)> = edges.iter().copied().filter(|(u, v)| u != v).collect();
    while !current.is_empty() {
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut rng);
        let maxed = max_propagation(&ids, &current);
        if maxed == ids {
            break;
        }
        let (consec, n_next) = to_consecutive_ids(&maxed, n);
        current = contract_edges(&consec, &current);
        labels.par_iter_mut().for_each(|l| *l = consec[*l as usize]);
        n = n_next;
    }
    to_consecutive_ids(&labels, n.max(1)).0
}
