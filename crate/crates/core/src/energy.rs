//! Contour-regularized piecewise-constant energy of a partition, superpoint
//! statistics and the pairwise merge gain.
//!
//! For embeddings `F`, a partition `P` and edge weights `w`, the energy is
//! the squared distance of every point to its superpoint mean plus `lambda`
//! times the total weight of edges cut by the partition.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::graph::AdjacencyGraph;
use crate::numeric::{pairwise_sum, squared_distance};

#[derive(Debug, Clone, PartialEq)]
pub struct Superpoint {
    pub size: usize,
    pub mean_embedding: Vec<f64>,
    pub centroid: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEnergyBreakdown {
    pub fidelity: f64,
    pub contour: f64,
    pub total: f64,
}

/// Number of components of a 0-based assignment; errors if an id in range
/// is unused.
pub fn component_count(assignment: &[u32]) -> Result<usize> {
    let n = assignment.iter().max().map_or(0, |&m| m as usize + 1);
    let mut seen = vec![false; n];
    for &a in assignment {
        seen[a as usize] = true;
    }
    if let Some(empty) = seen.iter().position(|&s| !s) {
        return Err(Error::invalid(format!("component id {empty} has no members")));
    }
    Ok(n)
}

/// Exact size, mean embedding and mean position of every component.
pub fn superpoint_stats(f: &EmbeddingMatrix, assignment: &[u32], positions: &[[f64; 3]]) -> Result<Vec<Superpoint>> {
    if assignment.len() != f.rows() || positions.len() != f.rows() {
        return Err(Error::invalid("assignment, embeddings and positions differ in length"));
    }
    let n_comp = component_count(assignment)?;
    let m = f.cols();
    let mut sizes = vec![0usize; n_comp];
    let mut sums = vec![0.0; n_comp * m];
    let mut pos = vec![[0.0f64; 3]; n_comp];
    for (p, &c) in assignment.iter().enumerate() {
        let c = c as usize;
        sizes[c] += 1;
        for (s, v) in sums[c * m..(c + 1) * m].iter_mut().zip(f.row(p)) {
            *s += v;
        }
        for a in 0..3 {
            pos[c][a] += positions[p][a];
        }
    }
    Ok((0..n_comp)
        .map(|c| {
            let n = sizes[c] as f64;
            Superpoint {
                size: sizes[c],
                mean_embedding: sums[c * m..(c + 1) * m].iter().map(|s| s / n).collect(),
                centroid: pos[c].map(|x| x / n),
            }
        })
        .collect())
}

/// Evaluates the partition energy from its definition.
pub fn energy(f: &EmbeddingMatrix, graph: &AdjacencyGraph, assignment: &[u32], lambda: f64) -> Result<PartitionEnergyBreakdown> {
    if assignment.len() != f.rows() || graph.n_nodes != f.rows() {
        return Err(Error::invalid("assignment, embeddings and graph differ in size"));
    }
    let n_comp = component_count(assignment)?;
    let m = f.cols();
    let mut sizes = vec![0usize; n_comp];
    let mut means = vec![0.0; n_comp * m];
    for (p, &c) in assignment.iter().enumerate() {
        sizes[c as usize] += 1;
        for (s, v) in means[c as usize * m..(c as usize + 1) * m].iter_mut().zip(f.row(p)) {
            *s += v;
        }
    }
    for (c, &n) in sizes.iter().enumerate() {
        for s in &mut means[c * m..(c + 1) * m] {
            *s /= n as f64;
        }
    }
    let residuals: Vec<f64> = (0..f.rows())
        .into_par_iter()
        .map(|p| {
            let c = assignment[p] as usize;
            squared_distance(f.row(p), &means[c * m..(c + 1) * m])
        })
        .collect();
    let cuts: Vec<f64> = graph
        .edges
        .par_iter()
        .zip(graph.weights.par_iter())
        .map(|(&(u, v), &w)| {
            if assignment[u as usize] != assignment[v as usize] {
                w
            } else {
                0.0
            }
        })
        .collect();
    let fidelity = pairwise_sum(&residuals);
    let contour = lambda * pairwise_sum(&cuts);
    Ok(PartitionEnergyBreakdown {
        fidelity,
        contour,
        total: fidelity + contour,
    })
}

/// Energy decrease obtained by merging two adjacent components with sizes
/// `size_p`, `size_q`, means `mean_p`, `mean_q` and total boundary weight `w_pq`.
pub fn merge_gain_raw(size_p: f64, mean_p: &[f64], size_q: f64, mean_q: &[f64], w_pq: f64, lambda: f64) -> f64 {
    let harmonic = size_p * size_q / (size_p + size_q);
    -harmonic * squared_distance(mean_p, mean_q) + lambda * w_pq
}

pub fn merge_gain(p: &Superpoint, q: &Superpoint, w_pq: f64, lambda: f64) -> f64 {
    merge_gain_raw(p.size as f64, &p.mean_embedding, q.size as f64, &q.mean_embedding, w_pq, lambda)
}

/// Whether every block of `assignment` induces a connected subgraph.
pub fn blocks_connected(graph: &AdjacencyGraph, assignment: &[u32], n_blocks: usize) -> bool {
    let n = graph.n_nodes;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut unions = 0usize;
    for &(u, v) in &graph.edges {
        let (u, v) = (u as usize, v as usize);
        if assignment[u] != assignment[v] {
            continue;
        }
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            unions += 1;
        }
    }
    n - unions == n_blocks
}

/// Exhaustive minimizer of the energy over all partitions whose blocks are
/// connected in `graph`. Intended as a test oracle on tiny graphs.
pub fn brute_force_best_partition(
    f: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    lambda: f64,
    max_nodes: usize,
) -> Result<(Vec<u32>, f64)> {
    let n = graph.n_nodes;
    if n > max_nodes {
        return Err(Error::invalid(format!(
            "exhaustive search refused for {n} nodes (limit {max_nodes})"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("empty graph"));
    }
    // Restricted growth strings enumerate every set partition exactly once.
    let mut rgs = vec![0u32; n];
    let mut block_max = vec![0u32; n];
    let mut best: Option<(Vec<u32>, f64)> = None;
    loop {
        let n_blocks = block_max[n - 1] as usize + 1;
        if blocks_connected(graph, &rgs, n_blocks) {
            let e = energy(f, graph, &rgs, lambda)?.total;
            if best.as_ref().is_none_or(|(_, b)| e < *b) {
                best = Some((rgs.clone(), e));
            }
        }
        // Advance to the next restricted growth string.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(best.expect("the singleton partition is always valid"));
            }
            let limit = block_max[i - 1] + 1;
            if rgs[i] < limit {
                rgs[i] += 1;
                block_max[i] = block_max[i - 1].max(rgs[i]);
                for j in i + 1..n {
                    rgs[j] = 0;
                    block_max[j] = block_max[i];
                }
                break;
            }
            i -= 1;
        }
    }
}
