//! Greedy parallel merging of adjacent superpoints and hierarchical
//! partitions.
//!
//! Every point starts as its own superpoint. Each iteration:
//!
//! 1. proposes a directed merge `P -> Q` for each adjacent pair with a
//!    positive merge gain, or whenever `P` is smaller than the minimum size;
//! 2. keeps only the best-gain outgoing proposal of each source;
//! 3. merges the weakly connected components of the surviving proposals,
//!    which resolves chains like `P -> R <- Q` in one pass (a chain whose
//!    joint merge would raise the energy sheds its weakest voluntary link);
//! 4. recomputes sizes, means, centroids and the weight-summed adjacency.
//!
//! The loop stops when no proposal survives or a single superpoint remains.

use rayon::prelude::*;

use crate::energy::{merge_gain_raw, Superpoint};
use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::graph::{consolidate, prepare_graph, AdjacencyGraph};
use crate::numeric::split_seed;
use crate::wcc::wcc_max_prop;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionConfig {
    pub lambda: f64,
    pub sigma_min: usize,
    /// Neighbors used to reconnect isolated nodes at level entry.
    pub knn_reconnect: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            lambda: 0.02,
            sigma_min: 1,
            knn_reconnect: 8,
            seed: 0,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.sigma_min < 1 {
            return Err(Error::Config("minimum superpoint size must be >= 1".into()));
        }
        Ok(())
    }

    /// One config per level with the given minimum sizes.
    pub fn levels(lambda: f64, min_sizes: &[usize], knn_reconnect: usize, seed: u64) -> Vec<PartitionConfig> {
        min_sizes
            .iter()
            .enumerate()
            .map(|(l, &sigma_min)| PartitionConfig {
                lambda,
                sigma_min,
                knn_reconnect,
                seed: split_seed(seed, &format!("level-{l}")),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Component of every input point, consecutive from 0.
    pub assignment: Vec<u32>,
    pub components: Vec<Superpoint>,
    /// Adjacency between components; each weight sums the crossing edges.
    pub component_graph: AdjacencyGraph,
}

impl Partition {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPartition {
    pub levels: Vec<Partition>,
    /// `maps[l][c]` is the level `l + 1` component containing level `l`
    /// component `c`.
    pub maps: Vec<Vec<u32>>,
}

/// Nodes of the merge loop with accumulated statistics.
#[derive(Debug, Clone)]
pub struct MergeState {
    pub dim: usize,
    pub sizes: Vec<u64>,
    /// Row-major embedding sums, `n x dim`.
    pub sums: Vec<f64>,
    pub position_sums: Vec<[f64; 3]>,
    pub graph: AdjacencyGraph,
}

impl MergeState {
    /// Singleton superpoints over points.
    pub fn from_points(f: &EmbeddingMatrix, positions: &[[f64; 3]], graph: AdjacencyGraph) -> Result<Self> {
        if positions.len() != f.rows() || graph.n_nodes != f.rows() {
            return Err(Error::invalid(format!(
                "{} embeddings, {} positions and a graph over {} nodes",
                f.rows(),
                positions.len(),
                graph.n_nodes
            )));
        }
        if f.rows() == 0 {
            return Err(Error::invalid("cannot partition an empty set of points"));
        }
        Ok(MergeState {
            dim: f.cols(),
            sizes: vec![1; f.rows()],
            sums: f.as_slice().to_vec(),
            position_sums: positions.to_vec(),
            graph,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.sizes.len()
    }

    pub fn means(&self) -> Vec<f64> {
        let m = self.dim;
        let mut out = self.sums.clone();
        out.par_chunks_mut(m.max(1))
            .zip(self.sizes.par_iter())
            .for_each(|(row, &s)| {
                for v in row {
                    *v /= s as f64;
                }
            });
        out
    }

    pub fn centroids(&self) -> Vec<[f64; 3]> {
        self.position_sums
            .iter()
            .zip(&self.sizes)
            .map(|(p, &s)| p.map(|x| x / s as f64))
            .collect()
    }

    pub fn superpoints(&self) -> Vec<Superpoint> {
        let m = self.dim;
        let means = self.means();
        let centroids = self.centroids();
        (0..self.n_nodes())
            .map(|i| Superpoint {
                size: self.sizes[i] as usize,
                mean_embedding: means[i * m..(i + 1) * m].to_vec(),
                centroid: centroids[i],
            })
            .collect()
    }

    /// Merge gain of every edge of the current graph.
    pub fn edge_gains(&self, lambda: f64) -> Vec<f64> {
        let m = self.dim;
        let means = self.means();
        self.graph
            .edges
            .par_iter()
            .zip(self.graph.weights.par_iter())
            .map(|(&(u, v), &w)| {
                let (u, v) = (u as usize, v as usize);
                merge_gain_raw(
                    self.sizes[u] as f64,
                    &means[u * m..(u + 1) * m],
                    self.sizes[v] as f64,
                    &means[v * m..(v + 1) * m],
                    w,
                    lambda,
                )
            })
            .collect()
    }

    /// Merges nodes sharing a label in `groups` (consecutive ids).
    pub fn contract(&self, groups: &[u32], n_groups: usize) -> MergeState {
        let m = self.dim;
        let mut sizes = vec![0u64; n_groups];
        let mut sums = vec![0.0; n_groups * m];
        let mut position_sums = vec![[0.0f64; 3]; n_groups];
        for (i, &g) in groups.iter().enumerate() {
            let g = g as usize;
            sizes[g] += self.sizes[i];
            for (s, v) in sums[g * m..(g + 1) * m].iter_mut().zip(&self.sums[i * m..(i + 1) * m]) {
                *s += v;
            }
            for (s, v) in position_sums[g].iter_mut().zip(&self.position_sums[i]) {
                *s += v;
            }
        }
        MergeState {
            dim: m,
            sizes,
            sums,
            position_sums,
            graph: component_graph(&self.graph, groups, n_groups),
        }
    }
}

/// Adjacency between groups: crossing edges are mapped through `groups` and
/// their weights summed.
pub fn component_graph(graph: &AdjacencyGraph, groups: &[u32], n_groups: usize) -> AdjacencyGraph {
    let mapped: Vec<(u32, u32)> = graph
        .edges
        .par_iter()
        .map(|&(u, v)| (groups[u as usize], groups[v as usize]))
        .collect();
    consolidate(n_groups, &mapped, &graph.weights)
}

/// A directed merge proposal that survived conflict removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEdge {
    pub source: u32,
    pub target: u32,
    pub gain: f64,
}

/// Candidate merges and conflict removal. Returns at most one outgoing edge
/// per source; an empty result means no merge is left to do.
pub fn merge_step(state: &MergeState, cfg: &PartitionConfig) -> Vec<MergeEdge> {
    let gains = state.edge_gains(cfg.lambda);
    select_merges(state, &gains, cfg.sigma_min)
}

fn select_merges(state: &MergeState, gains: &[f64], sigma_min: usize) -> Vec<MergeEdge> {
    let n = state.n_nodes();
    let mut best: Vec<Option<(f64, u32)>> = vec![None; n];
    let mut offer = |src: u32, dst: u32, gain: f64| {
        if !(gain > 0.0 || (state.sizes[src as usize] as usize) < sigma_min) {
            return;
        }
        let slot = &mut best[src as usize];
        let better = match *slot {
            None => true,
            Some((g, t)) => gain > g || (gain == g && dst < t),
        };
        if better {
            *slot = Some((gain, dst));
        }
    };
    for (&(u, v), &g) in state.graph.edges.iter().zip(gains) {
        offer(u, v, g);
        offer(v, u, g);
    }
    best.iter()
        .enumerate()
        .filter_map(|(s, b)| {
            b.map(|(gain, target)| MergeEdge {
                source: s as u32,
                target,
                gain,
            })
        })
        .collect()
}

/// Energy decrease of merging every group of `groups` at once.
fn group_gains(state: &MergeState, groups: &[u32], n_groups: usize, lambda: f64) -> Vec<f64> {
    let m = state.dim;
    let mut size = vec![0.0; n_groups];
    let mut sum = vec![0.0; n_groups * m];
    // Sum over members of |S_i|^2 / s_i, the fidelity they already save.
    let mut spread = vec![0.0; n_groups];
    for (i, &g) in groups.iter().enumerate() {
        let g = g as usize;
        let s = state.sizes[i] as f64;
        let row = &state.sums[i * m..(i + 1) * m];
        size[g] += s;
        spread[g] += row.iter().map(|v| v * v).sum::<f64>() / s;
        for (acc, v) in sum[g * m..(g + 1) * m].iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut gain: Vec<f64> = (0..n_groups)
        .map(|g| sum[g * m..(g + 1) * m].iter().map(|v| v * v).sum::<f64>() / size[g] - spread[g])
        .collect();
    for (&(u, v), &w) in state.graph.edges.iter().zip(&state.graph.weights) {
        let g = groups[u as usize];
        if g == groups[v as usize] {
            gain[g as usize] += lambda * w;
        }
    }
    gain
}

/// Groups the surviving proposals into merge components. A chain of
/// individually positive merges can still raise the energy once contracted
/// together, so a group of three or more nodes whose joint merge would raise
/// the energy drops its weakest voluntary proposal and the grouping is
/// redone. Proposals forced by the minimum size are never dropped.
fn guard_merges(
    state: &MergeState,
    cfg: &PartitionConfig,
    mut merges: Vec<MergeEdge>,
    seed: u64,
) -> (Vec<MergeEdge>, Vec<u32>, usize) {
    let n = state.n_nodes();
    loop {
        let edges: Vec<(u32, u32)> = merges.iter().map(|e| (e.source, e.target)).collect();
        let groups = wcc_max_prop(n, &edges, seed);
        let n_groups = groups.iter().max().map_or(0, |&g| g as usize + 1);
        let gains = group_gains(state, &groups, n_groups, cfg.lambda);
        let mut members = vec![0usize; n_groups];
        for &g in &groups {
            members[g as usize] += 1;
        }
        let mut weakest: Vec<Option<usize>> = vec![None; n_groups];
        for (idx, e) in merges.iter().enumerate() {
            if (state.sizes[e.source as usize] as usize) < cfg.sigma_min {
                continue;
            }
            let slot = &mut weakest[groups[e.source as usize] as usize];
            if slot.is_none_or(|w| e.gain < merges[w].gain) {
                *slot = Some(idx);
            }
        }
        let mut drop: Vec<usize> = (0..n_groups)
            .filter(|&g| gains[g] < 0.0 && members[g] > 2)
            .filter_map(|g| weakest[g])
            .collect();
        if drop.is_empty() {
            return (merges, groups, n_groups);
        }
        drop.sort_unstable();
        log::trace!("dropping {} proposals from energy-raising chains", drop.len());
        let mut d = drop.into_iter().peekable();
        let mut idx = 0;
        merges.retain(|_| {
            let keep = d.peek() != Some(&idx);
            if !keep {
                d.next();
            }
            idx += 1;
            keep
        });
    }
}

/// What one merge iteration did.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub merges: Vec<MergeEdge>,
    /// Old node -> new node.
    pub node_map: Vec<u32>,
    pub n_before: usize,
    pub n_after: usize,
}

/// Upper bound on merge iterations for `n` nodes.
pub fn iteration_cap(n: usize) -> usize {
    (10.0 * (n.max(1) as f64).log2()).floor() as usize + 50
}

/// Runs the merge loop on `state`, whose graph must already be sanitized.
/// Returns the node assignment, the final state and optionally a trace.
pub fn greedy_merge(
    mut state: MergeState,
    cfg: &PartitionConfig,
    mut trace: Option<&mut Vec<IterationRecord>>,
) -> Result<(Vec<u32>, MergeState)> {
    cfg.validate()?;
    let n0 = state.n_nodes();
    let cap = iteration_cap(n0);
    let mut assignment: Vec<u32> = (0..n0 as u32).collect();
    let mut iterations = 0usize;
    while state.n_nodes() > 1 && state.graph.n_edges() > 0 {
        let merges = merge_step(&state, cfg);
        if merges.is_empty() {
            break;
        }
        if iterations == cap {
            return Err(Error::IterationCap {
                iterations,
                cap,
                n_nodes: n0,
            });
        }
        let seed = split_seed(cfg.seed, &format!("wcc-{iterations}"));
        let (merges, groups, n_groups) = guard_merges(&state, cfg, merges, seed);
        log::trace!(
            "merge iteration {iterations}: {} proposals, {} -> {n_groups} nodes",
            merges.len(),
            state.n_nodes()
        );
        let next = state.contract(&groups, n_groups);
        assignment.par_iter_mut().for_each(|a| *a = groups[*a as usize]);
        if let Some(t) = trace.as_deref_mut() {
            t.push(IterationRecord {
                merges,
                n_before: state.n_nodes(),
                n_after: n_groups,
                node_map: groups,
            });
        }
        state = next;
        iterations += 1;
    }
    Ok((assignment, state))
}

fn partition_from_state(assignment: Vec<u32>, state: MergeState) -> Partition {
    Partition {
        components: state.superpoints(),
        component_graph: state.graph,
        assignment,
    }
}

fn sanitize(state: &mut MergeState, k: usize) {
    let centroids = state.centroids();
    state.graph = prepare_graph(&state.graph, &centroids, k);
}

/// Single-level partition of points. The graph is sanitized first: self-loops
/// dropped, duplicates summed, isolated points linked to their nearest points.
pub fn greedy_partition(
    f: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    positions: &[[f64; 3]],
    cfg: &PartitionConfig,
) -> Result<Partition> {
    greedy_partition_traced(f, graph, positions, cfg, None)
}

pub fn greedy_partition_traced(
    f: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    positions: &[[f64; 3]],
    cfg: &PartitionConfig,
    trace: Option<&mut Vec<IterationRecord>>,
) -> Result<Partition> {
    cfg.validate()?;
    let mut state = MergeState::from_points(f, positions, graph.clone())?;
    sanitize(&mut state, cfg.knn_reconnect);
    let (assignment, state) = greedy_merge(state, cfg, trace)?;
    Ok(partition_from_state(assignment, state))
}

/// Nested partitions: level 1 partitions the points, each further level
/// partitions the previous level's superpoints using their mean embeddings,
/// sizes, centroids and component graph.
pub fn hierarchical_partition(
    f: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    positions: &[[f64; 3]],
    cfg_per_level: &[PartitionConfig],
) -> Result<HierarchicalPartition> {
    if cfg_per_level.is_empty() {
        return Err(Error::Config("at least one partition level is required".into()));
    }
    for cfg in cfg_per_level {
        cfg.validate()?;
    }
    if cfg_per_level.windows(2).any(|w| w[1].sigma_min < w[0].sigma_min) {
        log::warn!("minimum superpoint sizes decrease across levels");
    }
    let mut state = MergeState::from_points(f, positions, graph.clone())?;
    let mut levels: Vec<Partition> = Vec::with_capacity(cfg_per_level.len());
    let mut maps = Vec::with_capacity(cfg_per_level.len() - 1);
    for cfg in cfg_per_level {
        sanitize(&mut state, cfg.knn_reconnect);
        let (node_assignment, next) = greedy_merge(state, cfg, None)?;
        let point_assignment = match levels.last() {
            None => node_assignment,
            Some(prev) => {
                let composed = prev
                    .assignment
                    .par_iter()
                    .map(|&c| node_assignment[c as usize])
                    .collect();
                maps.push(node_assignment);
                composed
            }
        };
        state = next.clone();
        levels.push(partition_from_state(point_assignment, next));
    }
    Ok(HierarchicalPartition { levels, maps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(values: &[f64], sizes: &[u64], edges: &[(u32, u32)], weights: &[f64]) -> MergeState {
        let n = sizes.len();
        let sums = values.iter().zip(sizes).map(|(v, &s)| v * s as f64).collect();
        MergeState {
            dim: 1,
            sizes: sizes.to_vec(),
            sums,
            position_sums: vec![[0.0; 3]; n],
            graph: AdjacencyGraph::from_edges(n, edges, weights),
        }
    }

    #[test]
    fn nothing_to_merge() {
        let s = state(&[0.0, 10.0, 20.0], &[3, 3, 3], &[(0, 1), (1, 2)], &[1.0, 1.0]);
        let cfg = PartitionConfig { lambda: 0.01, sigma_min: 2, ..Default::default() };
        assert!(merge_step(&s, &cfg).is_empty());
    }

    #[test]
    fn conflict_removal_keeps_best_gain() {
        // Node 0 has neighbors with gains 3 and 1 (identical means, so the
        // gain is lambda times the boundary weight).
        let s = state(&[1.0, 1.0, 1.0], &[5, 5, 5], &[(0, 1), (0, 2)], &[3.0, 1.0]);
        let cfg = PartitionConfig { lambda: 1.0, sigma_min: 1, ..Default::default() };
        let merges = merge_step(&s, &cfg);
        let from0: Vec<_> = merges.iter().filter(|e| e.source == 0).collect();
        assert_eq!(from0.len(), 1);
        assert_eq!((from0[0].target, from0[0].gain), (1, 3.0));
    }

    #[test]
    fn small_node_forced_to_least_negative_neighbor() {
        // Singleton 1 between two large nodes, both gains negative.
        let s = state(&[0.0, 1.0, 3.0], &[10, 1, 10], &[(0, 1), (1, 2)], &[1.0, 1.0]);
        let cfg = PartitionConfig { lambda: 0.01, sigma_min: 5, ..Default::default() };
        let merges = merge_step(&s, &cfg);
        assert_eq!(merges.len(), 1);
        assert_eq!((merges[0].source, merges[0].target), (1, 0));
        assert!(merges[0].gain < 0.0);
    }

    #[test]
    fn gain_ties_go_to_smaller_target() {
        let s = state(&[1.0, 1.0, 1.0], &[1, 1, 1], &[(0, 1), (1, 2)], &[1.0, 1.0]);
        let cfg = PartitionConfig { lambda: 1.0, ..Default::default() };
        let from1 = merge_step(&s, &cfg).into_iter().find(|e| e.source == 1).unwrap();
        assert_eq!(from1.target, 0);
    }

    #[test]
    fn contraction_sums_statistics_and_weights() {
        let s = state(&[1.0, 3.0, 5.0, 7.0], &[1, 1, 2, 1], &[(0, 1), (1, 2), (0, 3), (2, 3)], &[1.0, 2.0, 0.5, 4.0]);
        let c = s.contract(&[0, 0, 1, 1], 2);
        assert_eq!(c.sizes, vec![2, 3]);
        assert_eq!(c.means(), vec![2.0, 17.0 / 3.0]);
        assert_eq!(c.graph.edges, vec![(0, 1)]);
        assert_eq!(c.graph.weights, vec![2.5]);
    }

    #[test]
    fn energy_raising_chain_is_cut() {
        // Each adjacent pair gains 0.1, but merging all three costs 0.8.
        let s = state(&[0.0, 1.0, 2.0], &[1, 1, 1], &[(0, 1), (1, 2)], &[0.6, 0.6]);
        let cfg = PartitionConfig { lambda: 1.0, ..Default::default() };
        assert_eq!(merge_step(&s, &cfg).len(), 3);
        let (assignment, _) = greedy_merge(s, &cfg, None).unwrap();
        assert_eq!(assignment, vec![0, 1, 1]);
    }

    #[test]
    fn cap_formula() {
        assert_eq!(iteration_cap(1), 50);
        assert_eq!(iteration_cap(1024), 150);
    }

    #[test]
    fn invalid_configs() {
        assert!(PartitionConfig { sigma_min: 0, ..Default::default() }.validate().is_err());
        assert!(PartitionConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
        let f = EmbeddingMatrix::zeros(2, 1);
        let g = AdjacencyGraph::from_edges(2, &[(0, 1)], &[1.0]);
        assert!(hierarchical_partition(&f, &g, &[[0.0; 3]; 2], &[]).is_err());
    }
}
