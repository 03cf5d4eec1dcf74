//! Undirected weighted adjacency graphs over points or superpoints.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kdtree;

/// Undirected simple graph. Edges are stored once, canonically with `u < v`,
/// sorted, each with a positive finite weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    pub n_nodes: usize,
    pub edges: Vec<(u32, u32)>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub k: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { k: 8 }
    }
}

impl AdjacencyGraph {
    pub fn empty(n_nodes: usize) -> Self {
        AdjacencyGraph {
            n_nodes,
            edges: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Builds a graph from raw edges, consolidating it as [`consolidate`] does.
    pub fn from_edges(n_nodes: usize, edges: &[(u32, u32)], weights: &[f64]) -> Self {
        consolidate(n_nodes, edges, weights)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Checks the simple-graph invariants.
    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.weights.len() {
            return Err(Error::invalid("edge and weight counts differ"));
        }
        for (i, (&(u, v), &w)) in self.edges.iter().zip(&self.weights).enumerate() {
            if u >= v || v as usize >= self.n_nodes {
                return Err(Error::invalid(format!("edge {i} ({u},{v}) is not canonical")));
            }
            if i > 0 && self.edges[i - 1] >= (u, v) {
                return Err(Error::invalid(format!("edge {i} ({u},{v}) is unsorted or duplicated")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("edge {i} has weight {w}")));
            }
        }
        Ok(())
    }

    /// Writes `u,v,w` rows, for debugging.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("u,v,w\n");
        for (&(u, v), w) in self.edges.iter().zip(&self.weights) {
            out.push_str(&format!("{u},{v},{w}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn pack(u: u32, v: u32) -> u64 {
    (u64::from(u) << 32) | u64::from(v)
}

fn unpack(key: u64) -> (u32, u32) {
    ((key >> 32) as u32, key as u32)
}

/// Drops self-loops and merges duplicate undirected edges by summing their
/// weights. The output is canonical and sorted.
pub fn consolidate(n_nodes: usize, edges: &[(u32, u32)], weights: &[f64]) -> AdjacencyGraph {
    debug_assert_eq!(edges.len(), weights.len());
    let mut keyed: Vec<(u64, f64)> = edges
        .par_iter()
        .zip(weights.par_iter())
        .filter(|(&(u, v), _)| u != v)
        .map(|(&(u, v), &w)| (pack(u.min(v), u.max(v)), w))
        .collect();
    // Stable sort keeps duplicates in input order, so their weight sum does
    // not depend on the thread count.
    keyed.par_sort_by_key(|&(k, _)| k);
    let mut out_edges = Vec::with_capacity(keyed.len());
    let mut out_weights: Vec<f64> = Vec::with_capacity(keyed.len());
    let mut last = u64::MAX;
    for (key, w) in keyed {
        if key == last {
            *out_weights.last_mut().unwrap() += w;
        } else {
            out_edges.push(unpack(key));
            out_weights.push(w);
            last = key;
        }
    }
    AdjacencyGraph {
        n_nodes,
        edges: out_edges,
        weights: out_weights,
    }
}

/// Symmetrizes a directed `n x k` neighbor table into an undirected graph
/// with unit weights.
pub fn graph_from_neighbors(n_nodes: usize, neighbors: &[u32], stride: usize, k: usize) -> AdjacencyGraph {
    assert!(k <= stride);
    let mut keys: Vec<u64> = neighbors
        .par_chunks(stride.max(1))
        .enumerate()
        .flat_map_iter(|(p, row)| {
            let p = p as u32;
            row[..k].iter().map(move |&q| pack(p.min(q), p.max(q)))
        })
        .collect();
    keys.par_sort_unstable();
    keys.dedup();
    AdjacencyGraph {
        n_nodes,
        edges: keys.iter().map(|&k| unpack(k)).collect(),
        weights: vec![1.0; keys.len()],
    }
}

/// Undirected k-nearest-neighbor graph with unit weights. Distance ties are
/// broken toward the smaller point index.
pub fn build_knn_graph(cloud: &PointCloud, cfg: &GraphConfig) -> Result<AdjacencyGraph> {
    let n = cloud.len();
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n <= cfg.k {
        return Err(Error::invalid(format!(
            "k-NN graph needs more than k={} points, got {n}",
            cfg.k
        )));
    }
    let nn = kdtree::knn_all(&cloud.positions, cfg.k);
    Ok(graph_from_neighbors(n, &nn, cfg.k, cfg.k))
}

/// Sanitizes a graph: removes self-loops, sums duplicate edges, and connects
/// every isolated node to its `k` nearest nodes (by `positions`) with unit
/// weight.
pub fn prepare_graph(graph: &AdjacencyGraph, positions: &[[f64; 3]], k: usize) -> AdjacencyGraph {
    let n = graph.n_nodes;
    assert_eq!(positions.len(), n, "one position per node required");
    let clean = consolidate(n, &graph.edges, &graph.weights);
    if n < 2 || k == 0 {
        return clean;
    }
    let deg = clean.degrees();
    let isolated: Vec<u32> = (0..n as u32).filter(|&i| deg[i as usize] == 0).collect();
    if isolated.is_empty() {
        return clean;
    }
    let nearest = kdtree::knn_of(positions, &isolated, k);
    let mut extra: Vec<u64> = isolated
        .iter()
        .zip(&nearest)
        .flat_map(|(&p, nn)| nn.iter().map(move |&q| pack(p.min(q), p.max(q))))
        .collect();
    extra.sort_unstable();
    extra.dedup();

    // Two isolated nodes may pick each other; each reconnection edge counts once.
    let mut edges = clean.edges;
    let mut weights = clean.weights;
    for key in extra {
        edges.push(unpack(key));
        weights.push(1.0);
    }
    consolidate(n, &edges, &weights)
}

pub type EdgeList = Vec<(u32, u32)>;

/// Splits edges into same-label (intra) and different-label (inter) sets.
pub fn split_edges_by_label(graph: &AdjacencyGraph, labels: &[u32]) -> Result<(EdgeList, EdgeList)> {
    if labels.len() != graph.n_nodes {
        return Err(Error::invalid(format!(
            "{} labels for a graph of {} nodes",
            labels.len(),
            graph.n_nodes
        )));
    }
    Ok(graph
        .edges
        .iter()
        .partition(|&&(u, v)| labels[u as usize] == labels[v as usize]))
}
