//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance harness.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superpoint::features::EmbeddingMatrix;
use superpoint::graph::AdjacencyGraph;
use superpoint::synth::{synth_scene, SceneSpec};
use superpoint::transition::{tag_all_edges, transition_loss, TaggedEdge, TransitionConfig};
use superpoint::PointCloud;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Energy straight from its definition: squared distance of every point to
/// the plain average of its block, plus lambda times the cut weight.
pub fn energy_oracle(f: &EmbeddingMatrix, graph: &AdjacencyGraph, assignment: &[u32], lambda: f64) -> f64 {
    let n = f.rows();
    let m = f.cols();
    let blocks = assignment.iter().map(|&a| a as usize + 1).max().unwrap_or(0);
    let mut total = 0.0;
    for b in 0..blocks {
        let members: Vec<usize> = (0..n).filter(|&i| assignment[i] as usize == b).collect();
        if members.is_empty() {
            continue;
        }
        for c in 0..m {
            let mean = members.iter().map(|&i| f.get(i, c)).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|&i| (f.get(i, c) - mean).powi(2)).sum::<f64>();
        }
    }
    for (&(u, v), &w) in graph.edges.iter().zip(&graph.weights) {
        if assignment[u as usize] != assignment[v as usize] {
            total += lambda * w;
        }
    }
    total
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Connected components as a label per node (root ids, not consecutive).
pub fn components_oracle(n: usize, edges: &[(u32, u32)]) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for &(u, v) in edges {
        uf.union(u as usize, v as usize);
    }
    (0..n).map(|i| uf.find(i)).collect()
}

/// Whether two labelings describe the same partition.
pub fn same_partition<A: Copy + Eq + std::hash::Hash, B: Copy + Eq + std::hash::Hash>(a: &[A], b: &[B]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut ab = HashMap::new();
    let mut ba = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

pub fn random_embeddings(rng: &mut ChaCha8Rng, n: usize, m: usize) -> EmbeddingMatrix {
    let values = (0..n * m).map(|_| rng.random::<f64>()).collect();
    EmbeddingMatrix::new(values, n, m).unwrap()
}

/// Random simple graph: a spanning path when `connected`, plus each other
/// pair with probability `p`. Weights in [0.5, 2).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, connected: bool) -> AdjacencyGraph {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if (connected && v == u + 1) || rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let weights: Vec<f64> = edges.iter().map(|_| rng.random_range(0.5..2.0)).collect();
    AdjacencyGraph::from_edges(n, &edges, &weights)
}

pub fn random_positions(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

/// Sorted indices of the k nearest other points, ties to the smaller index.
pub fn brute_force_knn(points: &[[f64; 3]], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, q)| {
            let p = points[i];
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2), j)
        })
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

pub const TWO_PLANES: &str = "
[plane]
class = 0
origin = 0, 0, 0
u = 2, 0, 0
v = 0, 1.5, 0
density = 1500
color = 0.6, 0.6, 0.6
color_noise = 0.02
noise = 0.005

[plane]
class = 1
origin = 0, 1.5, 0
u = 2, 0, 0
v = 0, 0, 1.2
density = 1500
color = 0.8, 0.7, 0.5
color_noise = 0.02
noise = 0.005
";

pub const FLOOR_AND_BOXES: &str = "
[plane]
class = 0
origin = 0, 0, 0
u = 2.5, 0, 0
v = 0, 2, 0
density = 1200
color = 0.5, 0.5, 0.5
noise = 0.004

[box]
class = 1
min = 0.4, 0.4, 0
max = 1.0, 0.9, 0.5
open_bottom = true
density = 1200
color = 0.8, 0.4, 0.2
noise = 0.004

[cylinder]
class = 2
base = 1.8, 1.4, 0
axis = 0, 0, 0.8
radius = 0.25
density = 1200
color = 0.2, 0.4, 0.8
noise = 0.004
";

pub fn scene(text: &str, seed: u64) -> PointCloud {
    synth_scene(seed, &SceneSpec::parse(text).unwrap()).unwrap()
}

/// Size and plain mean of one block.
pub fn block_stats(f: &EmbeddingMatrix, assignment: &[u32], block: u32) -> (f64, Vec<f64>) {
    let members: Vec<usize> = (0..f.rows()).filter(|&i| assignment[i] == block).collect();
    let mean = (0..f.cols())
        .map(|c| members.iter().map(|&i| f.get(i, c)).sum::<f64>() / members.len() as f64)
        .collect();
    (members.len() as f64, mean)
}

pub fn boundary_weight(graph: &AdjacencyGraph, assignment: &[u32], p: u32, q: u32) -> f64 {
    graph
        .edges
        .iter()
        .zip(&graph.weights)
        .filter(|(&(u, v), _)| {
            let (a, b) = (assignment[u as usize], assignment[v as usize]);
            (a == p && b == q) || (a == q && b == p)
        })
        .map(|(_, &w)| w)
        .sum()
}

/// Random instance whose edges all have distance >= 0.2, so affinities stay
/// away from 1 and the loss is smooth.
pub fn gradient_instance(seed: u64, n: usize, m: usize) -> (EmbeddingMatrix, Vec<TaggedEdge>, TransitionConfig) {
    let mut r = rng(seed);
    let f = random_embeddings(&mut r, n, m);
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            let d = superpoint::numeric::squared_distance(f.row(u as usize), f.row(v as usize)).sqrt();
            if d < 0.2 || r.random::<f64>() > 0.3 {
                continue;
            }
            if r.random::<bool>() {
                intra.push((u, v));
            } else {
                inter.push((u, v));
            }
        }
    }
    let cfg = TransitionConfig { tau: r.random_range(0.5..2.0), ..Default::default() };
    (f, tag_all_edges(&intra, &inter), cfg)
}

pub fn max_relative_gradient_error(f: &EmbeddingMatrix, edges: &[TaggedEdge], cfg: &TransitionConfig) -> f64 {
    let analytic = transition_loss(f, edges, cfg).unwrap();
    assert_eq!(analytic.clamped, 0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let base = f.as_slice().to_vec();
    for i in 0..base.len() {
        let shifted = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            let g = EmbeddingMatrix::new(v, f.rows(), f.cols()).unwrap();
            transition_loss(&g, edges, cfg).unwrap().loss
        };
        let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
        let a = analytic.grad[i];
        let scale = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

