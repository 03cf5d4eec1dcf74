//! Exact k-nearest-neighbor search over 3D points.
//!
//! Neighbors are ordered by `(squared distance, index)`, so results are
//! reproducible under coordinate ties.

use rayon::prelude::*;

const LEAF_SIZE: usize = 12;
/// Below this many points, queries scan all pairs instead of building a tree.
pub const BRUTE_FORCE_BELOW: usize = 256;

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Leaf { start: u32, end: u32 },
    Split { left: u32, right: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    kind: NodeKind,
}

pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Bounded candidate list kept sorted ascending by `(d2, index)`.
struct Candidates {
    k: usize,
    items: Vec<(f64, u32)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Candidates {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].0
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, d2: f64, idx: u32) {
        let key = (d2, idx);
        if self.full() {
            let w = self.items[self.k - 1];
            if !lex_less(key, w) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&c| lex_less(c, key));
        self.items.insert(pos, key);
    }
}

fn lex_less(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn box_dist2(q: &[f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let e = if q[a] < lo[a] {
            lo[a] - q[a]
        } else if q[a] > hi[a] {
            q[a] - hi[a]
        } else {
            0.0
        };
        d += e * e;
    }
    d
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf {
                start: start as u32,
                end: end as u32,
            },
        });
        let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        if end - start <= LEAF_SIZE || extent.iter().all(|&e| e == 0.0) {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| extent[a].total_cmp(&extent[b]))
            .unwrap();
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize].kind = NodeKind::Split { left, right };
        id
    }

    /// The `k` nearest points to `query`, skipping index `exclude`. Sorted
    /// ascending by `(squared distance, index)`.
    pub fn nearest(&self, query: &[f64; 3], k: usize, exclude: Option<u32>) -> Vec<(f64, u32)> {
        let mut cands = Candidates::new(k);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, exclude, &mut cands);
        }
        cands.items
    }

    fn search(&self, node: u32, q: &[f64; 3], exclude: Option<u32>, cands: &mut Candidates) {
        let n = &self.nodes[node as usize];
        match n.kind {
            NodeKind::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if Some(i) != exclude {
                        cands.offer(dist2(q, &self.points[i as usize]), i);
                    }
                }
            }
            NodeKind::Split { left, right } => {
                let l = &self.nodes[left as usize];
                let r = &self.nodes[right as usize];
                let dl = box_dist2(q, &l.lo, &l.hi);
                let dr = box_dist2(q, &r.lo, &r.hi);
                let (first, df, second, ds) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                // Equal distances are still visited: they may hold a tie
                // with a smaller index.
                if df <= cands.worst() {
                    self.search(first, q, exclude, cands);
                }
                if ds <= cands.worst() {
                    self.search(second, q, exclude, cands);
                }
            }
        }
    }
}

fn brute_force_nearest(points: &[[f64; 3]], q: &[f64; 3], k: usize, exclude: Option<u32>) -> Vec<(f64, u32)> {
    let mut cands = Candidates::new(k);
    if k > 0 {
        for (i, p) in points.iter().enumerate() {
            if Some(i as u32) != exclude {
                cands.offer(dist2(q, p), i as u32);
            }
        }
    }
    cands.items
}

/// The `k` nearest other points of every point, as a flat row-major `n x k`
/// index array. Requires `k < points.len()`.
pub fn knn_all(points: &[[f64; 3]], k: usize) -> Vec<u32> {
    assert!(k < points.len(), "k must be smaller than the point count");
    let n = points.len();
    let mut out = vec![0u32; n * k];
    if k == 0 {
        return out;
    }
    if n < BRUTE_FORCE_BELOW {
        out.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
            let nn = brute_force_nearest(points, &points[i], k, Some(i as u32));
            for (slot, (_, j)) in row.iter_mut().zip(nn) {
                *slot = j;
            }
        });
    } else {
        let tree = KdTree::build(points);
        out.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
            let nn = tree.nearest(&points[i], k, Some(i as u32));
            for (slot, (_, j)) in row.iter_mut().zip(nn) {
                *slot = j;
            }
        });
    }
    out
}

/// Nearest neighbors of selected points only (used to reconnect isolated
/// nodes). Returns one sorted list per query index.
pub fn knn_of(points: &[[f64; 3]], queries: &[u32], k: usize) -> Vec<Vec<u32>> {
    let k = k.min(points.len().saturating_sub(1));
    let strip = |v: Vec<(f64, u32)>| v.into_iter().map(|(_, j)| j).collect();
    if points.len() < BRUTE_FORCE_BELOW {
        queries
            .par_iter()
            .map(|&q| strip(brute_force_nearest(points, &points[q as usize], k, Some(q))))
            .collect()
    } else {
        let tree = KdTree::build(points);
        queries
            .par_iter()
            .map(|&q| strip(tree.nearest(&points[q as usize], k, Some(q))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..2000)
            .map(|_| [rng.random(), rng.random(), rng.random::<f64>() * 0.1])
            .collect();
        let tree = KdTree::build(&pts);
        for i in (0..pts.len()).step_by(7) {
            let a = tree.nearest(&pts[i], 9, Some(i as u32));
            let b = brute_force_nearest(&pts, &pts[i], 9, Some(i as u32));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ties_broken_by_index_on_a_lattice() {
        // Integer lattice: many exactly equal distances.
        let pts: Vec<[f64; 3]> = (0..1000)
            .map(|i| [(i % 10) as f64, ((i / 10) % 10) as f64, (i / 100) as f64])
            .collect();
        let tree = KdTree::build(&pts);
        for i in [0usize, 55, 555, 999] {
            let a = tree.nearest(&pts[i], 8, Some(i as u32));
            let b = brute_force_nearest(&pts, &pts[i], 8, Some(i as u32));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn duplicate_points_do_not_break_the_build() {
        let pts = vec![[1.0, 2.0, 3.0]; 300];
        let nn = knn_all(&pts, 4);
        assert_eq!(&nn[..4], &[1, 2, 3, 4]);
        assert_eq!(&nn[4..8], &[0, 2, 3, 4]);
    }
}
