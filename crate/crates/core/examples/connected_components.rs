//! Connected components by max propagation, checked against a plain
//! union-find.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superpoint::wcc::wcc_max_prop;

fn union_find(n: usize, edges: &[(u32, u32)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut count = n;
    for &(u, v) in edges {
        let (a, b) = (root(&mut parent, u as usize), root(&mut parent, v as usize));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 1_000_000;
    for degree in [0.5, 1.0, 2.0] {
        let m = (degree * n as f64 / 2.0) as usize;
        let edges: Vec<(u32, u32)> = (0..m)
            .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
            .collect();
        let start = std::time::Instant::now();
        let labels = wcc_max_prop(n, &edges, 7);
        let found = *labels.iter().max().unwrap() as usize + 1;
        println!(
            "mean degree {degree}: {found} components in {:.2?} (union-find: {})",
            start.elapsed(),
            union_find(n, &edges)
        );
    }
}
