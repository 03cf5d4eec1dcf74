//! Small numeric helpers shared across modules.

/// Pairwise (tree) summation. The split points depend only on the slice
/// length, so the result is the same no matter how the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    let (lo, hi) = values.split_at(mid);
    if values.len() > 1 << 16 {
        let (a, b) = rayon::join(|| pairwise_sum(lo), || pairwise_sum(hi));
        a + b
    } else {
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Derives an independent 64-bit seed for a named consumer from the run seed.
pub fn split_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Relabels ids to consecutive values in order of first appearance.
/// Returns the new labels and the number of distinct ids. `bound` must
/// exceed every input id.
pub fn to_consecutive_ids(ids: &[u32], bound: usize) -> (Vec<u32>, usize) {
    let mut remap = vec![u32::MAX; bound];
    let mut next = 0u32;
    let out = ids
        .iter()
        .map(|&id| {
            let slot = &mut remap[id as usize];
            if *slot == u32::MAX {
                *slot = next;
                next += 1;
            }
            *slot
        })
        .collect();
    (out, next as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), 0.5 * 999.0 * 1000.0 / 2.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn consecutive_ids_follow_first_appearance() {
        let (ids, n) = to_consecutive_ids(&[7, 3, 7, 0, 3], 8);
        assert_eq!(ids, vec![0, 1, 0, 2, 1]);
        assert_eq!(n, 3);
    }

    #[test]
    fn split_seed_separates_labels() {
        assert_ne!(split_seed(1, "wcc"), split_seed(1, "sample"));
        assert_eq!(split_seed(1, "wcc"), split_seed(1, "wcc"));
    }
}
