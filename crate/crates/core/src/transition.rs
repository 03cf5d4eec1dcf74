//! Contrastive transition loss over graph edges.
//!
//! Same-class (intra) edges are pulled toward affinity 1 and cross-class
//! (inter) edges pushed toward affinity 0, where the affinity of two
//! embeddings is `exp(-|f_p - f_q| / tau)`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::numeric::pairwise_sum;

/// Inter-edge affinities are clamped to at most `1 - CLAMP_EPS`.
pub const CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConfig {
    pub tau: f64,
    /// Upper bound on the fraction of intra edges among the sampled edges.
    pub rho_intra: f64,
    pub seed: u64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            tau: 1.0,
            rho_intra: 0.1,
            seed: 0,
        }
    }
}

impl TransitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.rho_intra > 0.0 && self.rho_intra <= 1.0) {
            return Err(Error::Config(format!(
                "rho_intra must lie in (0, 1], got {}",
                self.rho_intra
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedEdge {
    pub u: u32,
    pub v: u32,
    pub inter: bool,
}

pub fn affinity(f_p: &[f64], f_q: &[f64], tau: f64) -> f64 {
    assert_eq!(f_p.len(), f_q.len(), "embedding dimensions differ");
    (-distance(f_p, f_q) / tau).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Number of intra edges kept: `min(|intra|, floor(rho |inter| / (1 - rho)))`,
/// so that intra edges make up at most `rho` of the sampled set. With no
/// inter edge, or `rho = 1`, every intra edge is kept.
pub fn intra_quota(n_intra: usize, n_inter: usize, rho: f64) -> usize {
    if n_inter == 0 || rho >= 1.0 {
        return n_intra;
    }
    // The small offset absorbs rounding in exact cases like rho = 0.3, 70 inter.
    let bound = (rho * n_inter as f64 / (1.0 - rho) + 1e-9).floor() as usize;
    n_intra.min(bound)
}

/// Keeps every inter edge and a uniform random subset (without replacement)
/// of the intra edges. Kept intra edges come first, in their input order.
pub fn sample_edges(intra: &[(u32, u32)], inter: &[(u32, u32)], cfg: &TransitionConfig) -> Vec<TaggedEdge> {
    let quota = intra_quota(intra.len(), inter.len(), cfg.rho_intra);
    let mut kept: Vec<usize> = if quota == intra.len() {
        (0..intra.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        sample(&mut rng, intra.len(), quota).into_vec()
    };
    kept.sort_unstable();
    kept.iter()
        .map(|&i| TaggedEdge {
            u: intra[i].0,
            v: intra[i].1,
            inter: false,
        })
        .chain(inter.iter().map(|&(u, v)| TaggedEdge { u, v, inter: true }))
        .collect()
}

/// Tags every edge without subsampling.
pub fn tag_all_edges(intra: &[(u32, u32)], inter: &[(u32, u32)]) -> Vec<TaggedEdge> {
    intra
        .iter()
        .map(|&(u, v)| TaggedEdge { u, v, inter: false })
        .chain(inter.iter().map(|&(u, v)| TaggedEdge { u, v, inter: true }))
        .collect()
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// Gradient with respect to the embeddings, row-major like the input.
    pub grad: Vec<f64>,
    /// Inter edges whose affinity had to be clamped below 1.
    pub clamped: usize,
}

struct EdgeTerm {
    loss: f64,
    /// Scalar `s` such that the gradient on `f_u` is `s * (f_u - f_v)`.
    scale: f64,
    clamped: bool,
}

fn edge_term(fu: &[f64], fv: &[f64], inter: bool, tau: f64) -> EdgeTerm {
    let d = distance(fu, fv);
    if !inter {
        // -log a = d / tau; zero distance contributes nothing.
        let scale = if d > 0.0 { 1.0 / (tau * d) } else { 0.0 };
        return EdgeTerm {
            loss: d / tau,
            scale,
            clamped: false,
        };
    }
    let mut one_minus_a = -(-d / tau).exp_m1();
    let clamped = one_minus_a <= CLAMP_EPS;
    if clamped {
        one_minus_a = CLAMP_EPS;
    }
    let a = 1.0 - one_minus_a;
    let scale = if d > 0.0 {
        -(a / one_minus_a) / (tau * d)
    } else {
        0.0
    };
    EdgeTerm {
        loss: -one_minus_a.ln(),
        scale,
        clamped,
    }
}

/// Loss `sum_intra -log a + sum_inter -log(1 - a)` and its exact gradient.
pub fn transition_loss(f: &EmbeddingMatrix, edges: &[TaggedEdge], cfg: &TransitionConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let m = f.cols();
    if let Some(e) = edges
        .iter()
        .find(|e| e.u as usize >= f.rows() || e.v as usize >= f.rows())
    {
        return Err(Error::invalid(format!(
            "edge ({}, {}) references a row beyond {}",
            e.u,
            e.v,
            f.rows()
        )));
    }
    let terms: Vec<EdgeTerm> = edges
        .par_iter()
        .map(|e| edge_term(f.row(e.u as usize), f.row(e.v as usize), e.inter, cfg.tau))
        .collect();
    let losses: Vec<f64> = terms.iter().map(|t| t.loss).collect();
    let loss = pairwise_sum(&losses);

    let mut grad = vec![0.0; f.rows() * m];
    for (e, t) in edges.iter().zip(&terms) {
        if t.scale == 0.0 {
            continue;
        }
        let (u, v) = (e.u as usize, e.v as usize);
        for c in 0..m {
            let g = t.scale * (f.get(u, c) - f.get(v, c));
            grad[u * m + c] += g;
            grad[v * m + c] -= g;
        }
    }
    let clamped = terms.iter().filter(|t| t.clamped).count();
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("transition loss or gradient".into()));
    }
    Ok(LossOutput { loss, grad, clamped })
}
