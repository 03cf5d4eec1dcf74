//! Per-point embeddings: handcrafted geometric/radiometric features and a
//! linear map fitted with the transition loss.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::graph::{split_edges_by_label, AdjacencyGraph};
use crate::kdtree;
use crate::numeric::split_seed;
use crate::transition::{sample_edges, tag_all_edges, transition_loss, TaggedEdge, TransitionConfig};

/// Dense row-major `rows x cols` matrix of per-node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl EmbeddingMatrix {
    pub fn new(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix entry".into()));
        }
        Ok(EmbeddingMatrix { values, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        EmbeddingMatrix {
            values: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `self * rhs`, computed row-parallel.
    pub fn matmul(&self, rhs: &EmbeddingMatrix) -> EmbeddingMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let out_cols = rhs.cols;
        let mut out = vec![0.0; self.rows * out_cols];
        out.par_chunks_mut(out_cols.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                for (k, &x) in self.row(i).iter().enumerate() {
                    for (o, &w) in row.iter_mut().zip(rhs.row(k)) {
                        *o += x * w;
                    }
                }
            });
        EmbeddingMatrix {
            values: out,
            rows: self.rows,
            cols: out_cols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureChannels {
    pub linearity: bool,
    pub planarity: bool,
    pub scattering: bool,
    pub verticality: bool,
    pub elevation: bool,
    pub color: bool,
    pub intensity: bool,
}

impl Default for FeatureChannels {
    fn default() -> Self {
        FeatureChannels {
            linearity: true,
            planarity: true,
            scattering: true,
            verticality: true,
            elevation: true,
            color: true,
            intensity: true,
        }
    }
}

impl FeatureChannels {
    pub const NAMES: [&'static str; 7] = [
        "linearity",
        "planarity",
        "scattering",
        "verticality",
        "elevation",
        "color",
        "intensity",
    ];

    pub fn none() -> Self {
        FeatureChannels {
            linearity: false,
            planarity: false,
            scattering: false,
            verticality: false,
            elevation: false,
            color: false,
            intensity: false,
        }
    }

    /// Parses a comma-separated channel list such as `planarity,color`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut ch = FeatureChannels::none();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "linearity" => ch.linearity = true,
                "planarity" => ch.planarity = true,
                "scattering" => ch.scattering = true,
                "verticality" => ch.verticality = true,
                "elevation" => ch.elevation = true,
                "color" => ch.color = true,
                "intensity" => ch.intensity = true,
                other => return Err(Error::Config(format!("unknown feature channel '{other}'"))),
            }
        }
        Ok(ch)
    }

    pub fn to_list(&self) -> String {
        let flags = [
            self.linearity,
            self.planarity,
            self.scattering,
            self.verticality,
            self.elevation,
            self.color,
            self.intensity,
        ];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(",")
    }

    fn any(&self) -> bool {
        !self.to_list().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub neighborhood_k: usize,
    pub channels: FeatureChannels,
    /// Min-max rescale every channel over the cloud.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            neighborhood_k: 16,
            channels: FeatureChannels::default(),
            normalize: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_k < 3 {
            return Err(Error::Config(format!(
                "feature neighborhood needs at least 3 neighbors, got {}",
                self.neighborhood_k
            )));
        }
        if !self.channels.any() {
            return Err(Error::Config("no feature channel enabled".into()));
        }
        Ok(())
    }
}

/// Dimensionality descriptors of one neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalShape {
    pub linearity: f64,
    pub planarity: f64,
    pub scattering: f64,
    pub verticality: f64,
}

/// Eigen-analysis of the covariance of `points`. Degenerate neighborhoods
/// (all points coincident) yield zeros.
pub fn local_shape(points: impl Iterator<Item = [f64; 3]> + Clone) -> LocalShape {
    let mut n = 0.0;
    let mut mean = [0.0; 3];
    for p in points.clone() {
        n += 1.0;
        for a in 0..3 {
            mean[a] += p[a];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in r..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    for r in 0..3 {
        for c in r..3 {
            cov[(r, c)] /= n;
            cov[(c, r)] = cov[(r, c)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let s1 = l[0].sqrt();
    if !s1.is_finite() || s1 <= 0.0 {
        return LocalShape {
            linearity: 0.0,
            planarity: 0.0,
            scattering: 0.0,
            verticality: 0.0,
        };
    }
    let (s2, s3) = (l[1].sqrt(), l[2].sqrt());
    let normal = eig.eigenvectors.column(order[2]);
    LocalShape {
        linearity: ((s1 - s2) / s1).clamp(0.0, 1.0),
        planarity: ((s2 - s3) / s1).clamp(0.0, 1.0),
        scattering: (s3 / s1).clamp(0.0, 1.0),
        verticality: normal[2].abs().clamp(0.0, 1.0),
    }
}

/// Handcrafted features from a fresh k-NN query.
pub fn geometric_features(cloud: &PointCloud, cfg: &FeatureConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if cloud.len() <= cfg.neighborhood_k {
        return Err(Error::invalid(format!(
            "features need more than {} points, got {}",
            cfg.neighborhood_k,
            cloud.len()
        )));
    }
    let nn = kdtree::knn_all(&cloud.positions, cfg.neighborhood_k);
    geometric_features_with_neighbors(cloud, cfg, &nn, cfg.neighborhood_k)
}

/// Handcrafted features using a precomputed neighbor table (`stride`
/// columns, at least `neighborhood_k` of them). Each neighborhood is the
/// point itself plus its `neighborhood_k` nearest neighbors.
///
/// Channel order: linearity, planarity, scattering, verticality, elevation,
/// red, green, blue, intensity; disabled or absent channels are skipped.
pub fn geometric_features_with_neighbors(
    cloud: &PointCloud,
    cfg: &FeatureConfig,
    neighbors: &[u32],
    stride: usize,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let n = cloud.len();
    let k = cfg.neighborhood_k;
    if stride < k || neighbors.len() != n * stride {
        return Err(Error::invalid("neighbor table does not match the feature neighborhood"));
    }
    let ch = cfg.channels;
    let colors = cloud.colors.as_ref().filter(|_| ch.color);
    let intensity = cloud.intensity.as_ref().filter(|_| ch.intensity);
    let geom = [ch.linearity, ch.planarity, ch.scattering, ch.verticality];
    let n_geom = geom.iter().filter(|&&g| g).count();
    let m = n_geom
        + usize::from(ch.elevation)
        + if colors.is_some() { 3 } else { 0 }
        + usize::from(intensity.is_some());
    if m == 0 {
        return Err(Error::Config("no enabled feature channel is available for this cloud".into()));
    }

    let (lo, hi) = cloud.bounding_box();
    let z_range = hi[2] - lo[2];
    let pos = &cloud.positions;
    let mut values = vec![0.0; n * m];
    values.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let mut c = 0;
        if n_geom > 0 {
            let nbrs = &neighbors[i * stride..i * stride + k];
            let pts = std::iter::once(pos[i]).chain(nbrs.iter().map(|&j| pos[j as usize]));
            let s = local_shape(pts);
            for (on, v) in geom.iter().zip([s.linearity, s.planarity, s.scattering, s.verticality]) {
                if *on {
                    row[c] = v;
                    c += 1;
                }
            }
        }
        if ch.elevation {
            row[c] = if z_range > 0.0 { (pos[i][2] - lo[2]) / z_range } else { 0.0 };
            c += 1;
        }
        if let Some(colors) = colors {
            row[c..c + 3].copy_from_slice(&colors[i]);
            c += 3;
        }
        if let Some(v) = intensity {
            row[c] = v[i];
        }
    });
    if cfg.normalize {
        min_max_normalize(&mut values, m);
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    EmbeddingMatrix::new(values, n, m)
}

/// Rescales each column to `[0, 1]`. Constant columns are left untouched.
fn min_max_normalize(values: &mut [f64], m: usize) {
    for c in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in values.chunks_exact(m) {
            lo = lo.min(row[c]);
            hi = hi.max(row[c]);
        }
        let range = hi - lo;
        if range > 1e-12 {
            for row in values.chunks_exact_mut(m) {
                row[c] = (row[c] - lo) / range;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub steps: usize,
    pub lr: f64,
    /// Output embedding dimension; 0 keeps the input dimension.
    pub out_dim: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            steps: 200,
            lr: 0.05,
            out_dim: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    /// `in_dim x out_dim` weight matrix.
    pub weights: EmbeddingMatrix,
    pub embeddings: EmbeddingMatrix,
    /// Full-edge-set loss before fitting, then after every step.
    pub loss_history: Vec<f64>,
    /// Mean per-edge loss of the sampled edges each step was taken on.
    pub sampled_loss: Vec<f64>,
    /// Weights after the last step, whether or not they beat the initialization.
    /// With a small intra ratio the sampled objective favours separation,
    /// which can raise the intra-dominated full loss.
    pub last_weights: EmbeddingMatrix,
}

impl LinearFit {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    /// Full-edge loss of the returned weights.
    pub fn final_loss(&self) -> f64 {
        self.loss_history
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Initial weights: identity on the shared dimensions plus small seeded noise.
pub fn initial_weights(in_dim: usize, out_dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, "linear-embedding-init"));
    let values = (0..in_dim * out_dim)
        .map(|idx| {
            let (i, j) = (idx / out_dim, idx % out_dim);
            let base = if i == j { 1.0 } else { 0.0 };
            base + 0.01 * (rng.random::<f64>() * 2.0 - 1.0)
        })
        .collect();
    EmbeddingMatrix {
        values,
        rows: in_dim,
        cols: out_dim,
    }
}

/// `X^T G` accumulated over fixed row blocks, so the reduction order does not
/// depend on the thread count.
fn weight_gradient(x: &EmbeddingMatrix, grad: &[f64], out_dim: usize) -> Vec<f64> {
    const BLOCK: usize = 4096;
    let in_dim = x.cols();
    let partials: Vec<Vec<f64>> = (0..x.rows().div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; in_dim * out_dim];
            for p in b * BLOCK..((b + 1) * BLOCK).min(x.rows()) {
                let g = &grad[p * out_dim..(p + 1) * out_dim];
                for (i, &xv) in x.row(p).iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    for (a, &gv) in acc[i * out_dim..(i + 1) * out_dim].iter_mut().zip(g) {
                        *a += xv * gv;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; in_dim * out_dim];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Fits `f = features * W` by gradient descent on the transition loss.
///
/// Each step resamples the intra edges and follows the mean per-edge
/// gradient. The loss on the full edge set is tracked after every step and
/// the best weights seen (initialization included) are returned.
pub fn fit_linear_embedding(
    features: &EmbeddingMatrix,
    graph: &AdjacencyGraph,
    labels: &[u32],
    transition: &TransitionConfig,
    fit: &FitConfig,
) -> Result<LinearFit> {
    transition.validate()?;
    if graph.n_nodes != features.rows() {
        return Err(Error::invalid(format!(
            "graph has {} nodes but features have {} rows",
            graph.n_nodes,
            features.rows()
        )));
    }
    if !(fit.lr >= 0.0 && fit.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be non-negative, got {}", fit.lr)));
    }
    let (intra, inter) = split_edges_by_label(graph, labels)?;
    let full: Vec<TaggedEdge> = tag_all_edges(&intra, &inter);
    let in_dim = features.cols();
    let out_dim = if fit.out_dim == 0 { in_dim } else { fit.out_dim };

    let mut w = initial_weights(in_dim, out_dim, fit.seed);
    let full_loss = |w: &EmbeddingMatrix| -> Result<f64> {
        let f = features.matmul(w);
        Ok(transition_loss(&f, &full, transition)?.loss)
    };
    let mut best_loss = full_loss(&w)?;
    let mut best_w = w.clone();
    let mut history = vec![best_loss];
    let mut sampled_loss = Vec::with_capacity(fit.steps);

    for step in 0..fit.steps {
        let step_cfg = TransitionConfig {
            seed: split_seed(transition.seed, &format!("fit-step-{step}")),
            ..*transition
        };
        let sampled = sample_edges(&intra, &inter, &step_cfg);
        if sampled.is_empty() {
            break;
        }
        let f = features.matmul(&w);
        let out = transition_loss(&f, &sampled, &step_cfg)?;
        sampled_loss.push(out.loss / sampled.len() as f64);
        let gw = weight_gradient(features, &out.grad, out_dim);
        let scale = fit.lr / sampled.len() as f64;
        for (wv, g) in w.values.iter_mut().zip(&gw) {
            *wv -= scale * g;
        }
        let loss = full_loss(&w).map_err(|e| match e {
            Error::NonFinite(_) => non_finite(step, fit.lr),
            other => other,
        })?;
        if w.values.iter().any(|v| !v.is_finite()) || !loss.is_finite() {
            return Err(non_finite(step, fit.lr));
        }
        log::debug!("fit step {step}: loss {loss:.6}");
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_w = w.clone();
        }
    }
    let embeddings = features.matmul(&best_w);
    Ok(LinearFit {
        weights: best_w,
        embeddings,
        loss_history: history,
        sampled_loss,
        last_weights: w,
    })
}

fn non_finite(step: usize, lr: f64) -> Error {
    Error::NonFinite(format!(
        "loss diverged at step {step} with learning rate {lr}; try a smaller learning rate"
    ))
}
