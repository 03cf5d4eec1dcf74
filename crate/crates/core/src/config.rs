//! Run configuration: every module config plus paths, seed and threads.
//!
//! The text form uses one section per module:
//!
//! ```text
//! [run]
//! input = scene.ply
//! output = scene.part
//! seed = 1
//! threads = 0            # 0 uses every core
//! voxel_size = 0.02      # omit to skip voxelization
//! format = csv           # csv or bin
//!
//! [graph]
//! k = 8
//!
//! [features]
//! k = 16
//! channels = linearity,planarity,scattering,verticality,elevation,color,intensity
//! normalize = true
//!
//! [transition]
//! tau = 1
//! rho_intra = 0.1
//!
//! [fit]
//! steps = 200
//! lr = 0.05
//! out_dim = 0
//!
//! [partition]
//! lambda = 0.02
//! min_sizes = 5,30,90
//! knn_reconnect = 8
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{FeatureChannels, FeatureConfig, FitConfig};
use crate::graph::GraphConfig;
use crate::io::PartitionFormat;
use crate::kv::{self, Entry};
use crate::numeric::split_seed;
use crate::partition::PartitionConfig;
use crate::transition::TransitionConfig;
use crate::voxel::VoxelGridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub voxel_size: Option<f64>,
    pub format: PartitionFormat,
    pub graph: GraphConfig,
    pub features: FeatureConfig,
    pub tau: f64,
    pub rho_intra: f64,
    pub fit_steps: usize,
    pub fit_lr: f64,
    pub fit_out_dim: usize,
    pub lambda: f64,
    pub min_sizes: Vec<usize>,
    pub knn_reconnect: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TransitionConfig::default();
        let f = FitConfig::default();
        let p = PartitionConfig::default();
        RunConfig {
            input: None,
            output: None,
            embeddings: None,
            seed: 0,
            threads: 0,
            voxel_size: None,
            format: PartitionFormat::Csv,
            graph: GraphConfig::default(),
            features: FeatureConfig::default(),
            tau: t.tau,
            rho_intra: t.rho_intra,
            fit_steps: f.steps,
            fit_lr: f.lr,
            fit_out_dim: f.out_dim,
            lambda: p.lambda,
            min_sizes: vec![5, 30, 90],
            knn_reconnect: p.knn_reconnect,
        }
    }
}

pub fn parse_format(s: &str) -> Result<PartitionFormat> {
    match s {
        "csv" => Ok(PartitionFormat::Csv),
        "bin" | "binary" => Ok(PartitionFormat::Binary),
        _ => Err(Error::Config(format!("unknown partition format '{s}', expected csv or bin"))),
    }
}

fn format_name(f: PartitionFormat) -> &'static str {
    match f {
        PartitionFormat::Csv => "csv",
        PartitionFormat::Binary => "bin",
    }
}

fn unknown(section: &str, e: &Entry) -> Error {
    Error::Parse {
        line: e.line,
        message: format!("unknown key '{}' in [{section}]", e.key),
    }
}

impl RunConfig {
    /// Parses a config file over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for section in kv::parse(text)? {
            let name = section.name.as_str();
            for e in &section.entries {
                match (name, e.key.as_str()) {
                    ("run", "input") => c.input = Some(PathBuf::from(&e.value)),
                    ("run", "output") => c.output = Some(PathBuf::from(&e.value)),
                    ("run", "embeddings") => c.embeddings = Some(PathBuf::from(&e.value)),
                    ("run", "seed") => c.seed = e.u64()?,
                    ("run", "threads") => c.threads = e.usize()?,
                    ("run", "voxel_size") => c.voxel_size = Some(e.f64()?),
                    ("run", "format") => c.format = parse_format(&e.value)?,
                    ("graph", "k") => c.graph.k = e.usize()?,
                    ("features", "k") => c.features.neighborhood_k = e.usize()?,
                    ("features", "channels") => c.features.channels = FeatureChannels::parse(&e.value)?,
                    ("features", "normalize") => c.features.normalize = e.bool()?,
                    ("transition", "tau") => c.tau = e.f64()?,
                    ("transition", "rho_intra") => c.rho_intra = e.f64()?,
                    ("fit", "steps") => c.fit_steps = e.usize()?,
                    ("fit", "lr") => c.fit_lr = e.f64()?,
                    ("fit", "out_dim") => c.fit_out_dim = e.usize()?,
                    ("partition", "lambda") => c.lambda = e.f64()?,
                    ("partition", "min_sizes") => c.min_sizes = e.usize_list()?,
                    ("partition", "knn_reconnect") => c.knn_reconnect = e.usize()?,
                    _ => return Err(unknown(name, e)),
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Text form accepted by [`RunConfig::parse`]. Parsing it back gives an
    /// equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[run]\n");
        for (key, path) in [("input", &self.input), ("output", &self.output), ("embeddings", &self.embeddings)] {
            if let Some(p) = path {
                let _ = writeln!(s, "{key} = {}", p.display());
            }
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        if let Some(v) = self.voxel_size {
            let _ = writeln!(s, "voxel_size = {v:?}");
        }
        let _ = writeln!(s, "format = {}", format_name(self.format));
        let _ = writeln!(s, "\n[graph]\nk = {}", self.graph.k);
        let _ = writeln!(
            s,
            "\n[features]\nk = {}\nchannels = {}\nnormalize = {}",
            self.features.neighborhood_k,
            self.features.channels.to_list(),
            self.features.normalize
        );
        let _ = writeln!(s, "\n[transition]\ntau = {:?}\nrho_intra = {:?}", self.tau, self.rho_intra);
        let _ = writeln!(
            s,
            "\n[fit]\nsteps = {}\nlr = {:?}\nout_dim = {}",
            self.fit_steps, self.fit_lr, self.fit_out_dim
        );
        let sizes: Vec<String> = self.min_sizes.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            s,
            "\n[partition]\nlambda = {:?}\nmin_sizes = {}\nknn_reconnect = {}",
            self.lambda,
            sizes.join(","),
            self.knn_reconnect
        );
        s
    }

    /// Writes the effective config next to `output` as `<output>.config`.
    pub fn write_sidecar(&self, output: &Path) -> Result<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".config");
        let path = PathBuf::from(name);
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn transition(&self) -> TransitionConfig {
        TransitionConfig {
            tau: self.tau,
            rho_intra: self.rho_intra,
            seed: split_seed(self.seed, "transition"),
        }
    }

    pub fn fit(&self) -> FitConfig {
        FitConfig {
            steps: self.fit_steps,
            lr: self.fit_lr,
            out_dim: self.fit_out_dim,
            seed: split_seed(self.seed, "fit"),
        }
    }

    pub fn partition_levels(&self) -> Vec<PartitionConfig> {
        PartitionConfig::levels(
            self.lambda,
            &self.min_sizes,
            self.knn_reconnect,
            split_seed(self.seed, "partition"),
        )
    }

    pub fn voxel_spec(&self) -> Result<Option<VoxelGridSpec>> {
        self.voxel_size.map(VoxelGridSpec::new).transpose()
    }

    /// Checks values and that referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        if self.graph.k == 0 {
            return Err(Error::Config("graph k must be at least 1".into()));
        }
        self.features.validate()?;
        self.transition().validate()?;
        if self.min_sizes.is_empty() {
            return Err(Error::Config("at least one partition level is required".into()));
        }
        if self.min_sizes.contains(&0) {
            return Err(Error::Config("minimum superpoint sizes must be >= 1 (sigma_min >= 1)".into()));
        }
        for level in self.partition_levels() {
            level.validate()?;
        }
        if !(self.fit_lr >= 0.0 && self.fit_lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {}", self.fit_lr)));
        }
        self.voxel_spec()?;
        for path in [&self.input, &self.embeddings].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        Ok(())
    }
}
