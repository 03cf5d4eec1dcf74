//! Command-line front end: `partition`, `eval`, `fit`, `bench`, `synth`.
//!
//! Flags override values from `--config`; the effective config is written
//! next to every output as `<output>.config`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{fit_linear_embedding, geometric_features, FeatureChannels};
use crate::graph::build_knn_graph;
use crate::io::{self, PartitionFormat, PlyFormat};
use crate::metrics::{throughput_report, OracleReport};
use crate::pipeline::{bench, run_pipeline};
use crate::synth::{bench_cloud, synth_scene, SceneSpec};
use crate::voxel::voxel_subsample;

#[derive(Debug, Parser)]
#[command(name = "superpoint", version, about = "Superpoint partitioning of 3D point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a PLY cloud into a superpoint hierarchy.
    Partition(RunArgs),
    /// Oracle mIoU of every level of a partition file.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Partition file written by `partition`.
        #[arg(long)]
        partition: PathBuf,
    },
    /// Fit a linear embedding of handcrafted features on a labeled cloud.
    Fit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Output dimension, 0 keeps the feature dimension.
        #[arg(long)]
        out_dim: Option<usize>,
    },
    /// Time the full pipeline on a supplied or generated cloud.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Size of the generated cloud when no --input is given.
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write a labeled PLY generated from a scene file.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Multiplier on every density in the scene.
        #[arg(long)]
        density_scale: Option<f64>,
        #[arg(long)]
        ascii: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Bin,
}

/// Flags shared by the pipeline commands. Each one overrides `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Embedding matrix file (read by partition, written by fit).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Neighbors in the adjacency graph.
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimum superpoint size per level, e.g. 5,30,90.
    #[arg(long, value_delimiter = ',')]
    pub min_sizes: Option<Vec<usize>>,
    /// Feature channels, e.g. linearity,planarity,elevation,color.
    #[arg(long)]
    pub features: Option<String>,
    /// Neighbors used for the local shape features.
    #[arg(long)]
    pub feature_k: Option<usize>,
    #[arg(long)]
    pub rho_intra: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    #[arg(long)]
    pub knn_reconnect: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl RunArgs {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(threads => threads);
        set!(lambda => lambda);
        set!(k => graph.k);
        set!(min_sizes => min_sizes);
        set!(feature_k => features.neighborhood_k);
        set!(rho_intra => rho_intra);
        set!(tau => tau);
        set!(knn_reconnect => knn_reconnect);
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        if self.embeddings.is_some() {
            c.embeddings = self.embeddings.clone();
        }
        if self.voxel_size.is_some() {
            c.voxel_size = self.voxel_size;
        }
        if let Some(list) = &self.features {
            c.features.channels = FeatureChannels::parse(list)?;
        }
        if let Some(f) = self.format {
            c.format = match f {
                FormatArg::Csv => PartitionFormat::Csv,
                FormatArg::Bin => PartitionFormat::Binary,
            };
        }
        Ok(c)
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required (flag or config file)")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(f)
}

fn cmd_partition(args: &RunArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    let input = require(&cfg.input, "input")?;
    let output = require(&cfg.output, "output")?.to_path_buf();
    in_pool(cfg.threads, || {
        let cloud = io::read_ply(input)?;
        let embeddings = cfg.embeddings.as_ref().map(io::read_embeddings).transpose()?;
        let result = run_pipeline(&cloud, &cfg, embeddings.as_ref())?;
        io::write_assignments(&output, &result.input_assignments(), cfg.format)?;
        cfg.write_sidecar(&output)?;
        let counts: Vec<usize> = result.hierarchy.levels.iter().map(|l| l.n_components()).collect();
        let report = throughput_report(cloud.len(), &result.timings, result.end_to_end);
        let _ = writeln!(out, "superpoints per level: {counts:?}");
        let _ = write!(out, "{}", report.to_table());
        if report.inconsistent {
            log::warn!("stage timings do not add up to the end-to-end time");
        }
        Ok(())
    })
}

fn cmd_eval(args: &RunArgs, partition: &Path, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    let input = require(&cfg.input, "input")?;
    in_pool(cfg.threads, || {
        let cloud = io::read_ply(input)?;
        let labels = cloud
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("evaluation needs a labeled cloud"))?;
        let levels = io::read_partition(partition)?;
        let c = cloud.num_classes as usize;
        let mut csv = format!("level,{}\n", OracleReport::csv_header(c));
        for (l, assignment) in levels.iter().enumerate() {
            if assignment.len() != cloud.len() {
                return Err(Error::invalid(format!(
                    "partition has {} points but the cloud has {}",
                    assignment.len(),
                    cloud.len()
                )));
            }
            let report = crate::metrics::oracle_miou(assignment, labels, c)?;
            csv.push_str(&format!("{},{}\n", l + 1, report.csv_row()));
        }
        match &cfg.output {
            Some(path) => {
                write_text(path, &csv)?;
                cfg.write_sidecar(path)?;
            }
            None => {
                let _ = write!(out, "{csv}");
            }
        }
        Ok(())
    })
}

fn cmd_fit(
    args: &RunArgs,
    steps: Option<usize>,
    lr: Option<f64>,
    out_dim: Option<usize>,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let mut cfg = args.resolve()?;
    // The embeddings path is an output here, so it need not exist yet.
    let embeddings_out = cfg.embeddings.take();
    cfg.fit_steps = steps.unwrap_or(cfg.fit_steps);
    cfg.fit_lr = lr.unwrap_or(cfg.fit_lr);
    cfg.fit_out_dim = out_dim.unwrap_or(cfg.fit_out_dim);
    cfg.validate()?;
    let input = require(&cfg.input, "input")?;
    let output = require(&cfg.output, "output")?.to_path_buf();
    in_pool(cfg.threads, || {
        let mut cloud = io::read_ply(input)?;
        if let Some(spec) = cfg.voxel_spec()? {
            cloud = voxel_subsample(&cloud, &spec)?.0;
        }
        let labels = cloud
            .labels
            .clone()
            .ok_or_else(|| Error::invalid("fitting needs a labeled cloud"))?;
        let graph = build_knn_graph(&cloud, &cfg.graph)?;
        let features = geometric_features(&cloud, &cfg.features)?;
        let fit = fit_linear_embedding(&features, &graph, &labels, &cfg.transition(), &cfg.fit())?;
        io::write_embeddings(&output, &fit.weights)?;
        if let Some(path) = &embeddings_out {
            io::write_embeddings(path, &fit.embeddings)?;
        }
        let mut sidecar = cfg.clone();
        sidecar.embeddings = embeddings_out.clone();
        sidecar.write_sidecar(&output)?;
        // loss is on the full edge set; sampled is the objective of the step
        // that produced the row, empty for the initialization.
        let _ = writeln!(out, "step,loss,sampled");
        for (i, loss) in fit.loss_history.iter().enumerate() {
            let sampled = i.checked_sub(1).map(|j| fit.sampled_loss[j].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{i},{loss},{sampled}");
        }
        log::info!("loss {} -> {}", fit.initial_loss(), fit.final_loss());
        Ok(())
    })
}

fn cmd_bench(args: &RunArgs, points: usize, repeats: usize, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    in_pool(cfg.threads, || {
        let cloud = match &cfg.input {
            Some(p) => io::read_ply(p)?,
            None => bench_cloud(points, cfg.seed)?,
        };
        let result = bench(&cloud, &cfg, repeats)?;
        let _ = write!(out, "{}", result.to_table());
        if let Some(path) = &cfg.output {
            write_text(path, &result.to_csv())?;
            cfg.write_sidecar(path)?;
        }
        Ok(())
    })
}

fn cmd_synth(
    scene: &Path,
    seed: u64,
    output: &Path,
    density_scale: Option<f64>,
    ascii: bool,
    threads: usize,
    out: &mut (dyn Write + Send),
) -> Result<()> {
    let mut spec = SceneSpec::load(scene)?;
    if let Some(s) = density_scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("density scale must be positive, got {s}")));
        }
        spec.density_scale *= s;
    }
    let cloud = in_pool(threads, || synth_scene(seed, &spec))?;
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    io::write_ply(output, &cloud, format)?;
    let _ = writeln!(out, "{} points, {} classes -> {}", cloud.len(), cloud.num_classes, output.display());
    Ok(())
}

/// Runs a parsed command, writing reports to `out`.
pub fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::Partition(args) => cmd_partition(args, out),
        Command::Eval { run, partition } => cmd_eval(run, partition, out),
        Command::Fit { run, steps, lr, out_dim } => cmd_fit(run, *steps, *lr, *out_dim, out),
        Command::Bench { run, points, repeats } => cmd_bench(run, *points, *repeats, out),
        Command::Synth {
            scene,
            seed,
            output,
            density_scale,
            ascii,
            threads,
        } => cmd_synth(scene, *seed, output, *density_scale, *ascii, threads.unwrap_or(0), out),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 for I/O or format errors, 3 for
/// invalid configuration or input, 4 for internal limits.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
