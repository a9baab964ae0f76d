//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; [`run`] returns the process exit code.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, default_max_iter, solve_with_stats, DisplacementField, MaterialForceSpec};
use crate::inertia::{make_force_spec, AxisChoice};
use crate::losses::{FidelityMode, LossCounts};
use crate::nn::{LossWeights, TrainConfig};
use crate::pipeline::{self, DatasetConfig, FamilyChoice};
use crate::udf::QuerySet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "physpretrain", version, about = "Physics-driven point cloud pretraining toolkit")]
pub struct Cli {
    /// Base seed for every stochastic stage.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-shape work; training is always sequential.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// JSON file with optional "dataset" and "train" sections; explicit
    /// flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate surface-sampled sphere/box/cylinder clouds.
    GenShapes {
        #[arg(long, default_value = "mixed")]
        family: String,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 512)]
        n_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tetrahedralize a cloud and prune oversized cells.
    Mesh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = crate::delaunay::DEFAULT_PRUNE_FACTOR)]
        prune_factor: f64,
        /// Skip pruning and keep the full convex hull.
        #[arg(long)]
        keep_hull: bool,
        /// Drop cells below this quality after pruning.
        #[arg(long)]
        min_quality: Option<f64>,
        /// Center and scale the cloud into the unit sphere first.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Solve static linear elasticity under the inertia-derived load case.
    Solve(SolveArgs),
    /// Sample UDF query points around a cloud.
    SampleUdf {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = crate::udf::DEFAULT_QUERIES)]
        k: usize,
        #[arg(long, default_value_t = crate::udf::DEFAULT_NEAR_FRACTION)]
        near: f64,
        #[arg(long, default_value_t = crate::udf::DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mesh, solve and sample every cloud of a directory.
    BuildDataset {
        #[arg(long)]
        clouds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        prune_factor: Option<f64>,
        #[arg(long)]
        min_quality: Option<f64>,
        #[arg(long)]
        band: Option<f64>,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Evaluate the three losses on predictions stored on disk.
    Losses(LossArgs),
    /// Pretrain the dual-task network on a dataset.
    Pretrain(PretrainArgs),
    /// Linear-probe accuracy of a checkpoint's frozen encoder.
    Probe {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Physics-only vs implicit-only vs combined pretraining, probed.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project encoder latents to 2D with PCA and write `x,y,label` CSV.
    ExportEmbeddings {
        #[arg(long)]
        ckpt: PathBuf,
        /// Dataset directory or manifest.
        #[arg(long, conflicts_with = "clouds")]
        data: Option<PathBuf>,
        /// Directory of raw clouds, normalized before encoding.
        #[arg(long)]
        clouds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub tet: PathBuf,
    #[arg(long = "E", default_value_t = 1.0)]
    pub e: f64,
    #[arg(long, default_value_t = 0.3)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub force_mag: f64,
    #[arg(long, default_value = "auto")]
    pub force_axis: String,
    #[arg(long, default_value_t = crate::inertia::DEFAULT_BAND_FRACTION)]
    pub band: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the material and load case as JSON.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub tet: PathBuf,
    /// Material and load case JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub pred_disp: PathBuf,
    #[arg(long)]
    pub gt_disp: PathBuf,
    /// Text file, one predicted distance per line in query-set order.
    #[arg(long)]
    pub pred_udf: PathBuf,
    #[arg(long)]
    pub queryset: PathBuf,
    #[arg(long, default_value_t = crate::losses::DEFAULT_A)]
    pub a: f64,
    #[arg(long, default_value_t = crate::losses::DEFAULT_B)]
    pub b: f64,
    #[arg(long, default_value = "per-cell")]
    pub fidelity: String,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Writes the nodal residual of the predicted displacement.
    #[arg(long)]
    pub residual_dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    /// combined | implicit-only | physics-only
    #[arg(long, default_value = "combined")]
    pub mode: String,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines loss log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub queries_per_step: Option<usize>,
    #[arg(long)]
    pub fidelity: Option<String>,
    #[arg(long)]
    pub separate_encoders: bool,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.wd {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.a {
            cfg.weights.a = v;
        }
        if let Some(v) = self.b {
            cfg.weights.b = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if self.queries_per_step.is_some() {
            cfg.queries_per_step = self.queries_per_step;
        }
        if let Some(f) = &self.fidelity {
            cfg.fidelity = f.parse()?;
        }
        if self.separate_encoders {
            cfg.net.separate_encoders = true;
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Usage errors map to 1, everything else to 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join(pipeline::MANIFEST_FILE)
    } else {
        data.to_path_buf()
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn weights_for_mode(mode: &str, base: &LossWeights) -> Result<LossWeights> {
    pipeline::ablation_configs(base)
        .into_iter()
        .find(|(name, _)| *name == mode)
        .map(|(_, w)| w)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "mode must be combined|implicit-only|physics-only, got '{mode}'"
            ))
        })
}

/// Sets the displacement decoder width to the common cloud size.
fn fit_points(cfg: &mut TrainConfig, samples: &[crate::nn::TrainSample]) -> Result<()> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("dataset has no samples".into()))?
        .points
        .nrows();
    if samples.iter().any(|s| s.points.nrows() != first) {
        return Err(Error::InvalidArgument("all clouds of a dataset must have the same size".into()));
    }
    cfg.net.n_points = first;
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::GenShapes {
            family,
            count,
            n_points,
            out,
        } => {
            let fam: FamilyChoice = family.parse()?;
            let recs = pipeline::gen_shapes(fam, *count, *n_points, cli.seed, out)?;
            eprintln!("wrote {} clouds to {}", recs.len(), out.display());
            Ok(())
        }
        Command::Mesh {
            input,
            prune_factor,
            keep_hull,
            min_quality,
            normalize,
            output,
        } => {
            let mut pc = crate::io::load_point_cloud(input)?;
            if *normalize {
                pc = crate::geometry::normalize_unit_sphere(&pc)?.0;
            }
            let mut mesh = crate::delaunay::delaunay3d(&pc.points, cli.seed)?;
            if !keep_hull {
                mesh = crate::delaunay::prune_oversized(&mesh, *prune_factor)?;
            }
            if let Some(q) = min_quality {
                mesh = crate::delaunay::remove_slivers(&mesh, *q)?;
            }
            crate::io::save_tet(&mesh, output)?;
            eprintln!(
                "{} vertices, {} cells, volume {}",
                mesh.num_vertices(),
                mesh.num_cells(),
                mesh.total_volume()
            );
            Ok(())
        }
        Command::Solve(a) => solve(a),
        Command::SampleUdf {
            points,
            k,
            near,
            sigma,
            out,
        } => {
            let pc = crate::io::load_point_cloud(points)?;
            let qs = QuerySet::build(&pc, *k, *near, *sigma, cli.seed)?;
            qs.save(out)
        }
        Command::BuildDataset {
            clouds,
            out,
            prune_factor,
            min_quality,
            band,
            queries,
            tol,
        } => {
            let mut cfg = file.dataset.clone();
            cfg.seed = cli.seed;
            if prune_factor.is_some() {
                cfg.prune_factor = *prune_factor;
            }
            if min_quality.is_some() {
                cfg.min_quality = *min_quality;
            }
            if let Some(v) = band {
                cfg.band_fraction = *v;
            }
            if let Some(v) = queries {
                cfg.queries = *v;
            }
            if let Some(v) = tol {
                cfg.solver_tol = *v;
            }
            let m = pipeline::build_dataset(clouds, out, &cfg, cli.threads)?;
            eprintln!(
                "{} samples, {} quarantined; manifest {}",
                m.samples.len(),
                m.quarantined.len(),
                out.join(pipeline::MANIFEST_FILE).display()
            );
            Ok(())
        }
        Command::Losses(a) => losses(a),
        Command::Pretrain(a) => {
            let mut cfg = file.train.clone();
            cfg.seed = cli.seed;
            a.train.apply(&mut cfg)?;
            cfg.weights = weights_for_mode(&a.mode, &cfg.weights)?;
            let (_, samples) = pipeline::load_dataset(manifest_path(&a.data), cfg.fidelity)?;
            fit_points(&mut cfg, &samples)?;
            let out = crate::nn::pretrain(&samples, &cfg)?;
            crate::nn::save_checkpoint(&out.network, &a.out)?;
            let log_path = a.log.clone().unwrap_or_else(|| a.out.with_extension("log.jsonl"));
            let mut lines = String::new();
            for r in &out.log {
                lines.push_str(&serde_json::to_string(r)?);
                lines.push('\n');
            }
            std::fs::write(&log_path, lines).map_err(|e| Error::io(&log_path, e))?;
            if let (Some(first), Some(last)) = (out.log.first(), out.log.last()) {
                eprintln!("L_all {} -> {} over {} epochs", first.l_all, last.l_all, out.log.len());
            }
            Ok(())
        }
        Command::Probe { ckpt, data, json_out } => {
            let net = crate::nn::load_checkpoint(ckpt)?;
            let (_, samples) = pipeline::load_dataset(manifest_path(data), FidelityMode::PerCell)?;
            let clouds = pipeline::labelled_clouds(&samples)?;
            let r = crate::nn::probe_classify(&net, &clouds, cli.seed)?;
            write_json(&r, json_out.as_deref())
        }
        Command::Ablate {
            data,
            seeds,
            train,
            out,
        } => {
            let mut cfg = file.train.clone();
            train.apply(&mut cfg)?;
            let (_, samples) = pipeline::load_dataset(manifest_path(data), cfg.fidelity)?;
            fit_points(&mut cfg, &samples)?;
            let report = pipeline::ablation_suite(&samples, &cfg, seeds)?;
            write_json(&report, out.as_deref())?;
            let failed: Vec<_> = report.entries.iter().filter(|e| !e.failures.is_empty()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Pipeline(format!(
                    "partial report, failures in {}",
                    failed.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(", ")
                )))
            }
        }
        Command::ExportEmbeddings {
            ckpt,
            data,
            clouds,
            out,
        } => {
            let net = crate::nn::load_checkpoint(ckpt)?;
            let labelled = match (data, clouds) {
                (Some(d), _) => {
                    let (_, samples) = pipeline::load_dataset(manifest_path(d), FidelityMode::PerCell)?;
                    pipeline::labelled_clouds(&samples)?
                }
                (None, Some(dir)) => pipeline::list_clouds(dir)?
                    .iter()
                    .map(|p| {
                        let pc = crate::io::load_point_cloud(p)?;
                        let (n, _) = crate::geometry::normalize_unit_sphere(&pc)?;
                        Ok((n.points, pc.label.unwrap_or_else(|| "unlabeled".into())))
                    })
                    .collect::<Result<Vec<_>>>()?,
                (None, None) => return Err(Error::InvalidArgument("pass --data or --clouds".into())),
            };
            let pts = pipeline::export_embeddings(&net, &labelled)?;
            std::fs::write(out, pipeline::embeddings_csv(&pts)).map_err(|e| Error::io(out, e))
        }
    }
}

#[derive(Debug, Serialize)]
struct SolveReport {
    vertices: usize,
    cells: usize,
    fixed: usize,
    loaded: usize,
    iterations: usize,
    relative_residual: f64,
}

fn solve(a: &SolveArgs) -> Result<()> {
    let mesh = crate::io::load_tet(&a.tet)?;
    let axis: AxisChoice = a.force_axis.parse()?;
    let force = make_force_spec(&mesh, a.force_mag, a.band, axis)?;
    let spec = MaterialForceSpec::new(a.e, a.nu, force)?;
    let system = assemble(&mesh, &spec)?;
    let max_iter = a.max_iter.unwrap_or_else(|| default_max_iter(&system));
    let (u, stats) = solve_with_stats(&system, a.tol, max_iter)?;
    u.save(&a.out)?;
    if let Some(p) = &a.spec_out {
        spec.save_json(p)?;
    }
    write_json(
        &SolveReport {
            vertices: mesh.num_vertices(),
            cells: mesh.num_cells(),
            fixed: spec.force.fixed_vertices.len(),
            loaded: spec.force.loaded_vertices.len(),
            iterations: stats.iterations,
            relative_residual: stats.relative_residual,
        },
        None,
    )
}

/// Reads a whitespace-separated list of finite floats.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, format!("value {} is not a finite number: '{tok}'", i + 1)))
        })
        .collect()
}

fn losses(a: &LossArgs) -> Result<()> {
    let mesh = crate::io::load_tet(&a.tet)?;
    let spec = MaterialForceSpec::load_json(&a.spec)?;
    let pred = DisplacementField::load(&a.pred_disp)?;
    let gt = DisplacementField::load(&a.gt_disp)?;
    let qs = QuerySet::load(&a.queryset)?;
    let pred_udf = read_values(&a.pred_udf)?;
    let mode: FidelityMode = a.fidelity.parse()?;

    let l_imp = crate::losses::implicit_loss(&pred_udf, &qs.distances)?;
    let l_df = crate::losses::data_fidelity_loss_with(&pred, &gt, &mesh, mode)?;
    let residual = crate::continuum::nodal_equilibrium_residual(&mesh, &pred, &spec)?;
    let l_pi = crate::losses::physics_informed_loss(&residual)?;
    if let Some(p) = &a.residual_dump {
        residual.save(p)?;
    }
    let report = crate::losses::total_loss(l_imp, l_df, l_pi, a.a, a.b)?
        .with_counts(LossCounts {
            samples: 1,
            queries: qs.len(),
            cells: mesh.num_cells(),
            free_vertices: residual.len(),
        })
        .with_hash(crate::losses::config_hash(&(a.a, a.b, mode)));
    write_json(&report, a.json_out.as_deref())
}
