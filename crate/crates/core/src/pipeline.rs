//! Synthetic shapes, dataset building, pretraining ablations and embedding
//! export.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::io::{label_path, save_xyz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Sphere,
    Box,
    Cylinder,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 3] = [ShapeFamily::Sphere, ShapeFamily::Box, ShapeFamily::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Sphere => "sphere",
            ShapeFamily::Box => "box",
            ShapeFamily::Cylinder => "cylinder",
        }
    }
}

/// Family selection for shape generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    One(ShapeFamily),
    /// Round-robin over all families.
    Mixed,
}

impl std::str::FromStr for FamilyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::One(ShapeFamily::Sphere)),
            "box" => Ok(Self::One(ShapeFamily::Box)),
            "cylinder" => Ok(Self::One(ShapeFamily::Cylinder)),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::InvalidArgument(format!(
                "unknown shape family '{s}', expected sphere|box|cylinder|mixed"
            ))),
        }
    }
}

/// Range of the random per-axis stretch applied to every shape.
pub const ASPECT_RANGE: (f64, f64) = (0.6, 1.4);

fn unit_sphere_point(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Points uniformly distributed on the unit sphere.
pub fn sample_unit_sphere(n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n).map(|_| unit_sphere_point(rng)).collect()
}

/// Points uniformly distributed on the surface of a box with the given
/// half-extents, centred at the origin.
pub fn sample_box_surface(n: usize, half: Vec3, rng: &mut impl Rng) -> Vec<Vec3> {
    let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
    let total: f64 = areas.iter().sum();
    (0..n)
        .map(|_| {
            let mut t = rng.gen_range(0.0..total);
            let mut axis = 2;
            for (k, a) in areas.iter().enumerate() {
                if t < *a {
                    axis = k;
                    break;
                }
                t -= a;
            }
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut p = Vec3::new(
                rng.gen_range(-half.x..=half.x),
                rng.gen_range(-half.y..=half.y),
                rng.gen_range(-half.z..=half.z),
            );
            p[axis] = side * half[axis];
            p
        })
        .collect()
}

/// Points uniformly distributed on a closed cylinder along z.
pub fn sample_cylinder_surface(n: usize, radius: f64, half_height: f64, rng: &mut impl Rng) -> Vec<Vec3> {
    let side = 2.0 * PI * radius * 2.0 * half_height;
    let caps = 2.0 * PI * radius * radius;
    (0..n)
        .map(|_| {
            let theta = rng.gen_range(0.0..2.0 * PI);
            if rng.gen_range(0.0..side + caps) < side {
                Vec3::new(radius * theta.cos(), radius * theta.sin(), rng.gen_range(-half_height..=half_height))
            } else {
                let r = radius * rng.gen_range(0.0f64..1.0).sqrt();
                let z = if rng.gen_bool(0.5) { half_height } else { -half_height };
                Vec3::new(r * theta.cos(), r * theta.sin(), z)
            }
        })
        .collect()
}

/// One surface-sampled shape of the family with a random stretch per axis.
pub fn generate_shape(family: ShapeFamily, n_points: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    let (lo, hi) = ASPECT_RANGE;
    let stretch = Vec3::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    let base = match family {
        ShapeFamily::Sphere => sample_unit_sphere(n_points, rng),
        ShapeFamily::Box => sample_box_surface(n_points, Vec3::new(1.0, 1.0, 1.0), rng),
        ShapeFamily::Cylinder => sample_cylinder_surface(n_points, 1.0, 1.0, rng),
    };
    base.into_iter().map(|p| p.component_mul(&stretch)).collect()
}

/// Generated cloud on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub path: PathBuf,
    pub label: String,
    pub seed: u64,
}

/// In-memory shape generation: `count` labelled clouds.
pub fn generate_shapes(family: FamilyChoice, count: usize, n_points: usize, seed: u64) -> Result<Vec<PointCloud>> {
    if count == 0 {
        return Err(Error::InvalidArgument("shape count must be >= 1".into()));
    }
    if n_points < 4 {
        return Err(Error::InvalidArgument("shapes need at least 4 points".into()));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let fam = match family {
            FamilyChoice::One(f) => f,
            FamilyChoice::Mixed => ShapeFamily::ALL[i % 3],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(shape_seed(seed, i));
        let pts = generate_shape(fam, n_points, &mut rng);
        out.push(
            PointCloud::new(pts)
                .with_label(fam.name())
                .with_source_id(format!("{}_{i:04}", fam.name())),
        );
    }
    Ok(out)
}

fn shape_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
}

/// Writes generated clouds as `<family>_<index>.xyz` with label sidecars.
pub fn gen_shapes(
    family: FamilyChoice,
    count: usize,
    n_points: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<ShapeRecord>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let clouds = generate_shapes(family, count, n_points, seed)?;
    let mut records = Vec::with_capacity(count);
    for (i, pc) in clouds.iter().enumerate() {
        let path = dir.join(format!("{}.xyz", pc.source_id));
        save_xyz(pc, &path)?;
        let label = pc.label.clone().expect("generated clouds are labelled");
        let lp = label_path(&path);
        std::fs::write(&lp, format!("{label}\n")).map_err(|e| Error::io(&lp, e))?;
        records.push(ShapeRecord {
            path,
            label,
            seed: shape_seed(seed, i),
        });
    }
    Ok(records)
}

/// Default sliver threshold of the dataset builder.
pub const DEFAULT_MIN_QUALITY: f64 = 1e-3;

/// Settings of [`build_dataset`]. Every field enters the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Longest-edge pruning factor; `None` keeps the whole hull, which is
    /// the shape itself for the convex synthetic families.
    pub prune_factor: Option<f64>,
    /// Sliver filter applied after pruning. Flat cells from coplanar
    /// surface patches otherwise stall the solver.
    pub min_quality: Option<f64>,
    pub band_fraction: f64,
    /// Principal axis index for the load; `None` picks the longest extent.
    pub force_axis: Option<usize>,
    pub e_range: [f64; 2],
    pub nu_range: [f64; 2],
    pub magnitude_range: [f64; 2],
    pub solver_tol: f64,
    pub max_iter: Option<usize>,
    pub queries: usize,
    pub near_fraction: f64,
    pub sigma: f64,
    /// Largest tolerated fraction of quarantined clouds.
    pub max_failure_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            prune_factor: None,
            min_quality: Some(DEFAULT_MIN_QUALITY),
            band_fraction: crate::inertia::DEFAULT_BAND_FRACTION,
            force_axis: None,
            e_range: [0.5, 5.0],
            nu_range: [0.2, 0.45],
            magnitude_range: [0.1, 1.0],
            solver_tol: 1e-9,
            max_iter: None,
            queries: crate::udf::DEFAULT_QUERIES,
            near_fraction: crate::udf::DEFAULT_NEAR_FRACTION,
            sigma: crate::udf::DEFAULT_SIGMA,
            max_failure_fraction: 0.2,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !range_ok(self.e_range) || !(self.e_range[0] > 0.0) {
            return Err(Error::InvalidArgument(format!("bad E range {:?}", self.e_range)));
        }
        if !range_ok(self.nu_range) || !(self.nu_range[0] > -1.0 && self.nu_range[1] < 0.5) {
            return Err(Error::InvalidArgument(format!("bad nu range {:?}", self.nu_range)));
        }
        if !range_ok(self.magnitude_range) || !(self.magnitude_range[0] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad force magnitude range {:?}",
                self.magnitude_range
            )));
        }
        if let Some(f) = self.prune_factor {
            if !(f > 0.0) {
                return Err(Error::InvalidArgument(format!("prune factor must be > 0, got {f}")));
            }
        }
        if !(self.solver_tol > 0.0) || self.queries == 0 {
            return Err(Error::InvalidArgument("solver_tol must be > 0 and queries >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::InvalidArgument("max_failure_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Seeds of the stochastic stages of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSeeds {
    pub delaunay: u64,
    pub material: u64,
    pub queries: u64,
}

/// One complete sample; paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub label: Option<String>,
    pub source: PathBuf,
    pub cloud: PathBuf,
    pub mesh: PathBuf,
    pub spec: PathBuf,
    pub displacement: PathBuf,
    pub queries: PathBuf,
    /// Normalization `p -> (p + translation) * scale` of the source cloud.
    pub translation: [f64; 3],
    pub scale: f64,
    pub seeds: SampleSeeds,
    pub num_vertices: usize,
    pub num_cells: usize,
    pub solver_iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub source: PathBuf,
    pub reason: String,
}

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const QUARANTINE_FILE: &str = "quarantine.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub config: DatasetConfig,
    pub samples: Vec<SampleRecord>,
    pub quarantined: Vec<QuarantineEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::format(
                path,
                format!("manifest version {} unsupported", m.format_version),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Paths referenced by the manifest that do not exist under `root`.
    pub fn missing_files(&self, root: &Path) -> Vec<PathBuf> {
        self.samples
            .iter()
            .flat_map(|s| [&s.cloud, &s.mesh, &s.spec, &s.displacement, &s.queries])
            .map(|p| root.join(p))
            .filter(|p| !p.exists())
            .collect()
    }
}

/// Point cloud files (`.xyz`, `.ply`) of a directory in name order.
pub fn list_clouds(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && matches!(ext, "xyz" | "ply") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stage_seed(seed: u64, index: usize, stage: u64) -> u64 {
    let mut h = seed ^ 0x6a09_e667_f3bc_c908;
    for x in [index as u64, stage] {
        h = (h ^ x).wrapping_mul(0x1000_0000_01b3).rotate_left(29);
    }
    h
}

/// Fully processed sample before it is written.
pub struct BuiltSample {
    pub cloud: PointCloud,
    pub transform: crate::geometry::Transform,
    pub mesh: crate::geometry::TetMesh,
    pub spec: crate::fem::MaterialForceSpec,
    pub displacement: crate::fem::DisplacementField,
    pub queries: crate::udf::QuerySet,
    pub seeds: SampleSeeds,
    pub stats: crate::fem::SolveStats,
}

/// Runs the per-cloud chain: normalize, mesh, prune, load case, material,
/// solve, query sampling.
pub fn build_sample(pc: &PointCloud, config: &DatasetConfig, index: usize) -> Result<BuiltSample> {
    use crate::delaunay::{delaunay3d, prune_oversized, remove_slivers};
    use crate::fem::{assemble, default_max_iter, solve_with_stats, MaterialForceSpec};
    use crate::inertia::{make_force_spec, AxisChoice};

    let seeds = SampleSeeds {
        delaunay: stage_seed(config.seed, index, 1),
        material: stage_seed(config.seed, index, 2),
        queries: stage_seed(config.seed, index, 3),
    };
    let (cloud, transform) = crate::geometry::normalize_unit_sphere(pc)?;
    let mut mesh = delaunay3d(&cloud.points, seeds.delaunay)?;
    if let Some(f) = config.prune_factor {
        mesh = prune_oversized(&mesh, f)?;
    }
    if let Some(q) = config.min_quality {
        mesh = remove_slivers(&mesh, q)?;
    }
    if config.prune_factor.is_some() || config.min_quality.is_some() {
        mesh = mesh.largest_face_component();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.material);
    let mut draw = |r: [f64; 2]| if r[0] < r[1] { rng.gen_range(r[0]..r[1]) } else { r[0] };
    let e = draw(config.e_range);
    let nu = draw(config.nu_range);
    let magnitude = draw(config.magnitude_range);
    let axis = config.force_axis.map_or(AxisChoice::Auto, AxisChoice::Index);
    let force = make_force_spec(&mesh, magnitude, config.band_fraction, axis)?;
    let spec = MaterialForceSpec::new(e, nu, force)?;
    let system = assemble(&mesh, &spec)?;
    let max_iter = config.max_iter.unwrap_or_else(|| default_max_iter(&system));
    let (displacement, stats) = solve_with_stats(&system, config.solver_tol, max_iter)?;
    let queries = crate::udf::QuerySet::build(&cloud, config.queries, config.near_fraction, config.sigma, seeds.queries)?;
    Ok(BuiltSample {
        cloud,
        transform,
        mesh,
        spec,
        displacement,
        queries,
        seeds,
        stats,
    })
}

fn write_sample(root: &Path, source: &Path, id: &str, label: Option<String>, b: &BuiltSample) -> Result<SampleRecord> {
    let rel = PathBuf::from("samples").join(id);
    let dir = root.join(&rel);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let names = ["cloud.xyz", "mesh.tet", "spec.json", "u.bin", "queries.bin"];
    let [cloud, mesh, spec, u, q] = names.map(|n| rel.join(n));
    save_xyz(&b.cloud, root.join(&cloud))?;
    crate::io::save_tet(&b.mesh, root.join(&mesh))?;
    b.spec.save_json(root.join(&spec))?;
    b.displacement.save(root.join(&u))?;
    b.queries.save(root.join(&q))?;
    Ok(SampleRecord {
        id: id.to_string(),
        label,
        source: source.to_path_buf(),
        cloud,
        mesh,
        spec,
        displacement: u,
        queries: q,
        translation: b.transform.translation.into(),
        scale: b.transform.scale,
        seeds: b.seeds,
        num_vertices: b.mesh.num_vertices(),
        num_cells: b.mesh.num_cells(),
        solver_iterations: b.stats.iterations,
        relative_residual: b.stats.relative_residual,
    })
}

/// Runs `f(i)` for `i in 0..n` on up to `threads` workers; results keep
/// index order so output does not depend on scheduling.
pub fn parallel_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<T>>> = (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().expect("worker panicked") = Some(v);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("worker panicked").expect("slot filled"))
        .collect()
}

/// Builds a dataset under `out_dir` from the clouds of `clouds_dir`.
///
/// Clouds failing any stage are quarantined with the error text. When more
/// than `max_failure_fraction` of them fail, the quarantine log is still
/// written and a pipeline error summarises the failures.
pub fn build_dataset(
    clouds_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    config: &DatasetConfig,
    threads: usize,
) -> Result<DatasetManifest> {
    config.validate()?;
    let sources = list_clouds(clouds_dir.as_ref())?;
    if sources.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .xyz or .ply clouds in {}",
            clouds_dir.as_ref().display()
        )));
    }
    let root = out_dir.as_ref();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let results = parallel_map(sources.len(), threads, |i| -> Result<SampleRecord> {
        let src = &sources[i];
        let pc = crate::io::load_point_cloud(src)?;
        let built = build_sample(&pc, config, i)?;
        let id = format!("{i:05}_{}", pc.source_id);
        write_sample(root, src, &id, pc.label.clone(), &built)
    });

    let mut samples = Vec::new();
    let mut quarantined = Vec::new();
    for (src, r) in sources.iter().zip(results) {
        match r {
            Ok(rec) => samples.push(rec),
            Err(e) => quarantined.push(QuarantineEntry {
                source: src.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let qpath = root.join(QUARANTINE_FILE);
    std::fs::write(&qpath, serde_json::to_string_pretty(&quarantined)? + "\n").map_err(|e| Error::io(&qpath, e))?;

    let failed = quarantined.len() as f64 / sources.len() as f64;
    if failed > config.max_failure_fraction {
        let mut reasons: std::collections::BTreeMap<&str, usize> = Default::default();
        for q in &quarantined {
            let kind = q.reason.split(':').next().unwrap_or("");
            *reasons.entry(kind).or_default() += 1;
        }
        return Err(Error::Pipeline(format!(
            "{} of {} clouds failed ({:.0}% > {:.0}%): {reasons:?}",
            quarantined.len(),
            sources.len(),
            100.0 * failed,
            100.0 * config.max_failure_fraction
        )));
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        config_hash: crate::losses::config_hash(config),
        config: config.clone(),
        samples,
        quarantined,
    };
    manifest.save(root.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Reads the artifacts of one record back from disk.
pub fn load_record(root: &Path, rec: &SampleRecord) -> Result<BuiltSample> {
    let cloud = crate::io::load_point_cloud(root.join(&rec.cloud))?;
    Ok(BuiltSample {
        cloud,
        transform: crate::geometry::Transform {
            translation: Vec3::from(rec.translation),
            scale: rec.scale,
        },
        mesh: crate::io::load_tet(root.join(&rec.mesh))?,
        spec: crate::fem::MaterialForceSpec::load_json(root.join(&rec.spec))?,
        displacement: crate::fem::DisplacementField::load(root.join(&rec.displacement))?,
        queries: crate::udf::QuerySet::load(root.join(&rec.queries))?,
        seeds: rec.seeds,
        stats: crate::fem::SolveStats {
            iterations: rec.solver_iterations,
            relative_residual: rec.relative_residual,
        },
    })
}

/// Loads a manifest and turns every record into a training sample.
pub fn load_dataset(
    manifest_path: impl AsRef<Path>,
    fidelity: crate::losses::FidelityMode,
) -> Result<(DatasetManifest, Vec<crate::nn::TrainSample>)> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let missing = manifest.missing_files(root);
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let samples = manifest
        .samples
        .iter()
        .map(|rec| {
            let b = load_record(root, rec)?;
            crate::nn::TrainSample::new(
                rec.id.clone(),
                rec.label.clone(),
                &b.cloud.points,
                b.mesh,
                b.spec,
                b.displacement,
                &b.queries,
                fidelity,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}

/// Probe accuracies of one loss configuration over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub name: String,
    pub weights: crate::nn::LossWeights,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub mean: Option<f64>,
    /// Sample standard deviation; absent with fewer than two runs.
    pub std: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config_hash: String,
    pub entries: Vec<AblationEntry>,
}

impl AblationReport {
    pub fn entry(&self, name: &str) -> Option<&AblationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// The three loss wirings compared by the ablation, built from the `a`, `b`
/// of `base`.
pub fn ablation_configs(base: &crate::nn::LossWeights) -> [(&'static str, crate::nn::LossWeights); 3] {
    use crate::nn::LossWeights;
    [
        ("physics-only", LossWeights::physics_only(base.a, base.b)),
        ("implicit-only", LossWeights::implicit_only()),
        ("combined", LossWeights::combined(base.a, base.b)),
    ]
}

/// Pretrains under each loss wiring for every seed and scores the frozen
/// encoder with a linear probe on the sample labels. The same seed drives
/// initialisation, batching and the probe split in every configuration.
pub fn ablation_suite(
    samples: &[crate::nn::TrainSample],
    base: &crate::nn::TrainConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("ablation needs at least one seed".into()));
    }
    let clouds = labelled_clouds(samples)?;
    let mut entries = Vec::new();
    for (name, weights) in ablation_configs(&base.weights) {
        let mut entry = AblationEntry {
            name: name.to_string(),
            weights,
            seeds: Vec::new(),
            accuracies: Vec::new(),
            final_losses: Vec::new(),
            mean: None,
            std: None,
            failures: Vec::new(),
        };
        for &seed in seeds {
            let cfg = crate::nn::TrainConfig {
                weights,
                seed,
                ..base.clone()
            };
            let run = crate::nn::pretrain(samples, &cfg)
                .and_then(|out| Ok((crate::nn::probe_classify(&out.network, &clouds, seed)?, out)));
            match run {
                Ok((probe, out)) => {
                    entry.seeds.push(seed);
                    entry.accuracies.push(probe.accuracy);
                    entry.final_losses.push(out.log.last().map_or(f64::NAN, |r| r.l_all));
                }
                Err(e) => entry.failures.push(format!("seed {seed}: {e}")),
            }
        }
        (entry.mean, entry.std) = mean_std(&entry.accuracies);
        entries.push(entry);
    }
    Ok(AblationReport {
        config_hash: crate::losses::config_hash(&(base, seeds)),
        entries,
    })
}

pub fn labelled_clouds(samples: &[crate::nn::TrainSample]) -> Result<Vec<(Vec<Vec3>, String)>> {
    samples
        .iter()
        .map(|s| {
            let label = s
                .label
                .clone()
                .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no label", s.id)))?;
            let pts = s.points.outer_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect();
            Ok((pts, label))
        })
        .collect()
}

/// Latent projected onto the first two principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

/// Projects row vectors onto their two leading principal components.
/// Each component's sign makes its largest-magnitude loading positive.
pub fn pca_2d(rows: &[Vec<f64>]) -> Result<(Vec<[f64; 2]>, [f64; 2])> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 2 samples, got {}",
            rows.len()
        )));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::SizeMismatch("embedding rows differ in length".into()));
    }
    let n = rows.len();
    let x = nalgebra::DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let centered = nalgebra::DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0).max(1.0);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::new();
    for &k in order.iter().take(2) {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        axes.push(v);
    }
    while axes.len() < 2 {
        axes.push(nalgebra::DVector::zeros(d));
    }
    let proj = (0..n)
        .map(|i| {
            let r = centered.row(i);
            [r.dot(&axes[0].transpose()), r.dot(&axes[1].transpose())]
        })
        .collect();
    let var = [0, 1].map(|c| order.get(c).map_or(0.0, |&k| eig.eigenvalues[k].max(0.0)));
    Ok((proj, var))
}

/// Encodes every cloud with the network and projects the latents to 2D.
pub fn export_embeddings(net: &crate::nn::Network, clouds: &[(Vec<Vec3>, String)]) -> Result<Vec<EmbeddingPoint>> {
    let pts: Vec<Vec<Vec3>> = clouds.iter().map(|(p, _)| p.clone()).collect();
    let latents = crate::nn::embed(net, &pts)?;
    let (proj, _) = pca_2d(&latents)?;
    Ok(proj
        .into_iter()
        .zip(clouds)
        .map(|(p, (_, l))| EmbeddingPoint {
            x: p[0],
            y: p[1],
            label: l.clone(),
        })
        .collect())
}

/// `x,y,label` CSV with a header line.
pub fn embeddings_csv(points: &[EmbeddingPoint]) -> String {
    let mut s = String::from("x,y,label\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{}\n",
            crate::io::fmt_f64(p.x),
            crate::io::fmt_f64(p.y),
            p.label
        ));
    }
    s
}
