//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use physpretrain::continuum::nodal_equilibrium_residual;
use physpretrain::delaunay::delaunay3d;
use physpretrain::fem::{
    assemble, assemble_stiffness, lame_from_e_nu, solve_displacement, DisplacementField, MaterialForceSpec,
    SparseSystem,
};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::losses::{data_fidelity_loss, implicit_loss, physics_informed_loss, total_loss, FidelityMode};
use physpretrain::nn::{check_gradients, pretrain, LossWeights, Network, TrainConfig, TrainSample};
use physpretrain::pipeline::{
    ablation_suite, build_dataset, gen_shapes, load_dataset, load_record, DatasetManifest, FamilyChoice,
    DatasetConfig, MANIFEST_FILE,
};
use physpretrain::udf::{sample_queries, udf_brute_force, udf_ground_truth};
use physpretrain::{PointCloud, TetMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// The 30-shape, 3-class toy set shared by the dataset-level criteria.
struct Toy {
    root: PathBuf,
    manifest: DatasetManifest,
    samples: Vec<TrainSample>,
}

fn toy_dataset() -> Toy {
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_toy");
    let _ = std::fs::remove_dir_all(&base);
    gen_shapes(FamilyChoice::Mixed, 30, 512, 0, base.join("clouds")).unwrap();
    let root = base.join("dataset");
    build_dataset(base.join("clouds"), &root, &DatasetConfig::default(), 1).unwrap();
    let (manifest, samples) = load_dataset(root.join(MANIFEST_FILE), FidelityMode::PerCell).unwrap();
    Toy {
        root,
        manifest,
        samples,
    }
}

fn c1_patch_test() -> Outcome {
    let t = Instant::now();
    let mut v: Vec<Vec3> = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    v.push(Vec3::new(0.42, 0.57, 0.46));
    let faces = [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]];
    let cells: Vec<[usize; 4]> = faces
        .iter()
        .flat_map(|f| [[f[0], f[1], f[2], 8], [f[0], f[2], f[3], 8]])
        .collect();
    let mesh = TetMesh::from_points(v, cells);
    mesh.validate().map_err(|e| e.to_string())?;
    let a = Matrix3::new(0.01, -0.02, 0.005, 0.003, 0.02, -0.01, 0.007, 0.004, -0.015);
    let (lambda, mu) = lame_from_e_nu(1.0, 0.3).unwrap();
    let mut sys = SparseSystem::new(assemble_stiffness(&mesh, lambda, mu).unwrap(), vec![0.0; 27]);
    for i in 0..8 {
        sys.prescribe(i, a * mesh.vertices[i]);
    }
    let u = solve_displacement(&sys, 1e-14, 1000).map_err(|e| e.to_string())?;
    let err = (u.values[8] - a * mesh.vertices[8]).amax();
    let dt = t.elapsed();
    check(
        mesh.num_cells() <= 24 && err <= 1e-8 && dt < Duration::from_secs(1),
        format!("{} tets, interior error {err:.2e}, {:.3} s", mesh.num_cells(), secs(dt)),
    )
}

fn c2_solver_contract(toy: &Toy) -> Outcome {
    let (mut worst_res, mut worst_energy) = (0.0_f64, 0.0_f64);
    for rec in &toy.manifest.samples {
        let b = load_record(&toy.root, rec).unwrap();
        let sys = assemble(&b.mesh, &b.spec).unwrap();
        let u = b.displacement.to_flat();
        worst_res = worst_res.max(sys.relative_residual(&u));
        let ku = sys.k.mul_vec(&u);
        let utku: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        let ftu: f64 = u.iter().zip(&sys.f).map(|(a, b)| a * b).sum();
        worst_energy = worst_energy.max((0.5 * utku - 0.5 * ftu).abs() / ftu.abs());
    }
    check(
        worst_res <= 1e-8 && worst_energy <= 1e-8 && !toy.manifest.samples.is_empty(),
        format!(
            "{} samples, worst relative residual {worst_res:.2e}, worst energy gap {worst_energy:.2e} of f.u",
            toy.manifest.samples.len()
        ),
    )
}

fn c3_continuum_chain() -> Outcome {
    let mut worst = 0.0_f64;
    for m in 0..10u64 {
        let pts = common::random_cloud(30 + 5 * m as usize, 100 + m);
        let mesh = delaunay3d(&pts, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(m);
        let force = make_force_spec(&mesh, rng.gen_range(0.1..1.0), 0.1, AxisChoice::Auto).unwrap();
        let mat = MaterialForceSpec::new(rng.gen_range(0.5..5.0), rng.gen_range(0.2..0.45), force).unwrap();
        let sys = assemble(&mesh, &mat).unwrap();
        for _ in 0..10 {
            let mut u = DisplacementField {
                values: (0..mesh.num_vertices())
                    .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.01)
                    .collect(),
            };
            for &v in &mat.force.fixed_vertices {
                u.values[v] = Vec3::zeros();
            }
            let r = nodal_equilibrium_residual(&mesh, &u, &mat).unwrap();
            let ku_f = sys.residual(&u.to_flat());
            let scale = r.vertices.iter().flat_map(|&v| { let ku_f = &ku_f; (0..3).map(move |d| ku_f[3 * v + d].abs()) }).fold(0.0, f64::max);
            let diff = r
                .vertices
                .iter()
                .zip(&r.values)
                .map(|(&v, x)| (x - Vec3::new(ku_f[3 * v], ku_f[3 * v + 1], ku_f[3 * v + 2])).amax())
                .fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }
    check(worst <= 1e-10, format!("100 fields on 10 meshes, worst relative deviation {worst:.2e}"))
}

fn c4_equilibrium(toy: &Toy) -> Outcome {
    let mut worst = 0.0_f64;
    for rec in &toy.manifest.samples {
        let b = load_record(&toy.root, rec).unwrap();
        let at_u = physics_informed_loss(&nodal_equilibrium_residual(&b.mesh, &b.displacement, &b.spec).unwrap()).unwrap();
        let zero = DisplacementField::zeros(b.mesh.num_vertices());
        let at_0 = physics_informed_loss(&nodal_equilibrium_residual(&b.mesh, &zero, &b.spec).unwrap()).unwrap();
        worst = worst.max(at_u / at_0);
    }
    check(worst <= 1e-6, format!("worst L_pi(u_fem) / L_pi(0) = {worst:.2e}"))
}

fn c5_fixed_points(toy: &Toy) -> Outcome {
    let b = load_record(&toy.root, &toy.manifest.samples[0]).unwrap();
    let l_imp = implicit_loss(&b.queries.distances, &b.queries.distances).unwrap();
    let l_df = data_fidelity_loss(&b.displacement, &b.displacement, &b.mesh).unwrap();
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (li, ld, lp) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        let (a, bb) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let r = total_loss(li, ld, lp, a, bb).unwrap();
        worst = worst.max((r.l_all - (li + a * ld + bb * lp)).abs() / r.l_all.max(f64::MIN_POSITIVE));
    }
    check(
        l_imp == 0.0 && l_df == 0.0 && worst <= 1e-12,
        format!("L_imp(gt,gt) = {l_imp}, L_df(u,u) = {l_df}, composition error {worst:.1e}"),
    )
}

fn c6_udf() -> Outcome {
    let mut mismatches = 0;
    for c in 0..50u64 {
        let pc = PointCloud::new(common::random_cloud(100 + 20 * c as usize, 500 + c));
        let q = sample_queries(&pc, 512, 0.5, 0.05, c).unwrap();
        if udf_ground_truth(&pc, &q).unwrap() != udf_brute_force(&pc, &q).unwrap() {
            mismatches += 1;
        }
    }
    let pc = PointCloud::new(common::random_cloud(400, 9));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs: Vec<(Vec3, Vec3)> = (0..10_000)
        .map(|_| {
            let mut p = || Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            (p(), p())
        })
        .collect();
    let a: Vec<Vec3> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<Vec3> = pairs.iter().map(|p| p.1).collect();
    let (da, db) = (udf_ground_truth(&pc, &a).unwrap(), udf_ground_truth(&pc, &b).unwrap());
    let worst = (0..pairs.len())
        .map(|i| (da[i] - db[i]).abs() - (a[i] - b[i]).norm())
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        mismatches == 0 && worst <= 1e-12,
        format!("{mismatches} of 50 clouds differ from brute force; max Lipschitz excess {worst:.1e} over 10^4 pairs"),
    )
}

fn c7_delaunay() -> Outcome {
    let t = Instant::now();
    let (mut violations, mut worst_vol) = (0, 0.0_f64);
    for c in 0..20u64 {
        let pts = common::random_cloud(20 + 9 * c as usize, 700 + c);
        let mesh = delaunay3d(&pts, c).unwrap();
        violations += common::empty_sphere_violations(&mesh, &pts, 1e-9);
        let hull = common::gift_wrap_hull_volume(&pts);
        worst_vol = worst_vol.max((mesh.total_volume() - hull).abs() / hull);
    }
    let dt = t.elapsed();
    check(
        violations == 0 && worst_vol <= 1e-8 && dt < Duration::from_secs(30),
        format!("{violations} empty-sphere violations, worst hull volume error {worst_vol:.1e}, {:.2} s", secs(dt)),
    )
}

fn c8_gradients(toy: &Toy) -> Outcome {
    let t = Instant::now();
    let net = Network::new(TrainConfig::default().net, 8).unwrap();
    let batch = [toy.samples[0].clone(), toy.samples[1].clone()];
    let entries = check_gradients(&net, &batch, &LossWeights::default(), 6, 1e-6, 8).unwrap();
    let layers: std::collections::BTreeSet<_> = entries.iter().map(|e| e.layer.as_str()).collect();
    // Absolute floor: round-off of the central difference, eps * |L| / h.
    let bad: Vec<_> = entries
        .iter()
        .filter(|e| (e.analytic - e.numeric).abs() > 1e-4 * e.analytic.abs().max(e.numeric.abs()) + 1e-7)
        .collect();
    let worst = entries.iter().map(|e| e.relative_error(1e-3)).fold(0.0, f64::max);
    let dt = t.elapsed();
    check(
        bad.is_empty() && layers.len() == net.layers().len() && dt < Duration::from_secs(60),
        format!(
            "{} parameters in {} layers, {} outside tolerance, worst relative error {worst:.1e}, {:.1} s",
            entries.len(),
            layers.len(),
            bad.len(),
            secs(dt)
        ),
    )
}

fn c9_training(toy: &Toy) -> Outcome {
    let cfg = TrainConfig {
        epochs: 50,
        seed: 9,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let a = pretrain(&toy.samples, &cfg).unwrap();
    let dt = t.elapsed();
    let b = pretrain(&toy.samples, &cfg).unwrap();
    let first = a.log[0].l_all;
    let last = a.log.last().unwrap().l_all;
    let identical = a.log == b.log && a.network.params == b.network.params;
    check(
        last <= 0.5 * first && identical && dt < Duration::from_secs(600) && toy.samples.len() == 30,
        format!(
            "{} shapes, L_all {first:.4} -> {last:.4} (ratio {:.3}), rerun identical: {identical}, {:.1} s",
            toy.samples.len(),
            last / first,
            secs(dt)
        ),
    )
}

fn c10_ablation(toy: &Toy) -> Outcome {
    let t = Instant::now();
    let report = ablation_suite(&toy.samples, &TrainConfig::default(), &[0, 1, 2, 3, 4]).unwrap();
    let mean = |n: &str| report.entry(n).and_then(|e| e.mean).unwrap_or(f64::NAN);
    let (phys, imp, comb) = (mean("physics-only"), mean("implicit-only"), mean("combined"));
    let failures: usize = report.entries.iter().map(|e| e.failures.len()).sum();
    check(
        failures == 0 && comb >= imp && comb >= phys && comb >= 0.85,
        format!(
            "mean probe accuracy physics-only {phys:.3}, implicit-only {imp:.3}, combined {comb:.3}, {:.0} s",
            secs(t.elapsed())
        ),
    )
}

fn c11_lame() -> Outcome {
    let (l, m) = lame_from_e_nu(1.0, 0.25).unwrap();
    let mut worst = 0.0_f64;
    for e in [0.5, 1.0, 2.0, 3.7, 100.0] {
        for nu in [0.1, 0.2, 0.3, 0.45] {
            let (l1, m1) = lame_from_e_nu(1.0, nu).unwrap();
            let (le, me) = lame_from_e_nu(e, nu).unwrap();
            worst = worst.max((le - e * l1).abs().max((me - e * m1).abs()) / (e * (l1.abs() + m1)));
        }
    }
    check(
        (l - 0.4).abs() <= 1e-15 && (m - 0.4).abs() <= 1e-15 && worst <= 1e-12,
        format!("(lambda, mu)(1, 0.25) = ({l}, {m}), E-linearity error {worst:.1e}"),
    )
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let t = Instant::now();
    let toy = toy_dataset();
    println!(
        "toy set: {} samples, {} quarantined, built in {:.1} s",
        toy.samples.len(),
        toy.manifest.quarantined.len(),
        secs(t.elapsed())
    );
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("FEM patch test", Box::new(c1_patch_test)),
        ("solver contract", Box::new(|| c2_solver_contract(&toy))),
        ("continuum-chain oracle", Box::new(c3_continuum_chain)),
        ("equilibrium of ground truth", Box::new(|| c4_equilibrium(&toy))),
        ("trivial fixed points", Box::new(|| c5_fixed_points(&toy))),
        ("UDF equivalence", Box::new(c6_udf)),
        ("Delaunay correctness", Box::new(c7_delaunay)),
        ("gradient suite", Box::new(|| c8_gradients(&toy))),
        ("training smoke", Box::new(|| c9_training(&toy))),
        ("ablation direction", Box::new(|| c10_ablation(&toy))),
        ("Lame formulas", Box::new(c11_lame)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        match outcome {
            Ok(d) => println!("criterion {:>2} {name}: PASS  {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL  {d}", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
