mod common;

use common::{box_mesh, random_cloud};
use physpretrain::continuum::NodalResidualField;
use physpretrain::fem::DisplacementField;
use physpretrain::losses::{
    data_fidelity_loss, data_fidelity_loss_with, fidelity_weights, implicit_loss, physics_informed_loss,
    FidelityMode,
};
use physpretrain::udf::{sample_queries, udf_brute_force, udf_ground_truth, QuerySet};
use physpretrain::{PointCloud, Vec3};
use proptest::prelude::*;

#[test]
fn accelerated_distances_equal_brute_force() {
    let pc = PointCloud::new(random_cloud(1024, 1));
    let q = sample_queries(&pc, 512, 0.5, 0.05, 2).unwrap();
    assert_eq!(udf_ground_truth(&pc, &q).unwrap(), udf_brute_force(&pc, &q).unwrap());
}

#[test]
fn uniform_queries_are_centred() {
    let pc = PointCloud::new(random_cloud(8, 3));
    let k = 20_000;
    let q = sample_queries(&pc, k, 0.0, 0.05, 4).unwrap();
    let mean: Vec3 = q.iter().sum::<Vec3>() / k as f64;
    // Uniform on [-1, 1] has standard deviation 1/sqrt(3).
    let bound = 3.0 / 3f64.sqrt() / (k as f64).sqrt();
    assert!(mean.amax() < bound, "{mean:?}");
    assert!(q.iter().all(|p| p.amax() <= 1.0));
}

#[test]
fn near_count_and_determinism() {
    let pc = PointCloud::new(random_cloud(50, 5));
    let a = sample_queries(&pc, 11, 0.5, 0.0, 6).unwrap();
    let near = a.iter().filter(|p| pc.points.contains(p)).count();
    assert_eq!(near, 6);
    assert_eq!(a, sample_queries(&pc, 11, 0.5, 0.0, 6).unwrap());
    let qs = QuerySet::build(&pc, 64, 0.5, 0.05, 7).unwrap();
    assert!(qs.distances.iter().all(|&d| d >= 0.0));
    assert!(qs.queries.iter().all(|p| p.amax() <= 1.0));
}

#[test]
fn query_set_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let pc = PointCloud::new(random_cloud(30, 8));
    let qs = QuerySet::build(&pc, 100, 0.5, 0.05, 9).unwrap();
    let p = dir.path().join("q.bin");
    qs.save(&p).unwrap();
    assert_eq!(QuerySet::load(&p).unwrap(), qs);
}

#[test]
fn per_vertex_mode_and_weights() {
    let mesh = box_mesh([1, 1, 2], [1.0, 1.0, 2.0]);
    let n = mesh.num_vertices();
    let u = DisplacementField::zeros(n);
    let mut uh = u.clone();
    uh.values[0] = Vec3::new(0.0, 0.0, 2.0);
    let pv = data_fidelity_loss_with(&uh, &u, &mesh, FidelityMode::PerVertex).unwrap();
    assert!((pv - 2.0 / n as f64).abs() < 1e-15);
    for mode in [FidelityMode::PerCell, FidelityMode::PerVertex] {
        let w = fidelity_weights(&mesh, mode);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let direct = data_fidelity_loss_with(&uh, &u, &mesh, mode).unwrap();
        assert!((w[0] * 2.0 - direct).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn udf_is_one_lipschitz(seed in 0u64..1000) {
        let pc = PointCloud::new(random_cloud(64, seed));
        let q = sample_queries(&pc, 64, 0.3, 0.1, seed + 1).unwrap();
        let d = udf_ground_truth(&pc, &q).unwrap();
        for i in 0..q.len() {
            for j in 0..q.len() {
                prop_assert!((d[i] - d[j]).abs() <= (q[i] - q[j]).norm() + 1e-15);
            }
        }
    }

    #[test]
    fn adding_a_point_never_increases_distance(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let pts = random_cloud(40, seed);
        let q = sample_queries(&PointCloud::new(pts.clone()), 50, 0.0, 0.0, seed).unwrap();
        let before = udf_ground_truth(&PointCloud::new(pts.clone()), &q).unwrap();
        let mut more = pts;
        more.push(Vec3::new(x, y, z));
        let after = udf_ground_truth(&PointCloud::new(more), &q).unwrap();
        prop_assert!(before.iter().zip(&after).all(|(b, a)| a <= b));
    }

    #[test]
    fn implicit_loss_batches_compose(a in prop::collection::vec((-2.0f64..2.0, 0.0f64..2.0), 1..40),
                                     b in prop::collection::vec((-2.0f64..2.0, 0.0f64..2.0), 1..40)) {
        let (pa, ga): (Vec<f64>, Vec<f64>) = a.iter().copied().unzip();
        let (pb, gb): (Vec<f64>, Vec<f64>) = b.iter().copied().unzip();
        let la = implicit_loss(&pa, &ga).unwrap();
        let lb = implicit_loss(&pb, &gb).unwrap();
        let all = implicit_loss(&[pa.clone(), pb.clone()].concat(), &[ga.clone(), gb.clone()].concat()).unwrap();
        let weighted = (la * pa.len() as f64 + lb * pb.len() as f64) / (pa.len() + pb.len()) as f64;
        prop_assert!((all - weighted).abs() <= 1e-12);
        prop_assert!(la >= 0.0);
        let mut pr = pa.clone();
        let mut gr = ga.clone();
        pr.reverse();
        gr.reverse();
        prop_assert!((implicit_loss(&pr, &gr).unwrap() - la).abs() <= 1e-12);
    }

    #[test]
    fn physics_loss_is_permutation_invariant(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..30)) {
        let values: Vec<Vec3> = v.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
        let r = NodalResidualField { vertices: (0..values.len()).collect(), values: values.clone() };
        let mut rev = values;
        rev.reverse();
        let r2 = NodalResidualField { vertices: (0..rev.len()).collect(), values: rev };
        let a = physics_informed_loss(&r).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - physics_informed_loss(&r2).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn fidelity_is_cell_permutation_invariant(seed in 0u64..500) {
        let mesh = box_mesh([2, 1, 2], [1.0, 0.5, 1.0]);
        let n = mesh.num_vertices();
        let pts = random_cloud(n, seed);
        let u = DisplacementField { values: pts.clone() };
        let uh = DisplacementField { values: pts.iter().map(|p| p * 0.5).collect() };
        let mut shuffled = mesh.clone();
        shuffled.cells.reverse();
        let a = data_fidelity_loss(&uh, &u, &mesh).unwrap();
        prop_assert!((a - data_fidelity_loss(&uh, &u, &shuffled).unwrap()).abs() <= 1e-12);
    }
}
