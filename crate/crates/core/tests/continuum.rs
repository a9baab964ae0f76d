mod common;

use common::{box_mesh, random_cloud, random_rotation};
use nalgebra::Matrix3;
use physpretrain::continuum::{
    deformation_gradient, nodal_equilibrium_residual, physics_loss_gradient, shape_matrix, strain,
    NodalResidualField,
};
use physpretrain::delaunay::delaunay3d;
use physpretrain::fem::{assemble, solve_displacement, DisplacementField, MaterialForceSpec};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::losses::physics_informed_loss;
use physpretrain::{TetMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(n: usize, rng: &mut ChaCha8Rng) -> DisplacementField {
    DisplacementField {
        values: (0..n)
            .map(|_| Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
            .collect(),
    }
}

fn case(mesh: &TetMesh, e: f64, nu: f64) -> MaterialForceSpec {
    let force = make_force_spec(mesh, 0.7, 0.1, AxisChoice::Auto).unwrap();
    MaterialForceSpec::new(e, nu, force).unwrap()
}

#[test]
fn residual_equals_assembled_ku_minus_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in 0..10 {
        let pts = random_cloud(40 + 5 * m, 100 + m as u64);
        let mesh = delaunay3d(&pts, m as u64).unwrap();
        let mat = case(&mesh, rng.gen_range(0.5..5.0), rng.gen_range(0.2..0.45));
        let sys = assemble(&mesh, &mat).unwrap();
        for _ in 0..10 {
            let u = random_field(mesh.num_vertices(), &mut rng);
            let r = nodal_equilibrium_residual(&mesh, &u, &mat).unwrap();
            let kuf = sys.residual(&u.to_flat());
            let mut diff = 0.0_f64;
            let mut norm = 0.0_f64;
            for (&v, rv) in r.vertices.iter().zip(&r.values) {
                let want = Vec3::new(kuf[3 * v], kuf[3 * v + 1], kuf[3 * v + 2]);
                diff += (rv - want).norm_squared();
                norm += want.norm_squared();
            }
            assert!(diff.sqrt() <= 1e-10 * norm.sqrt(), "mesh {m}: {} vs {}", diff.sqrt(), norm.sqrt());
        }
    }
}

#[test]
fn zero_field_residual_is_negative_load() {
    let mesh = box_mesh([2, 2, 4], [0.5, 0.5, 1.0]);
    let mat = case(&mesh, 1.0, 0.3);
    let r = nodal_equilibrium_residual(&mesh, &DisplacementField::zeros(mesh.num_vertices()), &mat).unwrap();
    let per = mat.force.force() / mat.force.loaded_vertices.len() as f64;
    for (&v, rv) in r.vertices.iter().zip(&r.values) {
        if mat.force.loaded_vertices.contains(&v) {
            assert!((rv + per).norm() < 1e-15);
        } else {
            assert_eq!(*rv, Vec3::zeros());
        }
    }
    assert!(r.vertices.iter().all(|v| !mat.force.fixed_vertices.contains(v)));
}

#[test]
fn ground_truth_is_in_equilibrium_and_translation_invariant() {
    let mesh = box_mesh([2, 2, 5], [0.4, 0.4, 1.0]);
    let mat = case(&mesh, 2.0, 0.35);
    let sys = assemble(&mesh, &mat).unwrap();
    let u = solve_displacement(&sys, 1e-10, 10_000).unwrap();
    let r = nodal_equilibrium_residual(&mesh, &u, &mat).unwrap();
    let fnorm = sys.f.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(r.norm() <= 1e-8 * fnorm);

    let t = Vec3::new(0.3, -0.2, 0.05);
    let shifted = DisplacementField {
        values: u.values.iter().map(|v| v + t).collect(),
    };
    let r2 = nodal_equilibrium_residual(&mesh, &shifted, &mat).unwrap();
    for (a, b) in r.values.iter().zip(&r2.values) {
        assert!((a - b).norm() < 1e-10);
    }
    let zero = nodal_equilibrium_residual(&mesh, &DisplacementField::zeros(mesh.num_vertices()), &mat).unwrap();
    assert!(physics_informed_loss(&r).unwrap() <= 1e-6 * physics_informed_loss(&zero).unwrap());
}

#[test]
fn shape_matrix_rotates_with_the_cell() {
    let x = [
        Vec3::new(0.1, 0.2, 0.3),
        Vec3::new(1.0, 0.1, 0.0),
        Vec3::new(0.2, 0.9, 0.4),
        Vec3::new(-0.1, 0.3, 1.2),
    ];
    let r = random_rotation(4);
    let xr = x.map(|p| r * p);
    assert!((shape_matrix(&xr) - r * shape_matrix(&x)).abs().max() < 1e-14);
}

#[test]
fn deformation_gradient_maps_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let x = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0)) + Matrix3::identity() * 2.0;
        let xp = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let f = deformation_gradient(&x, &xp).unwrap();
        assert!((f * x - xp).abs().max() < 1e-10);
    }
}

#[test]
fn small_rotation_strain_is_second_order() {
    let theta = 1e-4;
    for seed in 0..5 {
        let axis = random_rotation(seed) * Vec3::x();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), theta);
        assert!(strain(rot.matrix()).norm() < 1e-7);
    }
}

#[test]
fn physics_gradient_matches_finite_differences() {
    let mesh = box_mesh([1, 1, 3], [0.5, 0.5, 1.0]);
    let mat = case(&mesh, 1.5, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = random_field(mesh.num_vertices(), &mut rng);
    let loss = |u: &DisplacementField| physics_informed_loss(&nodal_equilibrium_residual(&mesh, u, &mat).unwrap()).unwrap();
    let r = nodal_equilibrium_residual(&mesh, &u, &mat).unwrap();
    let g = physics_loss_gradient(&mesh, &r, &mat).unwrap();
    let h = 1e-6;
    for v in 0..mesh.num_vertices() {
        for d in 0..3 {
            let mut up = u.clone();
            up.values[v][d] += h;
            let mut dn = u.clone();
            dn.values[v][d] -= h;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            let an = g.values[v][d];
            assert!((fd - an).abs() <= 1e-6 * fd.abs().max(1e-3), "{v},{d}: {fd} vs {an}");
        }
    }
}

#[test]
fn residual_dump_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let r = NodalResidualField {
        vertices: vec![0, 1, 2],
        values: vec![Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), Vec3::new(-1e-9, 0.5, 7.0)],
    };
    let p = dir.path().join("r.field");
    r.save(&p).unwrap();
    assert_eq!(NodalResidualField::load(&p).unwrap(), r);
}

#[test]
fn length_mismatch_rejected() {
    let mesh = box_mesh([1, 1, 2], [1.0, 1.0, 2.0]);
    let mat = case(&mesh, 1.0, 0.3);
    assert!(nodal_equilibrium_residual(&mesh, &DisplacementField::zeros(3), &mat).is_err());
}
