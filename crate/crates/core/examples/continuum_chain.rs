//! Deformation gradient, small strain and Hooke stress per cell, and the
//! nodal equilibrium residual, checked against the assembled `K u - f`.

use physpretrain::continuum::{cell_tensors, nodal_equilibrium_residual};
use physpretrain::delaunay::delaunay3d;
use physpretrain::fem::{assemble, solve_displacement, DisplacementField, MaterialForceSpec};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::Vec3;
use rand::{Rng, SeedableRng};

fn main() -> physpretrain::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Vec3> = (0..80).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen::<f64>() * 2.0)).collect();
    let mesh = delaunay3d(&pts, 0)?;
    let mat = MaterialForceSpec::new(1.0, 0.25, make_force_spec(&mesh, 1.0, 0.1, AxisChoice::Auto)?)?;

    // Uniform stretch: every cell sees the same F, strain and stress.
    let stretch = DisplacementField {
        values: mesh.vertices.iter().map(|p| Vec3::new(0.0, 0.0, 1e-3 * p.z)).collect(),
    };
    let (f, eps, sigma) = cell_tensors(&mesh, &stretch, mat.lambda, mat.mu)?;
    println!("F_zz {:.6}  eps_zz {:.2e}  sigma_zz {:.4e}  sigma_xx {:.4e}", f[0][(2, 2)], eps[0][(2, 2)], sigma[0][(2, 2)], sigma[0][(0, 0)]);

    // Random field: residual equals the assembled system residual.
    let sys = assemble(&mesh, &mat)?;
    let u = DisplacementField {
        values: (0..mesh.num_vertices()).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 1e-2).collect(),
    };
    let r = nodal_equilibrium_residual(&mesh, &u, &mat)?;
    let ku_f = sys.residual(&u.to_flat());
    let diff = r
        .vertices
        .iter()
        .zip(&r.values)
        .map(|(&v, x)| (x - Vec3::new(ku_f[3 * v], ku_f[3 * v + 1], ku_f[3 * v + 2])).norm())
        .fold(0.0, f64::max);
    println!("random field: max |r| {:.3e}, max deviation from K u - f {diff:.2e}", r.max_norm());

    let u = solve_displacement(&sys, 1e-12, 100_000)?;
    let r = nodal_equilibrium_residual(&mesh, &u, &mat)?;
    let r0 = nodal_equilibrium_residual(&mesh, &DisplacementField::zeros(mesh.num_vertices()), &mat)?;
    println!("solution: max |r| {:.3e} (zero field: {:.3e})", r.max_norm(), r0.max_norm());
    Ok(())
}
