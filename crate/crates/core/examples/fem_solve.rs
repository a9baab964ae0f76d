//! Static linear elasticity on a meshed shape: assembly, Jacobi-preconditioned
//! conjugate gradients, residual, energy and reaction balance.

use physpretrain::delaunay::{delaunay3d, remove_slivers};
use physpretrain::fem::{assemble, default_max_iter, reactions, solve_with_stats, MaterialForceSpec};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::pipeline::{generate_shapes, FamilyChoice, ShapeFamily};
use physpretrain::normalize_unit_sphere;

fn main() -> physpretrain::Result<()> {
    let shape = &generate_shapes(FamilyChoice::One(ShapeFamily::Box), 1, 512, 5)?[0];
    let (pc, _) = normalize_unit_sphere(shape)?;
    let mesh = remove_slivers(&delaunay3d(&pc.points, 0)?, 1e-3)?.largest_face_component();
    let mat = MaterialForceSpec::new(2.0, 0.3, make_force_spec(&mesh, 0.8, 0.05, AxisChoice::Auto)?)?;
    println!("lambda {:.4}  mu {:.4}", mat.lambda, mat.mu);
    let sys = assemble(&mesh, &mat)?;
    println!("{} dofs, {} free, {} stored entries", sys.dim(), sys.num_free(), sys.k.values.len());
    let (u, stats) = solve_with_stats(&sys, 1e-10, default_max_iter(&sys))?;
    let flat = u.to_flat();
    let ku = sys.k.mul_vec(&flat);
    let energy = 0.5 * flat.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>();
    let work = 0.5 * flat.iter().zip(&sys.f).map(|(a, b)| a * b).sum::<f64>();
    println!("{} iterations, relative residual {:.2e}", stats.iterations, stats.relative_residual);
    println!("strain energy {energy:.6e}, half external work {work:.6e}");
    let r = reactions(&sys, &u);
    let total: [f64; 3] = [0, 1, 2].map(|d| r.iter().skip(d).step_by(3).sum::<f64>());
    let f = mat.force.force();
    println!("reaction sum [{:+.3e} {:+.3e} {:+.3e}] vs applied [{:+.3e} {:+.3e} {:+.3e}]", total[0], total[1], total[2], f.x, f.y, f.z);
    let max_u = u.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    println!("max |u| = {max_u:.3e}");
    Ok(())
}
