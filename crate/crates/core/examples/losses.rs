//! The three training losses and their weighted sum on a solved sample,
//! for the exact solution and for perturbed predictions.

use physpretrain::continuum::nodal_equilibrium_residual;
use physpretrain::delaunay::delaunay3d;
use physpretrain::fem::{assemble, solve_displacement, DisplacementField, MaterialForceSpec};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::losses::{data_fidelity_loss, implicit_loss, physics_informed_loss, total_loss};
use physpretrain::pipeline::{generate_shapes, FamilyChoice};
use physpretrain::udf::QuerySet;
use physpretrain::{normalize_unit_sphere, Vec3};

fn main() -> physpretrain::Result<()> {
    let (pc, _) = normalize_unit_sphere(&generate_shapes(FamilyChoice::Mixed, 1, 256, 4)?[0])?;
    let mesh = delaunay3d(&pc.points, 0)?;
    let mat = MaterialForceSpec::new(1.5, 0.3, make_force_spec(&mesh, 0.5, 0.05, AxisChoice::Auto)?)?;
    let u = solve_displacement(&assemble(&mesh, &mat)?, 1e-10, 100_000)?;
    let qs = QuerySet::build(&pc, 512, 0.5, 0.05, 0)?;

    for noise in [0.0, 1e-3, 1e-2] {
        let u_hat = DisplacementField {
            values: u.values.iter().enumerate().map(|(i, v)| v + Vec3::new((i as f64).sin(), (i as f64).cos(), 0.5) * noise).collect(),
        };
        let pred_udf: Vec<f64> = qs.distances.iter().enumerate().map(|(i, d)| d + noise * (i % 3) as f64).collect();
        let l_imp = implicit_loss(&pred_udf, &qs.distances)?;
        let l_df = data_fidelity_loss(&u_hat, &u, &mesh)?;
        let l_pi = physics_informed_loss(&nodal_equilibrium_residual(&mesh, &u_hat, &mat)?)?;
        let r = total_loss(l_imp, l_df, l_pi, 1.0, 0.1)?;
        println!("noise {noise:.0e}: L_imp {:.3e}  L_df {:.3e}  L_pi {:.3e}  L_all {:.3e}", r.l_imp, r.l_df, r.l_pi, r.l_all);
    }
    Ok(())
}
