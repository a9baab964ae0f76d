//! The dual-task network on one sample: latent code, implicit decoder,
//! displacement decoder, losses and a finite-difference gradient spot check.

use physpretrain::delaunay::delaunay3d;
use physpretrain::fem::{assemble, solve_displacement, MaterialForceSpec};
use physpretrain::inertia::{make_force_spec, AxisChoice};
use physpretrain::losses::FidelityMode;
use physpretrain::nn::{check_gradients, LossWeights, NetConfig, Network, TrainSample};
use physpretrain::pipeline::{generate_shapes, FamilyChoice};
use physpretrain::udf::QuerySet;
use physpretrain::normalize_unit_sphere;

fn main() -> physpretrain::Result<()> {
    let (pc, _) = normalize_unit_sphere(&generate_shapes(FamilyChoice::Mixed, 1, 64, 2)?[0])?;
    let mesh = delaunay3d(&pc.points, 0)?;
    let mat = MaterialForceSpec::new(1.0, 0.3, make_force_spec(&mesh, 0.5, 0.05, AxisChoice::Auto)?)?;
    let u = solve_displacement(&assemble(&mesh, &mat)?, 1e-10, 100_000)?;
    let qs = QuerySet::build(&pc, 128, 0.5, 0.05, 0)?;
    let sample = TrainSample::new("demo", None, &pc.points, mesh, mat, u, &qs, FidelityMode::PerCell)?;

    let net = Network::new(NetConfig { n_points: 64, ..NetConfig::default() }, 1)?;
    println!("{} parameters in {} layers", net.num_params(), net.layers().len());
    let z = net.encoder_forward(&pc.points)?;
    println!("latent dim {}, |z| = {:.3}", z.len(), z.dot(&z).sqrt());
    let f = net.forward_sample(&sample, None)?;
    println!("L_imp {:.4}  L_df {:.4e}  L_pi {:.4e}", f.l_imp, f.l_df, f.l_pi);

    let entries = check_gradients(&net, std::slice::from_ref(&sample), &LossWeights::default(), 3, 1e-6, 0)?;
    // Below ~1e-7 the finite difference is dominated by round-off in the loss.
    let bad = entries
        .iter()
        .filter(|e| (e.analytic - e.numeric).abs() > 1e-4 * e.analytic.abs().max(e.numeric.abs()) + 1e-7)
        .count();
    let worst = entries.iter().map(|e| e.relative_error(1e-3)).fold(0.0, f64::max);
    println!("{} parameters checked, {bad} outside tolerance, worst relative error {worst:.2e}", entries.len());
    Ok(())
}
