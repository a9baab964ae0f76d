//! Principal axes of inertia and the compressive load case derived from them.

use physpretrain::delaunay::delaunay3d;
use physpretrain::inertia::{inertia_matrix, make_force_spec, principal_axes, AxisChoice};
use physpretrain::pipeline::{generate_shapes, FamilyChoice, ShapeFamily};
use physpretrain::normalize_unit_sphere;

fn main() -> physpretrain::Result<()> {
    let shape = &generate_shapes(FamilyChoice::One(ShapeFamily::Cylinder), 1, 400, 3)?[0];
    let (pc, _) = normalize_unit_sphere(shape)?;
    let mesh = delaunay3d(&pc.points, 0)?;
    for a in principal_axes(&inertia_matrix(&mesh.vertices)?)? {
        println!("moment {:>9.3}  axis [{:+.3} {:+.3} {:+.3}]", a.moment, a.axis.x, a.axis.y, a.axis.z);
    }
    for axis in [AxisChoice::Auto, AxisChoice::Index(2)] {
        let spec = make_force_spec(&mesh, 0.5, 0.05, axis)?;
        let d = spec.direction();
        println!(
            "{axis:?}: direction [{:+.3} {:+.3} {:+.3}], {} loaded, {} fixed of {}",
            d.x,
            d.y,
            d.z,
            spec.loaded_vertices.len(),
            spec.fixed_vertices.len(),
            mesh.num_vertices()
        );
    }
    Ok(())
}
