//! Query sampling around a cloud and exact unsigned-distance targets, with the
//! kd-tree result compared against brute force.

use physpretrain::pipeline::{generate_shapes, FamilyChoice, ShapeFamily};
use physpretrain::udf::{udf_brute_force, QuerySet};
use physpretrain::normalize_unit_sphere;

fn main() -> physpretrain::Result<()> {
    let shape = &generate_shapes(FamilyChoice::One(ShapeFamily::Sphere), 1, 2048, 1)?[0];
    let (pc, _) = normalize_unit_sphere(shape)?;
    let t = std::time::Instant::now();
    let qs = QuerySet::build(&pc, 4096, 0.5, 0.05, 9)?;
    let fast = t.elapsed();
    let t = std::time::Instant::now();
    let brute = udf_brute_force(&pc, &qs.queries)?;
    println!("kd-tree {fast:?}, brute force {:?}, identical: {}", t.elapsed(), brute == qs.distances);
    let (near, far): (Vec<f64>, Vec<f64>) = qs.distances.iter().partition(|&&d| d < 0.1);
    println!("{} queries within 0.1 of the surface, {} farther; max distance {:.3}", near.len(), far.len(), far.iter().fold(0.0_f64, |m, &d| m.max(d)));
    let bytes = qs.to_bytes();
    println!("serialized {} bytes, round trip equal: {}", bytes.len(), QuerySet::from_bytes(&bytes).as_ref() == Ok(&qs));
    Ok(())
}
