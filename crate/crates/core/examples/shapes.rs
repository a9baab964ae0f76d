//! Generates a few labelled synthetic clouds and writes them to a directory.
//!
//! `cargo run --example shapes -- [out_dir]`

use physpretrain::pipeline::{gen_shapes, FamilyChoice};

fn main() -> physpretrain::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("physpretrain_shapes"));
    let recs = gen_shapes(FamilyChoice::Mixed, 9, 512, 42, &out)?;
    for r in &recs {
        let pc = physpretrain::io::load_point_cloud(&r.path)?;
        let ext = pc.points.iter().fold([0.0_f64; 3], |m, p| [m[0].max(p.x.abs()), m[1].max(p.y.abs()), m[2].max(p.z.abs())]);
        println!("{:<10} {:>4} pts  half-extents {:.2} {:.2} {:.2}  {}", r.label, pc.len(), ext[0], ext[1], ext[2], r.path.display());
    }
    Ok(())
}
