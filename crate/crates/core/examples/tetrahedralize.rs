//! Delaunay tetrahedralization of a cloud, pruning of oversized cells and
//! mesh quality statistics.

use physpretrain::delaunay::{cell_quality, delaunay3d, median_nearest_neighbor_distance, prune_oversized};
use physpretrain::pipeline::{generate_shapes, FamilyChoice};
use physpretrain::{normalize_unit_sphere, Vec3};
use rand::{Rng, SeedableRng};

fn report(name: &str, mesh: &physpretrain::TetMesh) {
    let mut q: Vec<f64> = (0..mesh.num_cells()).map(|c| cell_quality(mesh, c)).collect();
    q.sort_by(f64::total_cmp);
    println!(
        "{name:<24} {:>5} vertices {:>5} cells  volume {:.4}  quality min {:.1e} median {:.3}  components {}",
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.total_volume(),
        q[0],
        q[q.len() / 2],
        mesh.face_components().len()
    );
}

fn main() -> physpretrain::Result<()> {
    let shape = &generate_shapes(FamilyChoice::Mixed, 3, 512, 7)?[2];
    let (pc, _) = normalize_unit_sphere(shape)?;
    let mesh = delaunay3d(&pc.points, 0)?;
    report("cylinder hull", &mesh);

    // Two dense blobs: pruning cuts the long bridging cells.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut pts = Vec::new();
    for c in [-2.0, 2.0] {
        for _ in 0..150 {
            pts.push(Vec3::new(c + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        }
    }
    let mesh = delaunay3d(&pts, 0)?;
    println!("median nearest-neighbour distance {:.4}", median_nearest_neighbor_distance(&pts));
    report("two blobs", &mesh);
    report("two blobs, pruned x2.5", &prune_oversized(&mesh, 2.5)?);
    Ok(())
}
