#![allow(dead_code)]

use physpretrain::geometry::{signed_volume, TetMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Checks that no point lies strictly inside any cell's circumsphere, with a
/// relative tolerance on the radius. Returns the number of violations.
pub fn empty_sphere_violations(mesh: &TetMesh, points: &[Vec3], rel_tol: f64) -> usize {
    let mut bad = 0;
    for cell in &mesh.cells {
        let p: Vec<Vec3> = cell.iter().map(|&v| points[mesh.retained_map[v]]).collect();
        let s = physpretrain::delaunay::circumsphere(&p[0], &p[1], &p[2], &p[3]).unwrap();
        let own: Vec<usize> = cell.iter().map(|&v| mesh.retained_map[v]).collect();
        for (i, q) in points.iter().enumerate() {
            if own.contains(&i) {
                continue;
            }
            if (q - s.center).norm() < s.radius * (1.0 - rel_tol) {
                bad += 1;
            }
        }
    }
    bad
}

/// Convex hull volume by 3-d gift wrapping (points in general position).
pub fn gift_wrap_hull_volume(points: &[Vec3]) -> f64 {
    use std::collections::{HashSet, VecDeque};
    let n = points.len();
    let orient = |a: usize, b: usize, c: usize, d: usize| {
        (points[b] - points[a]).dot(&(points[c] - points[a]).cross(&(points[d] - points[a])))
    };
    // Lowest point is on the hull; wrap to a first edge and a first face.
    let a = (0..n)
        .min_by(|&i, &j| points[i].z.total_cmp(&points[j].z))
        .unwrap();
    // Second vertex: the edge from `a` that all points lie on one side of,
    // found by wrapping a plane through `a` containing the horizontal x axis.
    let mut b = if a == 0 { 1 } else { 0 };
    let aux = points[a] + Vec3::new(1.0, 0.0, 0.0);
    for i in 0..n {
        if i == a || i == b {
            continue;
        }
        let o = (points[b] - points[a])
            .dot(&(aux - points[a]).cross(&(points[i] - points[a])));
        if o < 0.0 {
            b = i;
        }
    }
    // Wrap a plane around edge (a, b) to find a face with every point on its
    // non-positive side.
    let wrap = |a: usize, b: usize| -> usize {
        let mut c = (0..n).find(|&i| i != a && i != b).unwrap();
        for i in 0..n {
            if i == a || i == b || i == c {
                continue;
            }
            if orient(a, b, c, i) > 0.0 {
                c = i;
            }
        }
        c
    };
    let c = wrap(a, b);
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut seen_faces = HashSet::new();
    let mut done_edges = HashSet::new();
    let mut queue = VecDeque::new();
    let first = [a, b, c];
    queue.push_back(first);
    while let Some(f) = queue.pop_front() {
        let mut key = f;
        key.sort_unstable();
        if !seen_faces.insert(key) {
            continue;
        }
        faces.push(f);
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            // The adjacent face across (u, v) is traversed as (v, u, w).
            if !done_edges.insert((v, u)) {
                continue;
            }
            done_edges.insert((u, v));
            let w = wrap(v, u);
            queue.push_back([v, u, w]);
        }
    }
    let o = points.iter().fold(Vec3::zeros(), |s, p| s + p) / n as f64;
    faces
        .iter()
        .map(|f| signed_volume(&o, &points[f[0]], &points[f[1]], &points[f[2]]).abs())
        .sum()
}

/// Structured box mesh: each grid cube split into six tetrahedra around its
/// main diagonal, which conforms across neighbouring cubes.
pub fn box_mesh(n: [usize; 3], size: [f64; 3]) -> TetMesh {
    let idx = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    let mut vertices = Vec::new();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                vertices.push(Vec3::new(
                    size[0] * i as f64 / n[0] as f64,
                    size[1] * j as f64 / n[1] as f64,
                    size[2] * k as f64 / n[2] as f64,
                ));
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for p in &perms {
                    let mut c = [i, j, k];
                    let mut cell = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        cell[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    let pts = cell.map(|v| vertices[v]);
                    if signed_volume(&pts[0], &pts[1], &pts[2], &pts[3]) < 0.0 {
                        cell.swap(2, 3);
                    }
                    cells.push(cell);
                }
            }
        }
    }
    TetMesh::from_points(vertices, cells)
}

/// Uniformly random rotation from a normalized random quaternion.
pub fn random_rotation(seed: u64) -> nalgebra::Matrix3<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    q.to_rotation_matrix().into_inner()
}

/// Small complete training sample on a random cloud of `n` points.
pub fn toy_sample(n: usize, queries: usize, seed: u64) -> physpretrain::nn::TrainSample {
    use physpretrain::fem::{assemble, solve_displacement, MaterialForceSpec};
    use physpretrain::inertia::{make_force_spec, AxisChoice};
    use physpretrain::losses::FidelityMode;
    use physpretrain::udf::QuerySet;
    use physpretrain::PointCloud;

    let pc = PointCloud::new(random_cloud(n, seed));
    let (pc, _) = physpretrain::normalize_unit_sphere(&pc).unwrap();
    let mesh = physpretrain::delaunay::delaunay3d(&pc.points, seed).unwrap();
    let force = make_force_spec(&mesh, 0.5, 0.25, AxisChoice::Auto).unwrap();
    let mat = MaterialForceSpec::new(1.5, 0.3, force).unwrap();
    let u = solve_displacement(&assemble(&mesh, &mat).unwrap(), 1e-10, 100_000).unwrap();
    let qs = QuerySet::build(&pc, queries, 0.5, 0.05, seed).unwrap();
    physpretrain::nn::TrainSample::new(format!("toy{seed}"), None, &pc.points, mesh, mat, u, &qs, FidelityMode::PerCell)
        .unwrap()
}
