//! Incremental Bowyer-Watson tetrahedralization and oversized-cell pruning.
//!
//! The hull is closed with "ghost" cells that share a single vertex at
//! infinity, so the triangulation always covers the exact convex hull and no
//! finite super-tetrahedron has to be carved away afterwards. Predicates use
//! floating point with error-scaled tolerances; an ambiguous predicate aborts
//! the attempt and the whole construction is retried on coordinates perturbed
//! by a seeded jitter of relative size 1e-9.

use std::collections::{HashMap, HashSet};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{signed_volume, TetMesh, Vec3};
use crate::spatial::KdTree;

/// Number of jittered retries after the unperturbed attempt.
pub const JITTER_RETRIES: usize = 3;
/// Jitter amplitude relative to the bounding-box diagonal.
pub const JITTER_MAGNITUDE: f64 = 1e-9;
/// Default pruning factor on longest edge / median nearest-neighbour spacing.
pub const DEFAULT_PRUNE_FACTOR: f64 = 2.5;

const INF: usize = usize::MAX;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circumsphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Circumsphere {
    pub fn contains_strictly(&self, p: &Vec3, rel_tol: f64) -> bool {
        (p - self.center).norm() < self.radius * (1.0 - rel_tol)
    }
}

/// Sphere through four non-coplanar points.
pub fn circumsphere(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Result<Circumsphere> {
    let (ab, ac, ad) = (b - a, c - a, d - a);
    let scale = ab.norm() * ac.norm() * ad.norm();
    let det6 = ab.dot(&ac.cross(&ad));
    if !(det6.abs() > 1e-12 * scale) {
        return Err(Error::DegenerateConfiguration(
            "circumsphere of coplanar points".into(),
        ));
    }
    let m = Matrix3::from_rows(&[ab.transpose(), ac.transpose(), ad.transpose()]);
    let rhs = Vec3::new(ab.norm_squared(), ac.norm_squared(), ad.norm_squared()) * 0.5;
    let rel = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateConfiguration("singular circumsphere system".into()))?;
    Ok(Circumsphere {
        center: a + rel,
        radius: rel.norm(),
    })
}

#[inline]
fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> (f64, f64) {
    let (ab, ac, ad) = (b - a, c - a, d - a);
    let det = ab.dot(&ac.cross(&ad));
    let tol = 1e-12 * ab.norm() * ac.norm() * ad.norm();
    (det, tol)
}

#[inline]
fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

#[inline]
fn perm3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0].abs() * ((b[1] * c[2]).abs() + (b[2] * c[1]).abs())
        + a[1].abs() * ((b[0] * c[2]).abs() + (b[2] * c[0]).abs())
        + a[2].abs() * ((b[0] * c[1]).abs() + (b[1] * c[0]).abs())
}

/// Positive when `e` lies inside the sphere through a positively oriented
/// tetrahedron `abcd`. Returns the value and its error tolerance.
fn insphere(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3, e: &Vec3) -> (f64, f64) {
    let rows = [a - e, b - e, c - e, d - e];
    let r: Vec<[f64; 3]> = rows.iter().map(|v| [v.x, v.y, v.z]).collect();
    let l: Vec<f64> = rows.iter().map(|v| v.norm_squared()).collect();
    let det = -l[0] * det3(&r[1], &r[2], &r[3]) + l[1] * det3(&r[0], &r[2], &r[3])
        - l[2] * det3(&r[0], &r[1], &r[3])
        + l[3] * det3(&r[0], &r[1], &r[2]);
    let perm = l[0] * perm3(&r[1], &r[2], &r[3])
        + l[1] * perm3(&r[0], &r[2], &r[3])
        + l[2] * perm3(&r[0], &r[1], &r[3])
        + l[3] * perm3(&r[0], &r[1], &r[2]);
    // Lifted determinant is negative for interior points under this orientation.
    (-det, 1e-12 * perm)
}

/// Side of `p` relative to the circumcircle of the triangle `abc` (all in
/// one plane): `Some(true)` inside, `Some(false)` outside, `None` ambiguous.
fn in_circumcircle(a: &Vec3, b: &Vec3, c: &Vec3, p: &Vec3) -> Option<bool> {
    let (ab, ac) = (b - a, c - a);
    let n = ab.cross(&ac);
    let n2 = n.norm_squared();
    if !(n2 > 0.0) {
        return None;
    }
    let center_rel = (n.cross(&ab) * ac.norm_squared() + ac.cross(&n) * ab.norm_squared()) / (2.0 * n2);
    let r2 = center_rel.norm_squared();
    let d2 = (p - a - center_rel).norm_squared();
    if d2 < r2 * (1.0 - 1e-10) {
        Some(true)
    } else if d2 > r2 * (1.0 + 1e-10) {
        Some(false)
    } else {
        None
    }
}

/// Result of a triangulation, including the coordinates the predicates saw.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub mesh: TetMesh,
    /// Coordinates used by the final successful attempt (jittered if
    /// `attempts > 1`), indexed like the input points.
    pub working_points: Vec<Vec3>,
    pub attempts: usize,
}

/// Delaunay tetrahedralization of `points`; mesh vertices keep the input
/// coordinates and `retained_map` points back into `points`.
pub fn delaunay3d(points: &[Vec3], jitter_seed: u64) -> Result<TetMesh> {
    triangulate(points, jitter_seed).map(|t| t.mesh)
}

pub fn triangulate(points: &[Vec3], jitter_seed: u64) -> Result<Triangulation> {
    if points.len() < 4 {
        return Err(Error::DegenerateCloud(points.len()));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite("delaunay input".into()));
    }
    let (lo, hi) = points.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let diag = (hi - lo).norm();
    if !(diag > 0.0) {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }

    // Exact duplicates never become vertices.
    let mut seen = HashSet::new();
    let unique: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let p = points[i];
            seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
        })
        .collect();

    let mut last_bad = Vec::new();
    for attempt in 0..=JITTER_RETRIES {
        let working: Vec<Vec3> = if attempt == 0 {
            points.to_vec()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(
                jitter_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(attempt as u64),
            );
            let amp = JITTER_MAGNITUDE * diag;
            points
                .iter()
                .map(|p| {
                    p + Vec3::new(
                        rng.gen_range(-1.0..=1.0),
                        rng.gen_range(-1.0..=1.0),
                        rng.gen_range(-1.0..=1.0),
                    ) * amp
                })
                .collect()
        };
        match Builder::run(&working, &unique) {
            Ok(cells) => {
                let mesh = finalize(points, cells, diag)?;
                return Ok(Triangulation {
                    mesh,
                    working_points: working,
                    attempts: attempt + 1,
                });
            }
            Err(BuildError::Coplanar) => {
                return Err(Error::DegenerateConfiguration(
                    "all points are coplanar or collinear".into(),
                ))
            }
            Err(BuildError::Ambiguous(pts)) => last_bad = pts,
        }
    }
    last_bad.sort_unstable();
    last_bad.dedup();
    Err(Error::UnresolvedPredicate {
        retries: JITTER_RETRIES,
        points: last_bad,
    })
}

fn finalize(points: &[Vec3], cells: Vec<[usize; 4]>, diag: f64) -> Result<TetMesh> {
    // Re-orient against the unperturbed coordinates; cells that are flat
    // there only existed because of the jitter.
    let floor = 1e-14 * diag.powi(3);
    let mut out = Vec::with_capacity(cells.len());
    for mut c in cells {
        let v = signed_volume(&points[c[0]], &points[c[1]], &points[c[2]], &points[c[3]]);
        if v.abs() <= floor {
            continue;
        }
        if v < 0.0 {
            c.swap(2, 3);
        }
        out.push(c);
    }
    if out.is_empty() {
        return Err(Error::DegenerateConfiguration("no cell with positive volume".into()));
    }
    let full = TetMesh::from_points(points.to_vec(), out);
    let all: Vec<usize> = (0..full.cells.len()).collect();
    Ok(full.subset_cells(&all))
}

enum BuildError {
    Coplanar,
    Ambiguous(Vec<usize>),
}

struct Builder<'a> {
    pts: &'a [Vec3],
    tets: Vec<[usize; 4]>,
    nbr: Vec<[usize; 4]>,
    alive: Vec<bool>,
    mark: Vec<u32>,
    stamp: u32,
    interior: Vec3,
    last: usize,
}

enum Side {
    In,
    Out,
    Ambiguous,
}

impl<'a> Builder<'a> {
    fn run(pts: &'a [Vec3], order: &[usize]) -> std::result::Result<Vec<[usize; 4]>, BuildError> {
        let seed = initial_simplex(pts, order).ok_or(BuildError::Coplanar)?;
        let mut b = Builder {
            pts,
            tets: Vec::new(),
            nbr: Vec::new(),
            alive: Vec::new(),
            mark: Vec::new(),
            stamp: 0,
            interior: (pts[seed[0]] + pts[seed[1]] + pts[seed[2]] + pts[seed[3]]) / 4.0,
            last: 0,
        };
        b.init(seed);
        for &p in order {
            if seed.contains(&p) {
                continue;
            }
            b.insert(p)?;
        }
        Ok(b.tets
            .iter()
            .zip(&b.alive)
            .filter(|(t, &a)| a && !t.contains(&INF))
            .map(|(t, _)| *t)
            .collect())
    }

    fn p(&self, i: usize) -> &Vec3 {
        &self.pts[i]
    }

    fn push(&mut self, t: [usize; 4]) -> usize {
        self.tets.push(t);
        self.nbr.push([NONE; 4]);
        self.alive.push(true);
        self.mark.push(0);
        self.tets.len() - 1
    }

    fn init(&mut self, s: [usize; 4]) {
        let t0 = self.push(s);
        let mut ghosts = [0; 4];
        for k in 0..4 {
            let mut g = s;
            g[k] = INF;
            // Moving vertex k across its face flips orientation; swap back.
            let (i, j) = match k {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            g.swap(i, j);
            ghosts[k] = self.push(g);
        }
        let mut all = vec![t0];
        all.extend_from_slice(&ghosts);
        self.link(&all);
        self.last = t0;
    }

    /// Connects neighbour pointers among the given cells by shared faces.
    fn link(&mut self, ids: &[usize]) {
        let mut faces: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for &t in ids {
            for k in 0..4 {
                let key = face_key(&self.tets[t], k);
                if let Some((o, ok)) = faces.remove(&key) {
                    self.nbr[t][k] = o;
                    self.nbr[o][ok] = t;
                } else {
                    faces.insert(key, (t, k));
                }
            }
        }
    }

    fn is_ghost(&self, t: usize) -> bool {
        self.tets[t].contains(&INF)
    }

    /// Whether point `p` lies inside the circumsphere (or, for ghosts, the
    /// open outer half-space) of cell `t`.
    fn conflict(&self, t: usize, p: usize) -> Side {
        let c = self.tets[t];
        let q = self.p(p);
        if let Some(k) = c.iter().position(|&v| v == INF) {
            let mut sub = [Vec3::zeros(); 4];
            for (j, &v) in c.iter().enumerate() {
                sub[j] = if j == k { *q } else { *self.p(v) };
            }
            let (o, tol) = orient(&sub[0], &sub[1], &sub[2], &sub[3]);
            if o > tol {
                return Side::In;
            }
            if o < -tol {
                return Side::Out;
            }
            let face: Vec<&Vec3> = c.iter().filter(|&&v| v != INF).map(|&v| self.p(v)).collect();
            match in_circumcircle(face[0], face[1], face[2], q) {
                Some(true) => Side::In,
                Some(false) => Side::Out,
                None => Side::Ambiguous,
            }
        } else {
            let (s, tol) = insphere(self.p(c[0]), self.p(c[1]), self.p(c[2]), self.p(c[3]), q);
            if s > tol {
                Side::In
            } else if s < -tol {
                Side::Out
            } else {
                Side::Ambiguous
            }
        }
    }

    fn locate(&self, p: usize) -> Option<usize> {
        let q = self.p(p);
        let mut t = self.last;
        if !self.alive[t] {
            return None;
        }
        let limit = 4 * self.tets.len() + 16;
        let mut start = p % 4;
        for _ in 0..limit {
            if self.is_ghost(t) {
                return matches!(self.conflict(t, p), Side::In).then_some(t);
            }
            let c = self.tets[t];
            let mut moved = false;
            for s in 0..4 {
                let k = (start + s) % 4;
                let mut sub = [*self.p(c[0]), *self.p(c[1]), *self.p(c[2]), *self.p(c[3])];
                sub[k] = *q;
                let (o, tol) = orient(&sub[0], &sub[1], &sub[2], &sub[3]);
                if o < -tol {
                    t = self.nbr[t][k];
                    moved = true;
                    break;
                }
            }
            start = (start + 1) % 4;
            if !moved {
                return matches!(self.conflict(t, p), Side::In).then_some(t);
            }
        }
        None
    }

    fn insert(&mut self, p: usize) -> std::result::Result<(), BuildError> {
        let seed = match self.locate(p) {
            Some(t) => t,
            None => (0..self.tets.len())
                .find(|&t| self.alive[t] && matches!(self.conflict(t, p), Side::In))
                .ok_or_else(|| BuildError::Ambiguous(vec![p]))?,
        };

        self.stamp = self.stamp.wrapping_add(2);
        if self.stamp < 2 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 2;
        }
        let in_cavity = self.stamp;
        let outside = self.stamp + 1;
        let mut cavity = vec![seed];
        self.mark[seed] = in_cavity;
        let mut stack = vec![seed];
        while let Some(t) = stack.pop() {
            for k in 0..4 {
                let n = self.nbr[t][k];
                if self.mark[n] == in_cavity || self.mark[n] == outside {
                    continue;
                }
                match self.conflict(n, p) {
                    Side::In => {
                        self.mark[n] = in_cavity;
                        cavity.push(n);
                        stack.push(n);
                    }
                    Side::Out => self.mark[n] = outside,
                    Side::Ambiguous => {
                        let mut bad: Vec<usize> =
                            self.tets[n].iter().copied().filter(|&v| v != INF).collect();
                        bad.push(p);
                        return Err(BuildError::Ambiguous(bad));
                    }
                }
            }
        }

        let mut created = Vec::new();
        for &t in &cavity {
            for k in 0..4 {
                let n = self.nbr[t][k];
                if self.mark[n] == in_cavity {
                    continue;
                }
                let mut c = self.tets[t];
                c[k] = p;
                self.check_new(&c, p)?;
                let id = self.push(c);
                self.nbr[id][k] = n;
                let back = self.nbr[n].iter().position(|&x| x == t).expect("neighbour link");
                self.nbr[n][back] = id;
                created.push(id);
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
        }
        // Faces through p pair up among the new cells.
        let mut faces: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for &t in &created {
            for k in 0..4 {
                if self.tets[t][k] == p {
                    continue;
                }
                let key = face_key(&self.tets[t], k);
                if let Some((o, ok)) = faces.remove(&key) {
                    self.nbr[t][k] = o;
                    self.nbr[o][ok] = t;
                } else {
                    faces.insert(key, (t, k));
                }
            }
        }
        if !faces.is_empty() {
            return Err(BuildError::Ambiguous(vec![p]));
        }
        self.last = *created.last().expect("cavity has a boundary");
        Ok(())
    }

    fn check_new(&self, c: &[usize; 4], p: usize) -> std::result::Result<(), BuildError> {
        let mut sub = [Vec3::zeros(); 4];
        let ghost = c.iter().position(|&v| v == INF);
        for (j, &v) in c.iter().enumerate() {
            sub[j] = if v == INF { self.interior } else { *self.p(v) };
        }
        let (o, tol) = orient(&sub[0], &sub[1], &sub[2], &sub[3]);
        let ok = match ghost {
            Some(_) => o < -tol,
            None => o > tol,
        };
        if ok {
            Ok(())
        } else {
            let mut bad: Vec<usize> = c.iter().copied().filter(|&v| v != INF).collect();
            bad.retain(|&v| v != p);
            bad.push(p);
            Err(BuildError::Ambiguous(bad))
        }
    }
}

fn face_key(t: &[usize; 4], skip: usize) -> [usize; 3] {
    let mut f = [0; 3];
    let mut j = 0;
    for (i, &v) in t.iter().enumerate() {
        if i != skip {
            f[j] = v;
            j += 1;
        }
    }
    f.sort_unstable();
    f
}

fn initial_simplex(pts: &[Vec3], order: &[usize]) -> Option<[usize; 4]> {
    let i0 = *order.first()?;
    let a = pts[i0];
    let i1 = *order
        .iter()
        .max_by(|&&i, &&j| (pts[i] - a).norm_squared().total_cmp(&(pts[j] - a).norm_squared()))?;
    let ab = pts[i1] - a;
    if !(ab.norm_squared() > 0.0) {
        return None;
    }
    let i2 = *order.iter().max_by(|&&i, &&j| {
        ab.cross(&(pts[i] - a))
            .norm_squared()
            .total_cmp(&ab.cross(&(pts[j] - a)).norm_squared())
    })?;
    let n = ab.cross(&(pts[i2] - a));
    if !(n.norm() > 1e-12 * ab.norm_squared()) {
        return None;
    }
    let i3 = *order
        .iter()
        .max_by(|&&i, &&j| n.dot(&(pts[i] - a)).abs().total_cmp(&n.dot(&(pts[j] - a)).abs()))?;
    let (o, tol) = orient(&a, &pts[i1], &pts[i2], &pts[i3]);
    if !(o.abs() > tol) {
        return None;
    }
    Some(if o > 0.0 { [i0, i1, i2, i3] } else { [i0, i1, i3, i2] })
}

/// Median distance from each vertex to its nearest other vertex.
pub fn median_nearest_neighbor_distance(points: &[Vec3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let tree = KdTree::new(points);
    let mut d: Vec<f64> = (0..points.len())
        .map(|i| tree.nearest2_skip(&points[i], Some(i)).map_or(0.0, |(_, d2)| d2.sqrt()))
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

pub fn longest_edge(mesh: &TetMesh, cell: usize) -> f64 {
    let p = mesh.cell_points(cell);
    let mut best = 0.0_f64;
    for i in 0..4 {
        for j in i + 1..4 {
            best = best.max((p[i] - p[j]).norm());
        }
    }
    best
}

/// Removes every cell whose longest edge exceeds `factor` times the median
/// nearest-neighbour spacing of the mesh vertices, then drops orphans.
pub fn prune_oversized(mesh: &TetMesh, factor: f64) -> Result<TetMesh> {
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!("prune factor must be > 0, got {factor}")));
    }
    let threshold = factor * median_nearest_neighbor_distance(&mesh.vertices);
    let keep: Vec<usize> = (0..mesh.cells.len())
        .filter(|&c| longest_edge(mesh, c) <= threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyAfterPruning);
    }
    Ok(mesh.subset_cells(&keep))
}

/// Shape quality `6 sqrt(2) V / l_rms^3`: 1 for a regular tetrahedron, 0 for
/// a flat one.
pub fn cell_quality(mesh: &TetMesh, cell: usize) -> f64 {
    let p = mesh.cell_points(cell);
    let mut sum = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            sum += (p[i] - p[j]).norm_squared();
        }
    }
    let l_rms = (sum / 6.0).sqrt();
    if l_rms == 0.0 {
        return 0.0;
    }
    6.0 * std::f64::consts::SQRT_2 * mesh.cell_volume(cell) / l_rms.powi(3)
}

/// Removes cells whose quality is below `min_quality`, then drops orphans.
pub fn remove_slivers(mesh: &TetMesh, min_quality: f64) -> Result<TetMesh> {
    if !(min_quality >= 0.0 && min_quality < 1.0) {
        return Err(Error::InvalidArgument(format!("minimum quality must lie in [0, 1), got {min_quality}")));
    }
    let keep: Vec<usize> = (0..mesh.cells.len())
        .filter(|&c| cell_quality(mesh, c) >= min_quality)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyAfterPruning);
    }
    Ok(mesh.subset_cells(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn insphere_sign_convention() {
        let (a, b, c, d) = (v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0));
        assert!(insphere(&a, &b, &c, &d, &v(0.25, 0.25, 0.25)).0 > 0.0);
        assert!(insphere(&a, &b, &c, &d, &v(2.0, 2.0, 2.0)).0 < 0.0);
        let (s, tol) = insphere(&a, &b, &c, &d, &v(1.0, 1.0, 0.0));
        assert!(s.abs() <= tol);
    }

    #[test]
    fn circumsphere_right_corner() {
        let s = circumsphere(&v(0.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, 1.0, 0.0), &v(0.0, 0.0, 1.0))
            .unwrap();
        assert!((s.center - v(0.5, 0.5, 0.5)).norm() < 1e-15);
        assert!((s.radius - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn circumsphere_regular_tet() {
        let a = v(0.0, 0.0, 0.0);
        let b = v(1.0, 0.0, 0.0);
        let c = v(0.5, 3f64.sqrt() / 2.0, 0.0);
        let d = v(0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt());
        let s = circumsphere(&a, &b, &c, &d).unwrap();
        assert!((s.radius - (3.0f64 / 8.0).sqrt()).abs() < 1e-12);
        for p in [a, b, c, d] {
            assert!(((p - s.center).norm() - s.radius).abs() < 1e-9 * s.radius);
        }
    }

    #[test]
    fn circumsphere_coplanar_fails() {
        let r = circumsphere(&v(0.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, 1.0, 0.0), &v(1.0, 1.0, 0.0));
        assert!(matches!(r, Err(Error::DegenerateConfiguration(_))));
    }

    #[test]
    fn four_points_one_tet() {
        let pts = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)];
        let m = delaunay3d(&pts, 0).unwrap();
        assert_eq!(m.cells.len(), 1);
        m.validate().unwrap();
    }

    #[test]
    fn coplanar_input_rejected() {
        let pts: Vec<Vec3> = (0..10).map(|i| v(i as f64, (i * i) as f64 % 7.0, 0.0)).collect();
        assert!(matches!(delaunay3d(&pts, 0), Err(Error::DegenerateConfiguration(_))));
        let line: Vec<Vec3> = (0..6).map(|i| v(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(delaunay3d(&line, 0), Err(Error::DegenerateConfiguration(_))));
    }

    #[test]
    fn duplicates_are_dropped() {
        let pts = [
            v(0.0, 0.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(0.0, 1.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(0.0, 0.0, 1.0),
        ];
        let m = delaunay3d(&pts, 0).unwrap();
        assert_eq!(m.cells.len(), 1);
        assert_eq!(m.retained_map, vec![0, 1, 2, 4]);
    }

    #[test]
    fn prune_factor_to_zero_empties() {
        let pts = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)];
        let m = delaunay3d(&pts, 0).unwrap();
        assert!(matches!(prune_oversized(&m, 1e-9), Err(Error::EmptyAfterPruning)));
        assert!(prune_oversized(&m, 0.0).is_err());
    }

    #[test]
    fn prune_keeps_equilateral() {
        let a = v(0.0, 0.0, 0.0);
        let b = v(1.0, 0.0, 0.0);
        let c = v(0.5, 3f64.sqrt() / 2.0, 0.0);
        let d = v(0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt());
        let m = delaunay3d(&[a, b, c, d], 0).unwrap();
        // Every edge equals the nearest-neighbour spacing.
        let pruned = prune_oversized(&m, 1.0 + 1e-9).unwrap();
        assert_eq!(pruned, m);
    }
}
