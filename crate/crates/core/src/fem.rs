//! Static linear elasticity on 4-node tetrahedra.
//!
//! Stiffness is assembled into a compressed sparse row matrix; Dirichlet
//! constraints are eliminated (the constrained rows and columns are removed
//! from the solve and their prescribed values moved to the right-hand side),
//! and the free block is solved with Jacobi-preconditioned conjugate
//! gradients.

use std::fs;
use std::path::Path;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TetMesh, Vec3};
use crate::inertia::ForceSpec;

/// Cells with volume at or below this are rejected.
pub const VOLUME_FLOOR: f64 = 1e-14;
pub const DEFAULT_TOL: f64 = 1e-8;

pub type Matrix12 = SMatrix<f64, 12, 12>;
type Matrix6x12 = SMatrix<f64, 6, 12>;
type Matrix6 = SMatrix<f64, 6, 6>;

/// Lamé constants from Young's modulus and Poisson's ratio.
pub fn lame_from_e_nu(e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidMaterial(format!("elastic modulus must be > 0, got {e}")));
    }
    if nu >= 0.5 {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio {nu} is at or beyond the incompressible limit 0.5"
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidMaterial(format!("Poisson ratio must be > 0, got {nu}")));
    }
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    Ok((lambda, mu))
}

/// Material constants together with the load case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialForceSpec {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    pub lambda: f64,
    pub mu: f64,
    pub force: ForceSpec,
}

impl MaterialForceSpec {
    pub fn new(e: f64, nu: f64, force: ForceSpec) -> Result<Self> {
        let (lambda, mu) = lame_from_e_nu(e, nu)?;
        Ok(Self {
            e,
            nu,
            lambda,
            mu,
            force,
        })
    }

    pub fn validate(&self, num_vertices: usize) -> Result<()> {
        let (lambda, mu) = lame_from_e_nu(self.e, self.nu)?;
        if (lambda - self.lambda).abs() > 1e-12 * lambda.abs()
            || (mu - self.mu).abs() > 1e-12 * mu.abs()
        {
            return Err(Error::InvalidMaterial(
                "Lamé constants inconsistent with E and nu".into(),
            ));
        }
        self.force.validate(num_vertices)
    }

    /// Deformation parameters `(lambda, mu, E, nu, f_x, f_y, f_z)`.
    pub fn deformation_params(&self) -> [f64; 7] {
        let f = self.force.force();
        [self.lambda, self.mu, self.e, self.nu, f.x, f.y, f.z]
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let s = serde_json::to_string_pretty(self)?;
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Gradients of the four linear shape functions and the cell volume.
pub fn shape_gradients(x: &[Vec3; 4]) -> Result<([Vec3; 4], f64)> {
    let m = nalgebra::Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
    let volume = m.determinant() / 6.0;
    if !(volume > VOLUME_FLOOR) {
        return Err(Error::DegenerateElement { cell: 0, volume });
    }
    let inv = m.try_inverse().ok_or(Error::DegenerateElement { cell: 0, volume })?;
    // Rows of the inverse are the gradients of the barycentric coordinates.
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Ok(([-(g1 + g2 + g3), g1, g2, g3], volume))
}

fn strain_displacement(grads: &[Vec3; 4]) -> Matrix6x12 {
    let mut b = Matrix6x12::zeros();
    for (a, g) in grads.iter().enumerate() {
        let c = 3 * a;
        b[(0, c)] = g.x;
        b[(1, c + 1)] = g.y;
        b[(2, c + 2)] = g.z;
        b[(3, c)] = g.y;
        b[(3, c + 1)] = g.x;
        b[(4, c + 1)] = g.z;
        b[(4, c + 2)] = g.y;
        b[(5, c)] = g.z;
        b[(5, c + 2)] = g.x;
    }
    b
}

/// Isotropic elasticity in Voigt form with engineering shear strains.
pub fn elasticity_matrix(lambda: f64, mu: f64) -> Matrix6 {
    let mut d = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

/// `V * B^T D B` for one linear tetrahedron; DOFs ordered node-major.
pub fn element_stiffness(x: &[Vec3; 4], lambda: f64, mu: f64) -> Result<Matrix12> {
    let (grads, volume) = shape_gradients(x)?;
    let b = strain_displacement(&grads);
    Ok(b.transpose() * elasticity_matrix(lambda, mu) * b * volume)
}

/// Symmetric matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets; duplicates are summed in insertion order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the per-entry summation order fixed.
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Largest `|K_ij - K_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

/// Assembled stiffness, load vector and Dirichlet constraints.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub constrained: Vec<bool>,
    /// Prescribed values on constrained DOFs (ignored elsewhere).
    pub prescribed: Vec<f64>,
}

impl SparseSystem {
    /// System without constraints.
    pub fn new(k: CsrMatrix, f: Vec<f64>) -> Self {
        let n = f.len();
        Self {
            k,
            f,
            constrained: vec![false; n],
            prescribed: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn num_free(&self) -> usize {
        self.constrained.iter().filter(|c| !**c).count()
    }

    /// Fixes vertex `v` to the given displacement.
    pub fn prescribe(&mut self, v: usize, value: Vec3) {
        for d in 0..3 {
            self.constrained[3 * v + d] = true;
            self.prescribed[3 * v + d] = value[d];
        }
    }

    /// `K u - f` over all DOFs; entries on constrained DOFs are the reactions.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.k.mul_vec(u);
        for (ri, fi) in r.iter_mut().zip(&self.f) {
            *ri -= fi;
        }
        r
    }

    /// `||K u - f||` over free DOFs divided by the norm of the effective
    /// free right-hand side `f - K u_c`.
    pub fn relative_residual(&self, u: &[f64]) -> f64 {
        let r = self.residual(u);
        let rn = free_norm(&r, &self.constrained);
        let bn = free_norm(&self.effective_rhs(), &self.constrained);
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }

    fn effective_rhs(&self) -> Vec<f64> {
        let uc: Vec<f64> = self
            .prescribed
            .iter()
            .zip(&self.constrained)
            .map(|(v, &c)| if c { *v } else { 0.0 })
            .collect();
        let kuc = self.k.mul_vec(&uc);
        self.f.iter().zip(kuc).map(|(f, k)| f - k).collect()
    }
}

fn free_norm(v: &[f64], constrained: &[bool]) -> f64 {
    v.iter()
        .zip(constrained)
        .filter(|(_, &c)| !c)
        .map(|(x, _)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Scatter-adds element stiffness matrices into global triplets.
pub fn assemble_stiffness(mesh: &TetMesh, lambda: f64, mu: f64) -> Result<CsrMatrix> {
    let mut triplets = Vec::with_capacity(mesh.num_cells() * 144);
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let x = mesh.cell_points(ci);
        let ke = element_stiffness(&x, lambda, mu).map_err(|e| match e {
            Error::DegenerateElement { volume, .. } => Error::DegenerateElement { cell: ci, volume },
            other => other,
        })?;
        for a in 0..4 {
            for b in 0..4 {
                for i in 0..3 {
                    for j in 0..3 {
                        triplets.push((3 * cell[a] + i, 3 * cell[b] + j, ke[(3 * a + i, 3 * b + j)]));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(3 * mesh.num_vertices(), triplets))
}

/// Nodal load vector: the total force split evenly over the loaded vertices.
pub fn load_vector(num_vertices: usize, force: &ForceSpec) -> Vec<f64> {
    let mut f = vec![0.0; 3 * num_vertices];
    let per = force.force() / force.loaded_vertices.len() as f64;
    for &v in &force.loaded_vertices {
        for d in 0..3 {
            f[3 * v + d] += per[d];
        }
    }
    f
}

pub fn assemble(mesh: &TetMesh, mat: &MaterialForceSpec) -> Result<SparseSystem> {
    if mat.force.loaded_vertices.is_empty() || mat.force.fixed_vertices.is_empty() {
        return Err(Error::InvalidArgument("loaded and fixed vertex sets must be non-empty".into()));
    }
    mat.validate(mesh.num_vertices())?;
    let k = assemble_stiffness(mesh, mat.lambda, mat.mu)?;
    let n = 3 * mesh.num_vertices();
    let mut sys = SparseSystem {
        k,
        f: load_vector(mesh.num_vertices(), &mat.force),
        constrained: vec![false; n],
        prescribed: vec![0.0; n],
    };
    for &v in &mat.force.fixed_vertices {
        sys.prescribe(v, Vec3::zeros());
    }
    Ok(sys)
}

/// Per-vertex displacement vectors, ordered like the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub values: Vec<Vec3>,
}

pub const FIELD_MAGIC: &[u8; 8] = b"EPFIELD1";

impl DisplacementField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Vec3::zeros(); n],
        }
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            values: flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `EPFIELD1` magic, little-endian u64 vertex count, then 3 f64 per vertex.
    pub fn to_bytes(&self) -> Vec<u8> {
        write_field_bytes(&self.values)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        read_field_bytes(bytes).map(|values| Self { values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }
}

pub(crate) fn write_field_bytes(values: &[Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 24 * values.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub(crate) fn read_field_bytes(bytes: &[u8]) -> std::result::Result<Vec<Vec3>, String> {
    if bytes.len() < 16 || &bytes[..8] != FIELD_MAGIC {
        return Err("missing EPFIELD1 header".into());
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != 24 * n {
        return Err(format!("expected {} payload bytes for {n} vertices, found {}", 24 * n, body.len()));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(vals.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn default_max_iter(system: &SparseSystem) -> usize {
    20 * system.num_free().max(1)
}

/// Solves `K u = f` on the free DOFs to relative residual `tol`.
pub fn solve_displacement(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<DisplacementField> {
    solve_with_stats(system, tol, max_iter).map(|(u, _)| u)
}

pub fn solve_with_stats(
    system: &SparseSystem,
    tol: f64,
    max_iter: usize,
) -> Result<(DisplacementField, SolveStats)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let n = system.dim();
    let free = |i: usize| !system.constrained[i];
    let mut u: Vec<f64> = (0..n)
        .map(|i| if free(i) { 0.0 } else { system.prescribed[i] })
        .collect();
    let b = system.effective_rhs();
    let bnorm = free_norm(&b, &system.constrained);
    if bnorm == 0.0 {
        return Ok((
            DisplacementField::from_flat(&u),
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let diag = system.k.diagonal();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| if free(i) && diag[i] > 0.0 { 1.0 / diag[i] } else { 0.0 })
        .collect();

    let mask = |v: &mut [f64]| {
        for (i, x) in v.iter_mut().enumerate() {
            if !free(i) {
                *x = 0.0;
            }
        }
    };
    // Free-block operator: K restricted to free rows and columns.
    let apply = |x: &[f64], y: &mut [f64]| {
        system.k.mul_vec_into(x, y);
        mask(y);
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut x = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    loop {
        // (Re)start from the true residual of the current iterate.
        apply(&x, &mut ap);
        let mut r: Vec<f64> = (0..n).map(|i| if free(i) { b[i] - ap[i] } else { 0.0 }).collect();
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            for i in 0..n {
                if free(i) {
                    u[i] = x[i];
                }
            }
            return Ok((
                DisplacementField::from_flat(&u),
                SolveStats {
                    iterations,
                    relative_residual: rel,
                },
            ));
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            apply(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::Indefinite {
                    iteration: iterations,
                    curvature,
                });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if dot(&r, &r).sqrt() <= 0.5 * tol * bnorm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Reaction forces on constrained DOFs (`K u - f` there), zero elsewhere.
pub fn reactions(system: &SparseSystem, u: &DisplacementField) -> Vec<f64> {
    let mut r = system.residual(&u.to_flat());
    for (ri, &c) in r.iter_mut().zip(&system.constrained) {
        if !c {
            *ri = 0.0;
        }
    }
    r
}

/// Element DOF vector of a cell from a flat global vector.
pub fn gather_cell(cell: &[usize; 4], u: &[f64]) -> SVector<f64, 12> {
    SVector::<f64, 12>::from_fn(|k, _| u[3 * cell[k / 3] + k % 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right_corner() -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    #[test]
    fn lame_reference_values() {
        let (l, m) = lame_from_e_nu(1.0, 0.25).unwrap();
        assert!((l - 0.4).abs() < 1e-15 && (m - 0.4).abs() < 1e-15);
        let (l2, m2) = lame_from_e_nu(2.0, 0.25).unwrap();
        assert!((l2 - 2.0 * l).abs() <= 1e-12 * l && (m2 - 2.0 * m).abs() <= 1e-12 * m);
        assert!(lame_from_e_nu(1.0, 0.5).is_err());
        assert!(lame_from_e_nu(1.0, 0.0).is_err());
        assert!(lame_from_e_nu(0.0, 0.3).is_err());
    }

    #[test]
    fn element_rigid_translations_in_nullspace() {
        let x = [
            Vec3::new(0.1, 0.0, 0.2),
            Vec3::new(1.3, 0.2, 0.1),
            Vec3::new(0.2, 0.9, -0.1),
            Vec3::new(0.4, 0.3, 1.1),
        ];
        let k = element_stiffness(&x, 0.7, 0.3).unwrap();
        assert!((k - k.transpose()).abs().max() < 1e-14);
        for d in 0..3 {
            let t = SVector::<f64, 12>::from_fn(|i, _| if i % 3 == d { 1.0 } else { 0.0 });
            assert!((k * t).abs().max() < 1e-10);
        }
    }

    #[test]
    fn element_scales_linearly_with_size() {
        let x = right_corner();
        let k1 = element_stiffness(&x, 0.4, 0.4).unwrap();
        let xs = x.map(|p| p * 3.0);
        let k3 = element_stiffness(&xs, 0.4, 0.4).unwrap();
        assert!((k3 - k1 * 3.0).abs().max() < 1e-12);
    }

    #[test]
    fn degenerate_element_rejected() {
        let x = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        assert!(matches!(element_stiffness(&x, 1.0, 1.0), Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn field_bytes_roundtrip_and_reject() {
        let f = DisplacementField {
            values: vec![Vec3::new(1.0, -2.5, 1e-300), Vec3::new(f64::MAX, 0.0, -0.0)],
        };
        let b = f.to_bytes();
        assert_eq!(&b[..8], b"EPFIELD1");
        assert_eq!(DisplacementField::from_bytes(&b).unwrap(), f);
        assert!(DisplacementField::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(DisplacementField::from_bytes(b"EPFIELD0\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn csr_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![6.0, 2.0]);
        assert_eq!(m.asymmetry(), 0.0);
    }
}
