//! Deformation gradient, small strain, Hooke stress and the weak-form nodal
//! equilibrium residual on linear tetrahedra.
//!
//! Stress is constant per cell, so its pointwise divergence vanishes; the
//! residual is the internal-minus-external nodal force imbalance instead.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::fem::{read_field_bytes, write_field_bytes, DisplacementField, MaterialForceSpec};
use crate::geometry::{TetMesh, Vec3};

pub const DET_FLOOR: f64 = 1e-14;

/// One 3x3 tensor per mesh cell.
pub type PerCellTensor = Vec<Matrix3<f64>>;

/// `[x2 - x1 | x3 - x1 | x4 - x1]`.
pub fn shape_matrix(x: &[Vec3; 4]) -> Matrix3<f64> {
    Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]])
}

/// `F = Xp X^-1`.
pub fn deformation_gradient(x: &Matrix3<f64>, xp: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let det = x.determinant();
    if !(det.abs() > DET_FLOOR) {
        return Err(Error::DegenerateElement { cell: 0, volume: det / 6.0 });
    }
    let inv = x.try_inverse().ok_or(Error::DegenerateElement { cell: 0, volume: det / 6.0 })?;
    Ok(xp * inv)
}

/// Linearized strain `(F + F^T) / 2 - I`.
pub fn strain(f: &Matrix3<f64>) -> Matrix3<f64> {
    (f + f.transpose()) * 0.5 - Matrix3::identity()
}

/// Hooke's law `lambda tr(eps) I + 2 mu eps`.
pub fn stress(eps: &Matrix3<f64>, lambda: f64, mu: f64) -> Result<Matrix3<f64>> {
    let scale = eps.abs().max().max(1.0);
    if (eps - eps.transpose()).abs().max() > 1e-10 * scale {
        return Err(Error::InvalidArgument("strain tensor is not symmetric".into()));
    }
    Ok(Matrix3::identity() * (lambda * eps.trace()) + eps * (2.0 * mu))
}

fn check_field(mesh: &TetMesh, u: &DisplacementField) -> Result<()> {
    if u.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch(format!(
            "displacement field has {} vertices, mesh has {}",
            u.len(),
            mesh.num_vertices()
        )));
    }
    Ok(())
}

/// Per-cell deformation gradients, strains and stresses.
pub fn cell_tensors(
    mesh: &TetMesh,
    u: &DisplacementField,
    lambda: f64,
    mu: f64,
) -> Result<(PerCellTensor, PerCellTensor, PerCellTensor)> {
    check_field(mesh, u)?;
    let mut fs = Vec::with_capacity(mesh.num_cells());
    let mut es = Vec::with_capacity(mesh.num_cells());
    let mut ss = Vec::with_capacity(mesh.num_cells());
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let x = mesh.cell_points(ci);
        let xd = [0, 1, 2, 3].map(|k| x[k] + u.values[cell[k]]);
        let f = deformation_gradient(&shape_matrix(&x), &shape_matrix(&xd)).map_err(|e| cell_err(e, ci))?;
        let e = strain(&f);
        ss.push(stress(&e, lambda, mu)?);
        fs.push(f);
        es.push(e);
    }
    Ok((fs, es, ss))
}

fn cell_err(e: Error, cell: usize) -> Error {
    match e {
        Error::DegenerateElement { volume, .. } => Error::DegenerateElement { cell, volume },
        other => other,
    }
}

/// Internal nodal forces `V sigma grad(N_a)` summed over incident cells, for
/// every mesh vertex. Linear in `u`, equal to `K u`.
pub fn internal_forces(mesh: &TetMesh, u: &DisplacementField, lambda: f64, mu: f64) -> Result<Vec<Vec3>> {
    check_field(mesh, u)?;
    let mut out = vec![Vec3::zeros(); mesh.num_vertices()];
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let x = mesh.cell_points(ci);
        let xm = shape_matrix(&x);
        let det = xm.determinant();
        let volume = det / 6.0;
        if !(volume > DET_FLOOR) {
            return Err(Error::DegenerateElement { cell: ci, volume });
        }
        let inv = xm.try_inverse().ok_or(Error::DegenerateElement { cell: ci, volume })?;
        let xd = shape_matrix(&[0, 1, 2, 3].map(|k| x[k] + u.values[cell[k]]));
        let sigma = stress(&strain(&(xd * inv)), lambda, mu)?;
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        let grads = [-(g1 + g2 + g3), g1, g2, g3];
        for (k, g) in grads.iter().enumerate() {
            out[cell[k]] += sigma * g * volume;
        }
    }
    Ok(out)
}

/// Residual forces on the free (non-Dirichlet) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalResidualField {
    /// Mesh vertex index of each entry, ascending.
    pub vertices: Vec<usize>,
    pub values: Vec<Vec3>,
}

impl NodalResidualField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Euclidean norm over all components.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }

    /// Writes the residual vectors in the `EPFIELD1` layout.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, write_field_bytes(&self.values)).map_err(|e| Error::io(path, e))
    }

    /// Reads residual vectors; vertex ids are not stored and come back as
    /// `0..n`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let values = read_field_bytes(&bytes).map_err(|m| Error::format(path, m))?;
        Ok(Self {
            vertices: (0..values.len()).collect(),
            values,
        })
    }
}

/// Mesh vertices that are not clamped, ascending.
pub fn free_vertices(mesh: &TetMesh, mat: &MaterialForceSpec) -> Vec<usize> {
    let fixed: BTreeSet<usize> = mat.force.fixed_vertices.iter().copied().collect();
    (0..mesh.num_vertices()).filter(|v| !fixed.contains(v)).collect()
}

/// External nodal loads per vertex.
pub fn external_forces(num_vertices: usize, mat: &MaterialForceSpec) -> Vec<Vec3> {
    let mut f = vec![Vec3::zeros(); num_vertices];
    let per = mat.force.force() / mat.force.loaded_vertices.len() as f64;
    for &v in &mat.force.loaded_vertices {
        f[v] += per;
    }
    f
}

/// Internal minus external force at every free vertex.
pub fn nodal_equilibrium_residual(
    mesh: &TetMesh,
    u: &DisplacementField,
    mat: &MaterialForceSpec,
) -> Result<NodalResidualField> {
    mat.validate(mesh.num_vertices())?;
    let internal = internal_forces(mesh, u, mat.lambda, mat.mu)?;
    let external = external_forces(mesh.num_vertices(), mat);
    let vertices = free_vertices(mesh, mat);
    let values = vertices.iter().map(|&v| internal[v] - external[v]).collect();
    Ok(NodalResidualField { vertices, values })
}

/// Gradient of `mean_i |r_i|` over free vertices with respect to `u`.
///
/// The residual is `K u - f` on free rows, so the gradient is
/// `K^T g = K g` with `g_i = r_i / (|r_i| * count)` on free vertices and zero
/// on fixed ones. Zero residuals contribute a zero subgradient.
pub fn physics_loss_gradient(
    mesh: &TetMesh,
    residual: &NodalResidualField,
    mat: &MaterialForceSpec,
) -> Result<DisplacementField> {
    if residual.is_empty() {
        return Err(Error::InvalidArgument("empty residual field".into()));
    }
    let count = residual.len() as f64;
    let mut g = DisplacementField::zeros(mesh.num_vertices());
    for (&v, r) in residual.vertices.iter().zip(&residual.values) {
        let n = r.norm();
        if n > 0.0 {
            g.values[v] = r / (n * count);
        }
    }
    let values = internal_forces(mesh, &g, mat.lambda, mat.mu)?;
    Ok(DisplacementField { values })
}
