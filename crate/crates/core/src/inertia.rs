//! Load case from the principal axes of inertia.
//!
//! The object is compressed along its longest extent (the axis of smallest
//! moment of inertia): vertices in the top band along that axis carry the
//! load, vertices in the bottom band are clamped.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, TetMesh, Vec3};

pub const DEFAULT_BAND_FRACTION: f64 = 0.05;
/// Relative tolerance for equal projections onto the load axis.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Unit-mass inertia tensor `sum(|r|^2 I - r r^T)` about the centroid.
pub fn inertia_matrix(points: &[Vec3]) -> Result<Matrix3<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("inertia of an empty point set".into()));
    }
    let c = centroid(points);
    let mut m = Matrix3::zeros();
    for p in points {
        let r = p - c;
        m += Matrix3::identity() * r.norm_squared() - r * r.transpose();
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxis {
    pub moment: f64,
    pub axis: Vec3,
}

/// Eigenpairs of a symmetric 3x3 matrix in ascending order. Each axis is
/// signed so its largest-magnitude component is positive.
pub fn principal_axes(m: &Matrix3<f64>) -> Result<[PrincipalAxis; 3]> {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).abs().max() > 1e-10 * scale {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(*m);
    let mut pairs: Vec<(f64, Vec3)> = (0..3)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = [PrincipalAxis {
        moment: 0.0,
        axis: Vec3::zeros(),
    }; 3];
    for (slot, (moment, v)) in out.iter_mut().zip(pairs) {
        let v = v.normalize();
        let k = v.iamax();
        let v = if v[k] < 0.0 { -v } else { v };
        *slot = PrincipalAxis { moment, axis: v };
    }
    Ok(out)
}

/// Which principal axis the load acts along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AxisChoice {
    /// Smallest moment of inertia, i.e. the longest extent.
    #[default]
    Auto,
    /// Axis by ascending-moment index 0, 1 or 2.
    Index(usize),
}

impl std::str::FromStr for AxisChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(AxisChoice::Auto),
            "0" | "1" | "2" => Ok(AxisChoice::Index(s.parse().unwrap())),
            _ => Err(Error::InvalidArgument(format!("force axis must be auto|0|1|2, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSpec {
    pub direction: [f64; 3],
    pub magnitude: f64,
    pub loaded_vertices: Vec<usize>,
    pub fixed_vertices: Vec<usize>,
}

impl ForceSpec {
    pub fn direction(&self) -> Vec3 {
        Vec3::from(self.direction)
    }

    /// Total force vector, `magnitude * direction`.
    pub fn force(&self) -> Vec3 {
        self.direction() * self.magnitude
    }

    pub fn validate(&self, num_vertices: usize) -> Result<()> {
        if (self.direction().norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("force direction is not a unit vector".into()));
        }
        if !(self.magnitude > 0.0) || !self.magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "force magnitude must be positive, got {}",
                self.magnitude
            )));
        }
        if self.loaded_vertices.is_empty() || self.fixed_vertices.is_empty() {
            return Err(Error::InvalidArgument("loaded and fixed sets must be non-empty".into()));
        }
        let fixed: BTreeSet<_> = self.fixed_vertices.iter().collect();
        for v in self.loaded_vertices.iter().chain(&self.fixed_vertices) {
            if *v >= num_vertices {
                return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
            }
        }
        if self.loaded_vertices.iter().any(|v| fixed.contains(v)) {
            return Err(Error::BandOverlap("loaded and fixed sets intersect".into()));
        }
        Ok(())
    }
}

/// Loads the top `band_fraction` of vertices along the chosen principal axis
/// towards the bottom band, which is clamped.
///
/// A band holds every vertex whose projection reaches the value of the
/// `floor(band_fraction * n) + 1`-th extreme vertex, so ties are kept
/// together and the sets do not depend on vertex order.
pub fn make_force_spec(
    mesh: &TetMesh,
    magnitude: f64,
    band_fraction: f64,
    axis: AxisChoice,
) -> Result<ForceSpec> {
    let n = mesh.num_vertices();
    if n == 0 || mesh.num_cells() == 0 {
        return Err(Error::InvalidMesh("empty mesh".into()));
    }
    if !(magnitude > 0.0) || !magnitude.is_finite() {
        return Err(Error::InvalidArgument(format!("force magnitude must be > 0, got {magnitude}")));
    }
    if !(band_fraction > 0.0 && band_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "band_fraction must lie in (0, 0.5), got {band_fraction}"
        )));
    }
    let axes = principal_axes(&inertia_matrix(&mesh.vertices)?)?;
    let k = match axis {
        AxisChoice::Auto => 0,
        AxisChoice::Index(i) if i < 3 => i,
        AxisChoice::Index(i) => {
            return Err(Error::InvalidArgument(format!("axis index {i} out of range")))
        }
    };
    let v = axes[k].axis;
    let proj: Vec<f64> = mesh.vertices.iter().map(|p| p.dot(&v)).collect();
    let mut sorted = proj.clone();
    sorted.sort_by(f64::total_cmp);
    let count = ((band_fraction * n as f64).floor() as usize + 1).min(n);
    // Projections within a tiny fraction of the extent count as ties, so
    // round-off in the axis does not split a layer of vertices.
    let tie = TIE_TOLERANCE * (sorted[n - 1] - sorted[0]);
    let top_threshold = sorted[n - count] - tie;
    let mut bottom_threshold = sorted[count - 1] + tie;
    let loaded: Vec<usize> = (0..n).filter(|&i| proj[i] >= top_threshold).collect();
    let mut fixed: Vec<usize> = (0..n).filter(|&i| proj[i] <= bottom_threshold).collect();
    // A clamp on fewer than three non-collinear vertices leaves rigid
    // rotations free; grow the band one tie layer at a time until it holds.
    let scale = (sorted[n - 1] - sorted[0]).max(f64::MIN_POSITIVE);
    while !spans_plane(&mesh.vertices, &fixed, scale) {
        match sorted.iter().find(|&&p| p > bottom_threshold) {
            Some(&next) if next + tie < top_threshold => {
                bottom_threshold = next + tie;
                fixed = (0..n).filter(|&i| proj[i] <= bottom_threshold).collect();
            }
            _ => {
                bottom_threshold = top_threshold;
                break;
            }
        }
    }
    if top_threshold <= bottom_threshold {
        return Err(Error::BandOverlap(format!(
            "band_fraction {band_fraction} selects {} loaded and {} fixed of {n} vertices",
            loaded.len(),
            fixed.len()
        )));
    }
    let spec = ForceSpec {
        direction: (-v).into(),
        magnitude,
        loaded_vertices: loaded,
        fixed_vertices: fixed,
    };
    spec.validate(n)?;
    Ok(spec)
}

/// True when the vertices contain three points that are not collinear.
fn spans_plane(vertices: &[Vec3], idx: &[usize], scale: f64) -> bool {
    let Some(&first) = idx.first() else {
        return false;
    };
    let p0 = vertices[first];
    let far = idx
        .iter()
        .map(|&i| vertices[i])
        .max_by(|a, b| (a - p0).norm_squared().total_cmp(&(b - p0).norm_squared()))
        .unwrap();
    let dir = far - p0;
    let len = dir.norm();
    if len <= TIE_TOLERANCE * scale {
        return false;
    }
    let dir = dir / len;
    idx.iter().any(|&i| {
        let r = vertices[i] - p0;
        (r - dir * r.dot(&dir)).norm() > TIE_TOLERANCE * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_pair_inertia() {
        let pts = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        let m = inertia_matrix(&pts).unwrap();
        assert_eq!(m, Matrix3::from_diagonal(&Vec3::new(0.0, 2.0, 2.0)));
        let axes = principal_axes(&m).unwrap();
        assert!(axes[0].moment.abs() < 1e-15);
        assert!((axes[0].axis - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn diagonal_matrix_axes() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
        let axes = principal_axes(&m).unwrap();
        let expected = [Vec3::x(), Vec3::y(), Vec3::z()];
        for (i, a) in axes.iter().enumerate() {
            assert!((a.moment - (i + 1) as f64).abs() < 1e-12);
            assert!((a.axis - expected[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_any_orthonormal_triple() {
        let axes = principal_axes(&Matrix3::identity()).unwrap();
        for a in &axes {
            assert!((a.axis - a.axis * a.moment).norm() < 1e-8);
            assert!((a.axis.norm() - 1.0).abs() < 1e-12);
        }
        assert!(axes[0].axis.dot(&axes[1].axis).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.5;
        assert!(principal_axes(&m).is_err());
    }

    #[test]
    fn empty_rejected() {
        assert!(inertia_matrix(&[]).is_err());
    }

    #[test]
    fn box_grid_has_no_products_of_inertia() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..5 {
                    pts.push(Vec3::new(i as f64 * 0.7, j as f64 * 1.3, k as f64 * 0.2));
                }
            }
        }
        let m = inertia_matrix(&pts).unwrap();
        for (r, c) in [(0, 1), (0, 2), (1, 2)] {
            assert!(m[(r, c)].abs() < 1e-10);
        }
        let eig = SymmetricEigen::new(m);
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn axis_choice_parses() {
        assert_eq!("auto".parse::<AxisChoice>().unwrap(), AxisChoice::Auto);
        assert_eq!("2".parse::<AxisChoice>().unwrap(), AxisChoice::Index(2));
        assert!("3".parse::<AxisChoice>().is_err());
    }

    #[test]
    fn single_tet_clamps_three_vertices() {
        let mesh = TetMesh::from_points(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.1),
                Vec3::new(0.0, 1.0, 0.2),
                Vec3::new(0.1, 0.2, 3.0),
            ],
            vec![[0, 1, 2, 3]],
        );
        let spec = make_force_spec(&mesh, 1.0, 0.05, AxisChoice::Auto).unwrap();
        assert_eq!(spec.loaded_vertices, vec![3]);
        assert_eq!(spec.fixed_vertices, vec![0, 1, 2]);
    }

    #[test]
    fn collinear_mesh_cannot_be_clamped() {
        let mesh = TetMesh::from_points(
            (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(),
            vec![[0, 1, 2, 3]],
        );
        assert!(matches!(
            make_force_spec(&mesh, 1.0, 0.05, AxisChoice::Auto),
            Err(Error::BandOverlap(_))
        ));
    }
}
