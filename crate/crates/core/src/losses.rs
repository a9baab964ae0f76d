//! Implicit, data-fidelity and physics-informed losses and their weighted
//! combination `L_all = L_imp + a L_df + b L_pi`.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::continuum::NodalResidualField;
use crate::error::{Error, Result};
use crate::fem::DisplacementField;
use crate::geometry::TetMesh;

pub const DEFAULT_A: f64 = 1.0;
pub const DEFAULT_B: f64 = 0.1;

/// Mean of `||pred| - gt|`.
pub fn implicit_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::SizeMismatch(format!("{} predictions for {} targets", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("implicit loss over zero queries".into()));
    }
    if gt.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidArgument("distance targets must be >= 0".into()));
    }
    let s: f64 = pred.iter().zip(gt).map(|(p, g)| (p.abs() - g).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// How displacement errors are averaged over the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMode {
    /// Mean over cells of the mean vertex error in the cell.
    #[default]
    PerCell,
    /// Mean over vertices, each counted once.
    PerVertex,
}

impl std::str::FromStr for FidelityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-cell" => Ok(Self::PerCell),
            "per-vertex" => Ok(Self::PerVertex),
            _ => Err(Error::InvalidArgument(format!("fidelity mode must be per-cell|per-vertex, got '{s}'"))),
        }
    }
}

/// Per-vertex weights `w_v` such that the fidelity loss is
/// `sum_v w_v |u_v - u_hat_v|`.
pub fn fidelity_weights(mesh: &TetMesh, mode: FidelityMode) -> Vec<f64> {
    let n = mesh.num_vertices();
    match mode {
        FidelityMode::PerVertex => vec![1.0 / n as f64; n],
        FidelityMode::PerCell => {
            let mut w = vec![0.0; n];
            let per = 1.0 / (4.0 * mesh.num_cells() as f64);
            for c in &mesh.cells {
                for &v in c {
                    w[v] += per;
                }
            }
            w
        }
    }
}

pub fn data_fidelity_loss(u_hat: &DisplacementField, u: &DisplacementField, mesh: &TetMesh) -> Result<f64> {
    data_fidelity_loss_with(u_hat, u, mesh, FidelityMode::PerCell)
}

pub fn data_fidelity_loss_with(
    u_hat: &DisplacementField,
    u: &DisplacementField,
    mesh: &TetMesh,
    mode: FidelityMode,
) -> Result<f64> {
    if u_hat.len() != mesh.num_vertices() || u.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch(format!(
            "fields of {} and {} vertices on a mesh of {}",
            u_hat.len(),
            u.len(),
            mesh.num_vertices()
        )));
    }
    if mesh.num_cells() == 0 {
        return Err(Error::InvalidMesh("fidelity loss on a mesh without cells".into()));
    }
    let err: Vec<f64> = u.values.iter().zip(&u_hat.values).map(|(a, b)| (a - b).norm()).collect();
    Ok(match mode {
        FidelityMode::PerCell => {
            let s: f64 = mesh
                .cells
                .iter()
                .map(|c| c.iter().map(|&v| err[v]).sum::<f64>() / 4.0)
                .sum();
            s / mesh.num_cells() as f64
        }
        FidelityMode::PerVertex => err.iter().sum::<f64>() / err.len() as f64,
    })
}

/// Mean residual norm over free vertices.
pub fn physics_informed_loss(residuals: &NodalResidualField) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("physics loss over an empty residual field".into()));
    }
    Ok(residuals.values.iter().map(|r| r.norm()).sum::<f64>() / residuals.len() as f64)
}

fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    // 17 significant digits round-trip every f64.
    let v: serde_json::Number = format!("{x:.16e}").parse().map_err(serde::ser::Error::custom)?;
    v.serialize(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCounts {
    /// Number of samples.
    pub samples: usize,
    /// Queries per sample (total when aggregated).
    pub queries: usize,
    pub cells: usize,
    pub free_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(rename = "L_imp", serialize_with = "ser_f64")]
    pub l_imp: f64,
    #[serde(rename = "L_df", serialize_with = "ser_f64")]
    pub l_df: f64,
    #[serde(rename = "L_pi", serialize_with = "ser_f64")]
    pub l_pi: f64,
    #[serde(rename = "L_all", serialize_with = "ser_f64")]
    pub l_all: f64,
    /// Weight of `L_imp`; zero in physics-only runs.
    #[serde(default = "one", serialize_with = "ser_f64")]
    pub w_imp: f64,
    #[serde(serialize_with = "ser_f64")]
    pub a: f64,
    #[serde(serialize_with = "ser_f64")]
    pub b: f64,
    pub counts: LossCounts,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
}

fn one() -> f64 {
    1.0
}

/// `L_imp + a L_df + b L_pi` with the weights recorded.
pub fn total_loss(limp: f64, ldf: f64, lpi: f64, a: f64, b: f64) -> Result<LossReport> {
    total_loss_weighted(1.0, limp, ldf, lpi, a, b)
}

/// `w_imp L_imp + a L_df + b L_pi`.
pub fn total_loss_weighted(w_imp: f64, limp: f64, ldf: f64, lpi: f64, a: f64, b: f64) -> Result<LossReport> {
    for (name, v) in [("L_imp", limp), ("L_df", ldf), ("L_pi", lpi), ("w_imp", w_imp), ("a", a), ("b", b)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(LossReport {
        l_imp: limp,
        l_df: ldf,
        l_pi: lpi,
        l_all: w_imp * limp + a * ldf + b * lpi,
        w_imp,
        a,
        b,
        counts: LossCounts::default(),
        config_hash: String::new(),
        epoch: None,
    })
}

/// Hex SHA-256 of a serialized configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl LossReport {
    pub fn with_counts(mut self, counts: LossCounts) -> Self {
        self.counts = counts;
        self
    }

    pub fn with_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
