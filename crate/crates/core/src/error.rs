use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate cloud: {0} points, at least 4 required")]
    DegenerateCloud(usize),

    #[error("zero-extent cloud: all points coincide")]
    ZeroExtent,

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("unresolved geometric predicate after {retries} jitter retries, offending points {points:?}")]
    UnresolvedPredicate { retries: usize, points: Vec<usize> },

    #[error("degenerate element {cell}: volume {volume:e}")]
    DegenerateElement { cell: usize, volume: f64 },

    #[error("empty mesh after pruning")]
    EmptyAfterPruning,

    #[error("force bands overlap ({0}); use a smaller band_fraction")]
    BandOverlap(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("indefinite system: non-positive curvature {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing dataset artifacts: {0:?}")]
    MissingArtifacts(Vec<PathBuf>),

    #[error("pipeline failure: {0}")]
    Pipeline(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
