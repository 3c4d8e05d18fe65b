use std::path::PathBuf;

use crate::geometry::BoundaryTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("coordinate x = {x} lies outside the channel extent [{x_min}, {x_max}]")]
    OutsideDomain { x: f64, x_min: f64, x_max: f64 },

    #[error("wall projection did not converge (residual {residual:e})")]
    Projection { residual: f64 },

    #[error("mesh quality {achieved:.4} below required {required:.2} after {iterations} iterations")]
    MeshQuality {
        achieved: f64,
        required: f64,
        iterations: usize,
    },

    #[error("meshing failed: {0}")]
    Meshing(String),

    #[error("element {element} has a non-positive Jacobian ({det:e}) after curving")]
    InvertedElement { element: usize, det: f64 },

    #[error("boundary face of element {element} carries tag {tag:?} but could not be resolved")]
    BoundaryFace { element: usize, tag: BoundaryTag },

    #[error("point ({x}, {y}) could not be located in the mesh")]
    PointLocation { x: f64, y: f64 },

    #[error("Newton iteration diverged at continuation stage {stage} (theta = {theta}), last residual {residual:e}")]
    NewtonDivergence {
        stage: usize,
        theta: f64,
        residual: f64,
    },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("voxel {voxel} has a degenerate point-spread normalization ({integral:e})")]
    Normalization { voxel: usize, integral: f64 },

    #[error("bilinear reconstruction undefined at ({x}, {y}): all surrounding voxels are masked")]
    Reconstruction { x: f64, y: f64 },

    #[error("wall probe {probe} at ({x}, {y}) is outside the reconstructible region")]
    Probe { probe: usize, x: f64, y: f64 },

    #[error("relative error undefined: reference profile has zero norm")]
    UndefinedMetric,

    #[error("profiles are not sampled on a common arc-length grid")]
    ProfileMismatch,

    /// A shared computation this one depends on failed.
    #[error("upstream failure: {0}")]
    Upstream(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
