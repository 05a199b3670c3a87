//! Error type shared by every operation in the crate.

use thiserror::Error;

/// Everything that can go wrong while evaluating metrics, integrating
/// sprays, or running the connector.
#[derive(Debug, Clone, Error)]
pub enum FinslerError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside chart bounds: coordinate {index} = {value}")]
    PointOutsideChart { index: usize, value: f64 },

    #[error("zero-section derivative: energy derivatives are undefined at y = 0")]
    ZeroSectionDerivative,

    #[error("convexity violation: fundamental tensor has minimum eigenvalue {min_eigenvalue:e}")]
    ConvexityViolation { min_eigenvalue: f64 },

    #[error("randers positivity violation: |b|_a = {norm} at a sampled point (must be < 1)")]
    RandersPositivity { norm: f64 },

    #[error(
        "matrix field is not positive definite at a sampled point (eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("newton solve stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    #[error("inner normal has wrong orientation: dphi[n] = {value:e} (must be > 0)")]
    WrongOrientation { value: f64 },

    #[error("direction is not tangent to the boundary: dphi[y] = {value:e}")]
    NotTangent { value: f64 },

    #[error("point is not within the boundary band: phi = {phi:e}")]
    NotOnBoundary { phi: f64 },

    #[error("geodesic left the chart near {exit:?}")]
    LeftChart { exit: Vec<f64> },

    #[error("degenerate path: zero speed at node {node}")]
    DegeneratePath { node: usize },

    #[error("degenerate segment {segment}: zero velocity over a positive parameter interval")]
    DegenerateSegment { segment: usize },

    #[error("curve left the domain: phi = {phi:e} at node {node}")]
    CurveLeftDomain { node: usize, phi: f64 },

    #[error("curve needs at least {min} segments, got {got}")]
    TooFewSegments { min: usize, got: usize },

    #[error("sample grid is not uniform: spacing {got} differs from {expected}")]
    NonUniformGrid { expected: f64, got: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl FinslerError {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        FinslerError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FinslerError>;
