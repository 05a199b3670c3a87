//! Numerics for Finsler metrics on Euclidean charts: non-reversible norms
//! and their fundamental tensors, geodesic sprays, convexity analysis of
//! domain boundaries, penalized connectors between points, and one-sided
//! distance estimates.
//!
//! Charts may wrap coordinates (cylinders, tori) and carry open bounds
//! (half-planes), and every consumer goes through the chart's wrapping rules
//! so curves cross seams without ad hoc bookkeeping. Metrics are never
//! assumed reversible; reversed-metric twins of the main entry points come
//! from [`FinslerMetric::reversed`] rather than separate code paths.
//!
//! The `parallel` feature (on by default) fans sample sweeps out through
//! rayon. Disabling it swaps in a sequential driver with the same ordering
//! guarantees, so results are identical either way.

// Parameter guards are written `!(x > 0.0)` on purpose: the negation
// rejects NaN, which `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod comparison;
pub mod connector;
pub mod convexity;
pub mod curve;
pub mod distance;
pub mod domain;
pub mod energy;
pub mod error;
pub mod field;
pub mod metric;
pub mod optimize;
mod par;
mod sampling;
pub mod scenes;
pub mod spray;

pub use chart::{Chart, ChartPoint, Coordinate, TangentVector};
pub use comparison::{gronwall_null_check, ComparisonSolution, GronwallReport};
pub use connector::{
    epsilon_continuation, minimize_penalized, multiplicity_search, ConnectionKind, ConnectorBranch,
    ContinuationOptions, ContinuationReport, ContinuationStage, CriticalDiagnostics,
};
pub use convexity::{
    finsler_hessian, infinitesimal_convexity_check, inner_normal, local_convexity_check,
    normal_curvature, tangency_probe, ConvexityReport, ConvexitySample, TangencyOutcome, Verdict,
    Witness,
};
pub use curve::DiscreteCurve;
pub use distance::{
    ball_membership, distance_estimate, path_length, symmetrized_distance, BallMembership,
    BallVerdict, DistanceEstimate, SymmetrizedDistance,
};
pub use domain::Domain;
pub use energy::{discrete_energy, energy_gradient, geodesic_residual};
pub use error::{FinslerError, Result};
pub use field::{MatrixField, ScalarField, VectorField};
pub use metric::{AuditReport, EnergyJet, FinslerMetric, FundamentalTensor};
pub use optimize::{minimize_energy, MinimizeResult, OptimizeOptions, Termination};
pub use spray::{constant_speed_drift, exponential_map, GeodesicPath, Spray, SprayCoefficients};
