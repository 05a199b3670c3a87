//! Model geometries with known closed-form behavior.
//!
//! These are the scenes the test suites and benches lean on: flat and
//! hyperbolic Riemannian metrics, a constant-drift Randers metric, a
//! periodic chart, and a small zoo of domains whose boundary convexity
//! is known. Everything here carries analytic derivatives, so the
//! finite-difference fallbacks are exercised only where a test wants
//! them.

use nalgebra::{DMatrix, DVector};

use crate::chart::Chart;
use crate::domain::Domain;
use crate::error::Result;
use crate::field::{MatrixField, ScalarField, VectorField};
use crate::metric::FinslerMetric;

/// Flat Euclidean plane.
pub fn euclidean_plane() -> FinslerMetric {
    FinslerMetric::euclidean(Chart::euclidean(2))
}

/// Constant-coefficient Randers metric: `a = I` plus the given constant
/// drift, which must have Euclidean norm below one. Non-reversible;
/// straight lines are geodesics.
pub fn randers_constant(drift: &[f64]) -> Result<FinslerMetric> {
    let b = DVector::from_column_slice(drift);
    let a = MatrixField::identity(b.len());
    let chart = Chart::euclidean(b.len());
    FinslerMetric::randers(chart, a, VectorField::constant(b))
}

/// Hyperbolic upper half-plane, `a(x) = I / x2^2` on the open chart
/// `x2 > 0`, with analytic coordinate partials.
pub fn hyperbolic_half_plane() -> FinslerMetric {
    let chart = Chart::euclidean(2).with_bounds(1, 0.0, f64::INFINITY);
    let a = MatrixField::from_fn(|x| {
        let s = 1.0 / (x[1] * x[1]);
        DMatrix::from_diagonal_element(2, 2, s)
    })
    .with_partials_fn(|x| {
        let s = -2.0 / (x[1] * x[1] * x[1]);
        vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_diagonal_element(2, 2, s),
        ]
    });
    FinslerMetric::riemannian(chart, a).expect("hyperbolic metric is positive definite")
}

/// Flat cylinder: Euclidean metric with the first coordinate periodic
/// of period `2 pi`.
pub fn flat_cylinder() -> FinslerMetric {
    let chart = Chart::euclidean(2).with_period(0, std::f64::consts::TAU);
    FinslerMetric::euclidean(chart)
}

fn half_plane_boundary() -> ScalarField {
    ScalarField::from_fn(|x| x[1])
        .with_gradient_fn(|x| {
            let mut g = DVector::zeros(x.len());
            g[1] = 1.0;
            g
        })
        .with_hessian_fn(|x| DMatrix::zeros(x.len(), x.len()))
}

/// Euclidean metric on the full plane, domain `x2 > 0`. Totally
/// geodesic boundary: normal curvature is identically zero.
pub fn euclidean_half_plane() -> (FinslerMetric, Domain) {
    let metric = euclidean_plane();
    let domain = Domain::new(Chart::euclidean(2), half_plane_boundary()).expect("flat boundary");
    (metric, domain)
}

/// Constant Randers metric with drift `(1/2, 0)`, domain `x2 > 0`. Flat
/// but non-reversible.
pub fn randers_half_plane() -> (FinslerMetric, Domain) {
    let metric = randers_constant(&[0.5, 0.0]).expect("drift is subunit");
    let domain = Domain::new(Chart::euclidean(2), half_plane_boundary()).expect("flat boundary");
    (metric, domain)
}

/// Unit disk in the Euclidean plane, `phi = 1 - |x|^2`. Convex; the
/// normal curvature of the boundary circle is `+1`.
pub fn euclidean_disk() -> (FinslerMetric, Domain) {
    let metric = euclidean_plane();
    let phi = ScalarField::from_fn(|x| 1.0 - x.norm_squared())
        .with_gradient_fn(|x| -2.0 * x)
        .with_hessian_fn(|x| -2.0 * DMatrix::identity(x.len(), x.len()));
    let domain = Domain::new(Chart::euclidean(2), phi).expect("disk boundary");
    (metric, domain)
}

/// Complement of the closed unit disk, `phi = |x|^2 - 1`. Nonconvex:
/// boundary geodesic tangents bend into the domain's complement.
pub fn exterior_of_disk() -> (FinslerMetric, Domain) {
    let metric = euclidean_plane();
    let phi = ScalarField::from_fn(|x| x.norm_squared() - 1.0)
        .with_gradient_fn(|x| 2.0 * x)
        .with_hessian_fn(|x| 2.0 * DMatrix::identity(x.len(), x.len()));
    let domain = Domain::new(Chart::euclidean(2), phi).expect("circle boundary");
    (metric, domain)
}

/// Annulus `1 < |x| < 2` via `phi = (|x|^2 - 1)(4 - |x|^2)`. The inner
/// boundary circle is nonconvex, the outer one convex.
pub fn annulus() -> (FinslerMetric, Domain) {
    let metric = euclidean_plane();
    let phi = ScalarField::from_fn(|x| {
        let u = x.norm_squared();
        (u - 1.0) * (4.0 - u)
    })
    .with_gradient_fn(|x| {
        let u = x.norm_squared();
        2.0 * (5.0 - 2.0 * u) * x
    })
    .with_hessian_fn(|x| {
        let u = x.norm_squared();
        let n = x.len();
        let mut h = DMatrix::identity(n, n) * (2.0 * (5.0 - 2.0 * u));
        h.ger(-8.0, x, x, 1.0);
        h
    });
    let domain = Domain::new(Chart::euclidean(2), phi).expect("annulus boundary");
    (metric, domain)
}

/// Horoball `x2 > 1` in the hyperbolic half-plane, `phi = x2 - 1`.
/// Convex with normal curvature `+1` along the horocycle.
pub fn hyperbolic_horoball() -> (FinslerMetric, Domain) {
    let metric = hyperbolic_half_plane();
    let chart = Chart::euclidean(2).with_bounds(1, 0.0, f64::INFINITY);
    let phi = ScalarField::from_fn(|x| x[1] - 1.0)
        .with_gradient_fn(|x| {
            let mut g = DVector::zeros(x.len());
            g[1] = 1.0;
            g
        })
        .with_hessian_fn(|x| DMatrix::zeros(x.len(), x.len()));
    let domain = Domain::new(chart, phi).expect("horocycle boundary");
    (metric, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn scene_metrics_pass_their_audits() {
        for metric in [
            euclidean_plane(),
            randers_constant(&[0.5, 0.0]).unwrap(),
            hyperbolic_half_plane(),
            flat_cylinder(),
        ] {
            let report = metric.audit(200, 7);
            assert!(report.pass, "audit failed: {report:?}");
        }
    }

    #[test]
    fn annulus_derivatives_match_finite_differences() {
        let (_, d) = annulus();
        let x = DVector::from_column_slice(&[1.2, -0.4]);
        let u = x.norm_squared();
        let grad = d.phi_gradient(&x);
        assert_relative_eq!(grad[0], 2.0 * (5.0 - 2.0 * u) * x[0], max_relative = 1e-12);
        let hess = d.phi_hessian(&x);
        // Symmetric rank-one update: H = 2(5-2u) I - 8 x x'.
        assert_relative_eq!(hess[(0, 1)], -8.0 * x[0] * x[1], max_relative = 1e-12);
        assert_relative_eq!(
            hess[(0, 0)],
            2.0 * (5.0 - 2.0 * u) - 8.0 * x[0] * x[0],
            max_relative = 1e-12
        );
    }

    #[test]
    fn domain_membership_is_as_drawn() {
        let (_, disk) = euclidean_disk();
        assert!(disk.is_interior(&DVector::from_column_slice(&[0.3, 0.0])));
        assert!(!disk.is_interior(&DVector::from_column_slice(&[1.1, 0.0])));

        let (_, ann) = annulus();
        assert!(ann.is_interior(&DVector::from_column_slice(&[1.5, 0.0])));
        assert!(!ann.is_interior(&DVector::from_column_slice(&[0.5, 0.0])));
        assert!(!ann.is_interior(&DVector::from_column_slice(&[2.5, 0.0])));

        let (_, horo) = hyperbolic_horoball();
        assert!(horo.is_interior(&DVector::from_column_slice(&[0.0, 1.5])));
        assert!(!horo.is_interior(&DVector::from_column_slice(&[0.0, 0.5])));
    }
}
