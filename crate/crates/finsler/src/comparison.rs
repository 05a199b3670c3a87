//! Oracles for the comparison ODE `v'' = A (v + v')` and the growth lemma
//! built on it: a non-negative function with vanishing initial data whose
//! second derivative stays below `A (v + |v'|)` must vanish identically.
//!
//! The lemma is exercised as a falsification harness over sampled functions,
//! not proved: [`gronwall_null_check`] evaluates hypothesis and conclusion on
//! a grid, and the property suite asserts the implication over generated
//! families.

use nalgebra::{Matrix2, Vector2};

use crate::error::{FinslerError, Result};

/// Additive slack for the discrete hypothesis inequality. Finite differences
/// on a clean grid carry truncation error well below this.
pub const HYPOTHESIS_SLACK: f64 = 1e-6;

/// A sampled function counts as identically zero when its sup stays below
/// this bound.
pub const NULL_BOUND: f64 = 1e-8;

/// Absolute floor under the grid-scaled anchor tolerances.
pub const ANCHOR_FLOOR: f64 = 1e-12;

/// Relative spacing jitter beyond which a grid is rejected as non-uniform.
const GRID_REL_TOL: f64 = 1e-9;

/// Closed-form solution of `v'' = A (v + v')` anchored at `t_anchor` with
/// value `psi_anchor` and zero slope there.
///
/// The characteristic roots solve `lambda^2 - A lambda - A = 0`; their
/// product is `-A < 0`, so one root is negative and one positive for every
/// `A > 0`. Both mode coefficients are strictly positive whenever the anchor
/// value is, which makes the solution convex and growing away from the
/// anchor in both directions.
#[derive(Clone, Debug)]
pub struct ComparisonSolution {
    pub a: f64,
    pub t_anchor: f64,
    pub psi_anchor: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl ComparisonSolution {
    /// Solves the anchored two-point conditions for the mode coefficients.
    ///
    /// Requires `a > 0` and `psi_anchor >= 0`.
    pub fn new(a: f64, t_anchor: f64, psi_anchor: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(FinslerError::parameter(
                "a",
                format!("growth rate must be positive and finite, got {a}"),
            ));
        }
        if !(psi_anchor >= 0.0) || !psi_anchor.is_finite() {
            return Err(FinslerError::parameter(
                "psi_anchor",
                format!("anchor value must be non-negative, got {psi_anchor}"),
            ));
        }
        if !t_anchor.is_finite() {
            return Err(FinslerError::parameter(
                "t_anchor",
                format!("anchor time must be finite, got {t_anchor}"),
            ));
        }
        let discriminant = (a * a + 4.0 * a).sqrt();
        let lambda_plus = 0.5 * (a + discriminant);
        let lambda_minus = 0.5 * (a - discriminant);

        // Anchor conditions in the scaled unknowns d_k = c_k exp(lambda_k T):
        //   d_minus + d_plus = psi_anchor
        //   lambda_minus d_minus + lambda_plus d_plus = 0
        // The system is nondegenerate because the roots are distinct.
        let system = Matrix2::new(1.0, 1.0, lambda_minus, lambda_plus);
        let rhs = Vector2::new(psi_anchor, 0.0);
        let scaled = system
            .lu()
            .solve(&rhs)
            .expect("distinct characteristic roots give an invertible system");
        let c_minus = scaled[0] * (-lambda_minus * t_anchor).exp();
        let c_plus = scaled[1] * (-lambda_plus * t_anchor).exp();

        Ok(ComparisonSolution {
            a,
            t_anchor,
            psi_anchor,
            lambda_minus,
            lambda_plus,
            c_minus,
            c_plus,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.c_minus * (self.lambda_minus * t).exp() + self.c_plus * (self.lambda_plus * t).exp()
    }

    pub fn slope(&self, t: f64) -> f64 {
        self.c_minus * self.lambda_minus * (self.lambda_minus * t).exp()
            + self.c_plus * self.lambda_plus * (self.lambda_plus * t).exp()
    }

    pub fn curvature(&self, t: f64) -> f64 {
        self.c_minus * self.lambda_minus.powi(2) * (self.lambda_minus * t).exp()
            + self.c_plus * self.lambda_plus.powi(2) * (self.lambda_plus * t).exp()
    }
}

/// Outcome of checking the growth lemma on one sampled function.
///
/// The lemma itself is the implication `hypothesis_holds => conclusion_holds`;
/// a counterexample would be a sample with the first flag set and the second
/// clear.
#[derive(Clone, Debug)]
pub struct GronwallReport {
    /// Interior second differences obey the growth inequality and the initial
    /// value and slope vanish at grid resolution.
    pub hypothesis_holds: bool,
    /// The sampled sup stays below [`NULL_BOUND`].
    pub conclusion_holds: bool,
    /// Sup of the sampled values.
    pub max_value: f64,
    /// First interior node violating the growth inequality, if any.
    pub first_violation: Option<usize>,
}

/// Evaluates hypothesis and conclusion of the growth lemma for a function
/// sampled on a uniform grid.
///
/// Derivatives are central differences at interior nodes. The anchor checks
/// compare the initial value against an `h^2`-scaled tolerance and a
/// second-order one-sided slope estimate against an `h`-scaled one, both
/// calibrated by the largest observed second difference: a grid cannot
/// certify vanishing initial data any finer than its own truncation error.
pub fn gronwall_null_check(a: f64, times: &[f64], values: &[f64]) -> Result<GronwallReport> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(FinslerError::parameter(
            "a",
            format!("growth rate must be positive and finite, got {a}"),
        ));
    }
    if times.len() != values.len() {
        return Err(FinslerError::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if times.len() < 5 {
        return Err(FinslerError::parameter(
            "times",
            format!("need at least 5 samples, got {}", times.len()),
        ));
    }
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(FinslerError::parameter(
            "values",
            format!("samples must be non-negative and finite, got {bad}"),
        ));
    }

    let h = times[1] - times[0];
    if !(h > 0.0) || !h.is_finite() {
        return Err(FinslerError::parameter(
            "times",
            format!("grid must be strictly increasing, first step {h}"),
        ));
    }
    for pair in times.windows(2) {
        let step = pair[1] - pair[0];
        if (step - h).abs() > GRID_REL_TOL * h.abs().max(1.0) {
            return Err(FinslerError::NonUniformGrid {
                expected: h,
                got: step,
            });
        }
    }

    let n = values.len();
    let mut max_value = 0.0f64;
    for &v in values {
        max_value = max_value.max(v);
    }

    let mut max_curvature = 0.0f64;
    let mut first_violation = None;
    for i in 1..n - 1 {
        let second = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        let first = (values[i + 1] - values[i - 1]) / (2.0 * h);
        max_curvature = max_curvature.max(second.abs());
        if first_violation.is_none() && second > a * (values[i] + first.abs()) + HYPOTHESIS_SLACK {
            first_violation = Some(i);
        }
    }

    // Second-order one-sided slope estimate at the first node; exact for
    // quadratics, so its truncation error scales past the curvature bound.
    let initial_slope = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    let scale = max_curvature.max(1.0);
    let anchors_vanish = values[0] <= h * h * scale + ANCHOR_FLOOR
        && initial_slope.abs() <= h * scale + ANCHOR_FLOOR;

    Ok(GronwallReport {
        hypothesis_holds: anchors_vanish && first_violation.is_none(),
        conclusion_holds: max_value <= NULL_BOUND,
        max_value,
        first_violation,
    })
}
