//! Penalized discrete energy of uniform-parameter curves.
//!
//! For a curve with `N` segments, lifted nodes `x_0..x_N`, midpoints
//! `m_i = (x_i + x_{i+1})/2` and differences `d_i = x_{i+1} - x_i`,
//!
//! ```text
//! E = (1/N) sum_i [ G(m_i, N d_i) / 2 + eps / phi(m_i)^2 ],
//! ```
//!
//! the trapezoid-free midpoint quadrature of energy plus an inverse
//! square boundary penalty. Midpoints are formed symmetrically so a
//! reversed curve produces the same midpoint set bit-for-bit, and the
//! per-segment contributions are summed in sorted order, which makes
//! the energy of a reversible metric exactly invariant under reversal.
//!
//! On a full domain `phi` is identically one, so the penalty is the
//! inert constant `eps` and never moves the minimizer. The kinetic term
//! of an exactly degenerate segment is dropped, matching its vanishing
//! limit.

use nalgebra::DVector;

use crate::curve::DiscreteCurve;
use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::spray::Spray;

/// Segments shorter than this (relative to the local scale) contribute
/// no kinetic term: the energy limit is zero and the velocity gradient
/// of `G` is not defined at the zero section.
pub const TINY_SEGMENT: f64 = 1.0e-14;

fn check_inputs(
    metric: &FinslerMetric,
    domain: &Domain,
    curve: &DiscreteCurve,
    epsilon: f64,
) -> Result<()> {
    if metric.dim() != curve.chart().dim() || domain.dim() != curve.chart().dim() {
        return Err(FinslerError::DimensionMismatch {
            expected: metric.dim(),
            got: curve.chart().dim(),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(FinslerError::parameter("epsilon", "must be nonnegative"));
    }
    if curve.segment_count() < 2 {
        return Err(FinslerError::TooFewSegments {
            min: 2,
            got: curve.segment_count(),
        });
    }
    Ok(())
}

/// Penalized energy of a curve. Errors with `CurveLeftDomain` as soon
/// as any node or midpoint has `phi <= 0` on a proper domain.
pub fn discrete_energy(
    metric: &FinslerMetric,
    domain: &Domain,
    curve: &DiscreteCurve,
    epsilon: f64,
) -> Result<f64> {
    check_inputs(metric, domain, curve, epsilon)?;
    energy_of_lift(metric, domain, &curve.lift(), epsilon)
}

/// Energy gradient with respect to the interior nodes, in lift
/// coordinates. Entry `j` is the gradient at node `j + 1`.
pub fn energy_gradient(
    metric: &FinslerMetric,
    domain: &Domain,
    curve: &DiscreteCurve,
    epsilon: f64,
) -> Result<Vec<DVector<f64>>> {
    check_inputs(metric, domain, curve, epsilon)?;
    gradient_of_lift(metric, domain, &curve.lift(), epsilon)
}

pub(crate) fn energy_of_lift(
    metric: &FinslerMetric,
    domain: &Domain,
    lift: &[DVector<f64>],
    epsilon: f64,
) -> Result<f64> {
    let n = lift.len() - 1;
    let nf = n as f64;
    let chart = metric.chart();
    let proper = !domain.is_full();

    for (idx, x) in lift.iter().enumerate() {
        let w = chart.wrap(x.clone());
        chart.validate(&w)?;
        if proper {
            let phi = domain.phi(&w);
            if phi <= 0.0 {
                return Err(FinslerError::CurveLeftDomain { node: idx, phi });
            }
        }
    }

    let mut contributions = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mid = chart.wrap((&lift[i] + &lift[i + 1]) * 0.5);
        chart.validate(&mid)?;
        let mut phi = 1.0;
        if proper {
            phi = domain.phi(&mid);
            if phi <= 0.0 {
                return Err(FinslerError::CurveLeftDomain { node: i, phi });
            }
        }
        let delta = &lift[i + 1] - &lift[i];
        if delta.norm() > TINY_SEGMENT * (1.0 + mid.norm()) {
            let g = metric.energy_raw(&mid, &(&delta * nf));
            contributions.push(0.5 * g / nf);
        }
        if epsilon > 0.0 {
            contributions.push(epsilon / (phi * phi) / nf);
        }
    }
    contributions.sort_by(|a, b| a.total_cmp(b));
    Ok(contributions.iter().sum())
}

pub(crate) fn gradient_of_lift(
    metric: &FinslerMetric,
    domain: &Domain,
    lift: &[DVector<f64>],
    epsilon: f64,
) -> Result<Vec<DVector<f64>>> {
    let n = lift.len() - 1;
    let nf = n as f64;
    let dim = lift[0].len();
    let chart = metric.chart();
    let proper = !domain.is_full();
    let mut grads = vec![DVector::zeros(dim); n - 1];

    for i in 0..n {
        let mid = chart.wrap((&lift[i] + &lift[i + 1]) * 0.5);
        chart.validate(&mid)?;
        let mut phi = 1.0;
        if proper {
            phi = domain.phi(&mid);
            if phi <= 0.0 {
                return Err(FinslerError::CurveLeftDomain { node: i, phi });
            }
        }
        let delta = &lift[i + 1] - &lift[i];

        // Per-endpoint pieces of this segment's contribution: each
        // endpoint owns half the midpoint dependence and the full
        // (signed) difference dependence.
        let mut to_left = DVector::zeros(dim);
        let mut to_right = DVector::zeros(dim);
        if delta.norm() > TINY_SEGMENT * (1.0 + mid.norm()) {
            let jet = metric.energy_jet_raw(&mid, &(&delta * nf));
            let dx = &jet.x_gradient / (4.0 * nf);
            let dy = &jet.y_gradient * 0.5;
            to_left += &dx - &dy;
            to_right += &dx + &dy;
        }
        // On a full domain the penalty is constant; its gradient term is
        // exactly zero and skipping it loses nothing.
        if proper && epsilon > 0.0 {
            let p_grad = domain.phi_gradient(&mid) * (-2.0 * epsilon / (phi * phi * phi));
            let shared = &p_grad / (2.0 * nf);
            to_left += &shared;
            to_right += &shared;
        }
        if i >= 1 {
            grads[i - 1] += &to_left;
        }
        if i < n - 1 {
            grads[i] += &to_right;
        }
    }
    Ok(grads)
}

/// Sup-norm discrete geodesic equation residual over interior nodes:
///
/// ```text
/// r_j = | N^2 (x_{j+1} - 2 x_j + x_{j-1}) + spray(x_j, v_j) |,
/// v_j = N (x_{j+1} - x_{j-1}) / 2.
/// ```
///
/// Nodes are assumed uniformly spaced in parameter. For a geodesic
/// sampled at resolution `N` the residual decays like `1/N^2`.
///
/// Needs at least four segments so two genuinely interior nodes exist,
/// and fails with `DegenerateSegment` if any segment has zero velocity:
/// the spray is undefined there and the residual would be meaningless.
pub fn geodesic_residual(metric: &FinslerMetric, curve: &DiscreteCurve) -> Result<f64> {
    if curve.segment_count() < 4 {
        return Err(FinslerError::TooFewSegments {
            min: 4,
            got: curve.segment_count(),
        });
    }
    let lift = curve.lift();
    let n = curve.segment_count();
    let nf = n as f64;
    for i in 0..n {
        let delta = &lift[i + 1] - &lift[i];
        if delta.norm() <= TINY_SEGMENT * (1.0 + lift[i].norm()) {
            return Err(FinslerError::DegenerateSegment { segment: i });
        }
    }
    let chart = metric.chart();
    let spray = Spray::new(metric.clone());
    let mut worst: f64 = 0.0;
    for j in 1..n {
        let x = chart.wrap(lift[j].clone());
        chart.validate(&x)?;
        let vel = (&lift[j + 1] - &lift[j - 1]) * (0.5 * nf);
        let acc = (&lift[j + 1] - &lift[j] * 2.0 + &lift[j - 1]) * (nf * nf);
        // Adjacent segments may cancel (a backtracking node); the spray
        // vanishes with the velocity by 2-homogeneity.
        let residual = if vel.norm() > TINY_SEGMENT * (1.0 + x.norm()) {
            (acc + spray.coefficients_raw(&x, &vel)).norm()
        } else {
            acc.norm()
        };
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Sup-norm bending of the node polygon, `|N^2 (x_{j+1} - 2 x_j +
/// x_{j-1})|` over interior nodes. The spray-free part of the geodesic
/// residual; defined for every curve, including degenerate ones.
pub(crate) fn bending_residual(curve: &DiscreteCurve) -> f64 {
    let lift = curve.lift();
    let n = curve.segment_count();
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for j in 1..n {
        let acc = (&lift[j + 1] - &lift[j] * 2.0 + &lift[j - 1]) * (nf * nf);
        worst = worst.max(acc.norm());
    }
    worst
}
