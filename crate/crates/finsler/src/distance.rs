//! Lengths, distance estimates, and metric balls.
//!
//! Distances are one-sided: `d(p, q)` minimizes the energy of discrete
//! curves from `p` to `q` and reports the length of the minimizer, so
//! `d(p, q) != d(q, p)` whenever the metric is non-reversible. The
//! symmetrized distance averages the two one-sided values; because both
//! calls run the same two deterministic minimizations and IEEE addition
//! commutes, it is symmetric bit-for-bit.
//!
//! Segment lengths are summed in sorted order. A reversed curve (under
//! the reversed metric) produces the identical contribution multiset,
//! so its length is also bit-for-bit equal on seam-free charts.

use crate::chart::ChartPoint;
use crate::curve::DiscreteCurve;
use crate::domain::Domain;
use crate::energy::geodesic_residual;
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::optimize::{minimize_energy, OptimizeOptions, Termination};

/// Distance margins smaller than this cannot be resolved by the
/// discrete estimate; ball membership reports them as inconclusive.
pub const BALL_TOL: f64 = 1.0e-6;

/// Length of a discrete curve: midpoint-rule integral of the norm,
/// `sum_i F(m_i, d_i)`, summed in sorted order.
pub fn path_length(metric: &FinslerMetric, curve: &DiscreteCurve) -> Result<f64> {
    if metric.dim() != curve.chart().dim() {
        return Err(FinslerError::DimensionMismatch {
            expected: metric.dim(),
            got: curve.chart().dim(),
        });
    }
    let lift = curve.lift();
    let chart = metric.chart();
    let mut contributions = Vec::with_capacity(lift.len() - 1);
    for i in 0..lift.len() - 1 {
        let mid = chart.wrap((&lift[i] + &lift[i + 1]) * 0.5);
        chart.validate(&mid)?;
        let delta = &lift[i + 1] - &lift[i];
        contributions.push(metric.energy_raw(&mid, &delta).max(0.0).sqrt());
    }
    contributions.sort_by(|a, b| a.total_cmp(b));
    Ok(contributions.iter().sum())
}

#[derive(Clone, Debug)]
pub struct DistanceEstimate {
    pub length: f64,
    pub energy: f64,
    pub curve: DiscreteCurve,
    pub gradient_norm: f64,
    pub residual: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// One-sided distance estimate from `p` to `q`: minimizes the discrete
/// energy over the whole chart starting from the shortest chord, then
/// measures the minimizer.
pub fn distance_estimate(
    metric: &FinslerMetric,
    p: &ChartPoint,
    q: &ChartPoint,
    segments: usize,
    options: &OptimizeOptions,
) -> Result<DistanceEstimate> {
    if segments < 2 {
        return Err(FinslerError::TooFewSegments {
            min: 2,
            got: segments,
        });
    }
    let chart = metric.chart_arc();
    let domain = Domain::full(metric.chart().clone());
    let chord = DiscreteCurve::chord(chart, p, q, segments)?;
    let run = minimize_energy(metric, &domain, &chord, 0.0, options)?;
    let length = path_length(metric, &run.curve)?;
    let residual = geodesic_residual(metric, &run.curve)?;
    Ok(DistanceEstimate {
        length,
        energy: run.energy,
        curve: run.curve,
        gradient_norm: run.gradient_norm,
        residual,
        iterations: run.iterations,
        termination: run.termination,
    })
}

#[derive(Clone, Debug)]
pub struct SymmetrizedDistance {
    pub forward: DistanceEstimate,
    pub backward: DistanceEstimate,
    /// `(d(p, q) + d(q, p)) / 2`.
    pub value: f64,
}

/// Symmetrized distance: the mean of the two one-sided estimates.
/// Exchanging `p` and `q` swaps the two summands, so the value is
/// symmetric bit-for-bit.
pub fn symmetrized_distance(
    metric: &FinslerMetric,
    p: &ChartPoint,
    q: &ChartPoint,
    segments: usize,
    options: &OptimizeOptions,
) -> Result<SymmetrizedDistance> {
    let forward = distance_estimate(metric, p, q, segments, options)?;
    let backward = distance_estimate(metric, q, p, segments, options)?;
    let value = 0.5 * (forward.length + backward.length);
    Ok(SymmetrizedDistance {
        forward,
        backward,
        value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallVerdict {
    Inside,
    Outside,
    /// The distance estimate lies within `BALL_TOL` of the radius.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct BallMembership {
    pub distance: f64,
    pub radius: f64,
    /// `distance - radius`.
    pub margin: f64,
    pub verdict: BallVerdict,
}

/// Membership of `point` in the forward metric ball around `center`.
pub fn ball_membership(
    metric: &FinslerMetric,
    center: &ChartPoint,
    radius: f64,
    point: &ChartPoint,
    segments: usize,
    options: &OptimizeOptions,
) -> Result<BallMembership> {
    if !(radius > 0.0) {
        return Err(FinslerError::parameter("radius", "must be positive"));
    }
    let estimate = distance_estimate(metric, center, point, segments, options)?;
    let margin = estimate.length - radius;
    let verdict = if margin < -BALL_TOL {
        BallVerdict::Inside
    } else if margin > BALL_TOL {
        BallVerdict::Outside
    } else {
        BallVerdict::Inconclusive
    };
    Ok(BallMembership {
        distance: estimate.length,
        radius,
        margin,
        verdict,
    })
}
