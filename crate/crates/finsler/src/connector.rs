//! Connecting two interior points through a domain.
//!
//! The boundary is enforced by an inverse-square penalty. A critical
//! curve of the penalized energy satisfies the geodesic equation up to
//! a multiplier times the boundary gradient; the multiplier field is
//! `lambda = 2 eps / phi^3` along the curve. Driving `eps` down a
//! geometric ladder and watching `lambda` separates two regimes:
//!
//! * interior connector: the penalty becomes irrelevant, `lambda_sup`
//!   collapses proportionally to `eps`;
//! * boundary-touching connector: the curve hugs the boundary at
//!   clearance `~ eps^(1/3)`, and `lambda_sup` does not collapse.
//!
//! The winding sweep runs one full continuation per homotopy class of
//! chords (turns through the first periodic coordinate) and
//! deduplicates the limit curves it finds.

use crate::chart::ChartPoint;
use crate::curve::DiscreteCurve;
use crate::distance::path_length;
use crate::domain::Domain;
use crate::energy::{bending_residual, geodesic_residual, TINY_SEGMENT};
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::optimize::{minimize_energy, OptimizeOptions, Termination};
use crate::par;

/// Two critical curves whose nodes never separate by more than this are
/// the same connector.
pub const DISTINCT_TOL: f64 = 1.0e-3;

/// A penalized critical curve with everything the classifier needs.
#[derive(Clone, Debug)]
pub struct CriticalDiagnostics {
    pub curve: DiscreteCurve,
    pub epsilon: f64,
    pub energy: f64,
    pub length: f64,
    /// Minimum of `phi` over nodes and midpoints; one on a full domain.
    pub min_phi: f64,
    /// Per-segment samples of the conserved quantity `G/2 - eps/phi^2`,
    /// taken at the segment midpoints with the chord velocity. Constant
    /// along an exact critical curve; the sampled spread shrinks like
    /// `1/N^2`.
    pub energy_values: Vec<f64>,
    /// Spread `max - min` of `energy_values`.
    pub conservation_residual: f64,
    /// Multiplier field `2 eps / phi^3` at the segment midpoints.
    pub lambda_field: Vec<f64>,
    /// Sup of `lambda_field`.
    pub lambda_sup: f64,
    /// Sup of `lambda |grad phi|`: the geodesic-equation residual the
    /// penalty itself is expected to cause.
    pub penalty_force: f64,
    pub gradient_norm: f64,
    /// Sup-norm residual of the discrete geodesic equation; bending
    /// only when a degenerate segment leaves the spray undefined.
    pub geodesic_residual: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// Minimizes the penalized energy and packages the diagnostics.
/// The penalty weight must be positive; without it the multiplier
/// field is meaningless and `minimize_energy` is the right tool.
pub fn minimize_penalized(
    metric: &FinslerMetric,
    domain: &Domain,
    start: &DiscreteCurve,
    epsilon: f64,
    options: &OptimizeOptions,
) -> Result<CriticalDiagnostics> {
    if !(epsilon > 0.0) {
        return Err(FinslerError::parameter("epsilon", "must be positive"));
    }
    let run = minimize_energy(metric, domain, start, epsilon, options)?;
    let length = path_length(metric, &run.curve)?;
    let residual = match geodesic_residual(metric, &run.curve) {
        Ok(r) => r,
        // A degenerate segment (a collapsed loop, say) leaves the spray
        // undefined there; the spray-free bending sup is still telling.
        Err(FinslerError::DegenerateSegment { .. }) => bending_residual(&run.curve),
        Err(e) => return Err(e),
    };
    let profile = segment_profile(metric, domain, &run.curve, epsilon);
    Ok(CriticalDiagnostics {
        min_phi: run.curve.min_phi(domain),
        curve: run.curve,
        epsilon,
        energy: run.energy,
        length,
        energy_values: profile.energy_values,
        conservation_residual: profile.conservation_residual,
        lambda_field: profile.lambda_field,
        lambda_sup: profile.lambda_sup,
        penalty_force: profile.penalty_force,
        gradient_norm: run.gradient_norm,
        geodesic_residual: residual,
        iterations: run.iterations,
        termination: run.termination,
    })
}

struct SegmentProfile {
    energy_values: Vec<f64>,
    conservation_residual: f64,
    lambda_field: Vec<f64>,
    lambda_sup: f64,
    penalty_force: f64,
}

/// Midpoint samples of the conserved energy and the multiplier field.
fn segment_profile(
    metric: &FinslerMetric,
    domain: &Domain,
    curve: &DiscreteCurve,
    epsilon: f64,
) -> SegmentProfile {
    let lift = curve.lift();
    let n = curve.segment_count();
    let nf = n as f64;
    let chart = metric.chart();
    let mut energy_values = Vec::with_capacity(n);
    let mut lambda_field = Vec::with_capacity(n);
    let mut lambda_sup: f64 = 0.0;
    let mut penalty_force: f64 = 0.0;
    for i in 0..n {
        let mid = chart.wrap((&lift[i] + &lift[i + 1]) * 0.5);
        let phi = domain.phi(&mid);
        let (lambda, value, force) = if phi <= 0.0 {
            // Cannot happen on a curve the energy accepted; poison the
            // diagnostics instead of panicking if it somehow does.
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let lambda = 2.0 * epsilon / (phi * phi * phi);
            let delta = &lift[i + 1] - &lift[i];
            let kinetic = if delta.norm() > TINY_SEGMENT * (1.0 + mid.norm()) {
                0.5 * metric.energy_raw(&mid, &(&delta * nf))
            } else {
                0.0
            };
            let force = lambda * domain.phi_gradient(&mid).norm();
            (lambda, kinetic - epsilon / (phi * phi), force)
        };
        lambda_sup = lambda_sup.max(lambda);
        penalty_force = penalty_force.max(force);
        energy_values.push(value);
        lambda_field.push(lambda);
    }
    let max = energy_values
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = energy_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    SegmentProfile {
        energy_values,
        conservation_residual: max - min,
        lambda_field,
        lambda_sup,
        penalty_force,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConnectionKind {
    InteriorGeodesic,
    BoundaryTouching,
    Failed { stage: usize },
}

#[derive(Clone, Debug)]
pub struct ContinuationStage {
    pub epsilon: f64,
    pub segments: usize,
    pub diagnostics: CriticalDiagnostics,
}

#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub stages: Vec<ContinuationStage>,
    pub kind: ConnectionKind,
}

impl ContinuationReport {
    /// Diagnostics of the final (smallest penalty) stage.
    pub fn limit(&self) -> &CriticalDiagnostics {
        let last = self.stages.last().expect("a report has at least one stage");
        &last.diagnostics
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    pub epsilon_start: f64,
    /// Geometric decay of the penalty weight per stage, in `(0, 1)`.
    /// Factors above one half decay too slowly for the classifier to
    /// see the interior multiplier collapse.
    pub epsilon_factor: f64,
    pub stages: usize,
    pub initial_segments: usize,
    /// Segment count doubles each stage up to this cap.
    pub max_segments: usize,
    /// Initial chord nodes are pushed inward to at least this clearance.
    pub clearance: f64,
    /// Interior acceptance threshold on the part of the geodesic
    /// residual not explained by the penalty force.
    pub residual_tolerance: f64,
    pub optimize: OptimizeOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            epsilon_start: 1.0,
            epsilon_factor: 0.1,
            stages: 5,
            initial_segments: 32,
            max_segments: 256,
            clearance: 0.05,
            residual_tolerance: 1.0e-3,
            optimize: OptimizeOptions::default(),
        }
    }
}

fn validate_options(options: &ContinuationOptions) -> Result<()> {
    if options.stages < 2 {
        return Err(FinslerError::parameter("stages", "need at least two"));
    }
    if !(options.epsilon_factor > 0.0 && options.epsilon_factor < 1.0) {
        return Err(FinslerError::parameter(
            "epsilon_factor",
            "must lie strictly between 0 and 1",
        ));
    }
    if !(options.epsilon_start > 0.0) {
        return Err(FinslerError::parameter("epsilon_start", "must be positive"));
    }
    Ok(())
}

fn check_endpoints(domain: &Domain, p: &ChartPoint, q: &ChartPoint) -> Result<()> {
    if !domain.is_full() {
        for (name, x) in [("p", p), ("q", q)] {
            if domain.phi(x.coords()) <= 0.0 {
                return Err(FinslerError::parameter(name, "endpoint is not interior"));
            }
        }
    }
    Ok(())
}

/// Feasible start: push shallow or exterior chord nodes inward.
fn prepared_start(
    metric: &FinslerMetric,
    domain: &Domain,
    chord: DiscreteCurve,
    clearance: f64,
) -> Result<DiscreteCurve> {
    if domain.is_full() {
        return Ok(chord);
    }
    let count = chord.node_count();
    let mut lift = chord.lift();
    for (i, x) in lift.iter_mut().enumerate() {
        if i == 0 || i + 1 == count {
            continue;
        }
        let wrapped = metric.chart().wrap(x.clone());
        if domain.phi(&wrapped) < clearance {
            *x = domain.push_inward(&wrapped, clearance)?;
        }
    }
    DiscreteCurve::from_lift(metric.chart_arc(), &lift)
}

/// The penalty ladder itself: resample, minimize, shrink, repeat.
fn run_continuation(
    metric: &FinslerMetric,
    domain: &Domain,
    start: DiscreteCurve,
    options: &ContinuationOptions,
) -> Result<ContinuationReport> {
    let mut current = start;
    let mut stages = Vec::with_capacity(options.stages);
    let mut epsilon = options.epsilon_start;
    let mut segments = current.segment_count();
    for _ in 0..options.stages {
        while current.segment_count() < segments {
            current = current.resample(2 * current.segment_count())?;
        }
        let diag = minimize_penalized(metric, domain, &current, epsilon, &options.optimize)?;
        current = diag.curve.clone();
        stages.push(ContinuationStage {
            epsilon,
            segments: current.segment_count(),
            diagnostics: diag,
        });
        epsilon *= options.epsilon_factor;
        segments = (segments * 2).min(options.max_segments);
    }

    let kind = classify(&stages, options);
    Ok(ContinuationReport { stages, kind })
}

/// Runs the penalty ladder between two interior points and classifies
/// the limiting connector.
pub fn epsilon_continuation(
    metric: &FinslerMetric,
    domain: &Domain,
    p: &ChartPoint,
    q: &ChartPoint,
    options: &ContinuationOptions,
) -> Result<ContinuationReport> {
    validate_options(options)?;
    check_endpoints(domain, p, q)?;
    let chord = DiscreteCurve::chord(metric.chart_arc(), p, q, options.initial_segments)?;
    let start = prepared_start(metric, domain, chord, options.clearance)?;
    run_continuation(metric, domain, start, options)
}

/// The regime decision. Convergence failures fail the stage where they
/// happen; otherwise the multiplier trend across the last stage pair
/// decides, with the clearance trend as the boundary-side witness.
fn classify(stages: &[ContinuationStage], options: &ContinuationOptions) -> ConnectionKind {
    for (i, s) in stages.iter().enumerate() {
        if !s.diagnostics.termination.converged()
            || !s.diagnostics.energy.is_finite()
            || !s.diagnostics.lambda_sup.is_finite()
        {
            return ConnectionKind::Failed { stage: i };
        }
    }
    let k = stages.len();
    let last = &stages[k - 1].diagnostics;
    let prev = &stages[k - 2].diagnostics;

    let interior_multiplier = last.lambda_sup <= 0.5 * prev.lambda_sup;
    if interior_multiplier {
        let excess = last.geodesic_residual - 3.0 * last.penalty_force;
        if excess <= options.residual_tolerance {
            return ConnectionKind::InteriorGeodesic;
        }
        return ConnectionKind::Failed { stage: k - 1 };
    }
    let clearance_shrinking = last.min_phi <= 0.9 * prev.min_phi;
    let multiplier_growing = last.lambda_sup >= 2.0 * prev.lambda_sup;
    if clearance_shrinking || multiplier_growing {
        return ConnectionKind::BoundaryTouching;
    }
    ConnectionKind::Failed { stage: k - 1 }
}

/// One critical connector found by the winding sweep.
#[derive(Clone, Debug)]
pub struct ConnectorBranch {
    /// Turns through the first periodic coordinate of the initial chord.
    pub winding: i64,
    pub report: ContinuationReport,
}

impl ConnectorBranch {
    /// Diagnostics of the branch's limit curve.
    pub fn limit(&self) -> &CriticalDiagnostics {
        self.report.limit()
    }
}

/// Runs one penalty continuation per winding class `-max_winding ..=
/// max_winding` of the chord from `p` to `q` and returns the distinct
/// critical connectors, sorted by limit length. Classes whose start is
/// infeasible or whose continuation fails contribute nothing, so the
/// list can be shorter than the class count.
pub fn multiplicity_search(
    metric: &FinslerMetric,
    domain: &Domain,
    p: &ChartPoint,
    q: &ChartPoint,
    max_winding: u32,
    options: &ContinuationOptions,
) -> Result<Vec<ConnectorBranch>> {
    validate_options(options)?;
    check_endpoints(domain, p, q)?;
    let chart = metric.chart_arc();
    let periodic = chart.first_periodic();
    if periodic.is_none() && max_winding > 0 {
        return Err(FinslerError::parameter(
            "max_winding",
            "chart has no periodic coordinate",
        ));
    }
    let w = max_winding as i64;
    let turns: Vec<i64> = (-w..=w).collect();
    let runs = par::map(turns, |t| {
        let mut winding = vec![0i64; chart.dim()];
        if let Some((idx, _)) = periodic {
            winding[idx] = t;
        }
        let chord = DiscreteCurve::winding_chord(
            chart.clone(),
            p,
            q,
            options.initial_segments,
            Some(&winding),
        )
        .ok()?;
        let start = prepared_start(metric, domain, chord, options.clearance).ok()?;
        let report = run_continuation(metric, domain, start, options).ok()?;
        Some((t, report))
    });

    let mut branches: Vec<ConnectorBranch> = runs
        .into_iter()
        .flatten()
        .filter(|(_, report)| !matches!(report.kind, ConnectionKind::Failed { .. }))
        .map(|(winding, report)| ConnectorBranch { winding, report })
        .collect();
    branches.sort_by(|a, b| a.limit().length.total_cmp(&b.limit().length));

    let mut distinct: Vec<ConnectorBranch> = Vec::new();
    'candidates: for b in branches {
        for kept in &distinct {
            if let Ok(sep) = b.limit().curve.max_node_distance(&kept.limit().curve) {
                if sep <= DISTINCT_TOL {
                    continue 'candidates;
                }
            }
        }
        distinct.push(b);
    }
    Ok(distinct)
}
