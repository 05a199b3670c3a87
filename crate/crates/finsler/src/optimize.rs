//! Fixed-endpoint minimization of the penalized discrete energy.
//!
//! Limited-memory quasi-Newton descent (two-loop recursion, Armijo
//! backtracking) over the interior nodes of a curve's lift. Endpoints
//! never move. Iterates that leave the chart or the domain evaluate to
//! `+inf`, so the line search backs away from the boundary on its own;
//! no projection is ever applied. The whole procedure is deterministic:
//! no randomness, no time-dependent behavior, results depend only on
//! the inputs.

use nalgebra::DVector;
use std::collections::VecDeque;

use crate::curve::DiscreteCurve;
use crate::domain::Domain;
use crate::energy::{energy_of_lift, gradient_of_lift};
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;

/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1.0e-4;
/// Backtracking shrink factor.
const BACKTRACK: f64 = 0.5;
/// Maximum halvings in one line search.
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    /// Convergence threshold on the largest interior-node gradient norm.
    /// The discrete energy has curvature of order the segment count, so at
    /// machine-precision energy stall the gradient sup is around
    /// `sqrt(N * 1e-15)`; defaults much below 1e-6 are unreachable for the
    /// segment counts this library runs at.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Number of curvature pairs kept by the two-loop recursion.
    pub memory: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            gradient_tolerance: 1.0e-6,
            max_iterations: 10_000,
            memory: 10,
        }
    }
}

/// Why the iteration stopped. A stall (no further progress along a
/// descent direction at machine precision) still counts as converged:
/// the iterate is the best the discretization can represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    Stalled,
    IterationCap,
}

impl Termination {
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::IterationCap)
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub curve: DiscreteCurve,
    pub energy: f64,
    /// Largest interior-node gradient norm at the final iterate.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
}

struct Problem<'a> {
    metric: &'a FinslerMetric,
    domain: &'a Domain,
    epsilon: f64,
    ends: (DVector<f64>, DVector<f64>),
    interior: usize,
    dim: usize,
}

impl Problem<'_> {
    fn lift_of(&self, dof: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut lift = Vec::with_capacity(self.interior + 2);
        lift.push(self.ends.0.clone());
        for j in 0..self.interior {
            lift.push(DVector::from_iterator(
                self.dim,
                (0..self.dim).map(|k| dof[j * self.dim + k]),
            ));
        }
        lift.push(self.ends.1.clone());
        lift
    }

    /// Energy with the infeasibility barrier folded in.
    fn energy(&self, dof: &DVector<f64>) -> f64 {
        match energy_of_lift(self.metric, self.domain, &self.lift_of(dof), self.epsilon) {
            Ok(e) if e.is_finite() => e,
            _ => f64::INFINITY,
        }
    }

    /// Flat gradient plus its largest per-node norm.
    fn gradient(&self, dof: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let grads = gradient_of_lift(self.metric, self.domain, &self.lift_of(dof), self.epsilon)?;
        let mut flat = DVector::zeros(self.interior * self.dim);
        let mut sup: f64 = 0.0;
        for (j, g) in grads.iter().enumerate() {
            sup = sup.max(g.norm());
            for k in 0..self.dim {
                flat[j * self.dim + k] = g[k];
            }
        }
        Ok((flat, sup))
    }
}

fn two_loop(
    history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    gradient: &DVector<f64>,
) -> DVector<f64> {
    let mut q = gradient.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * s.dot(&q);
        q -= y * alpha;
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = s.dot(y) / y.dot(y);
        q *= gamma;
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * y.dot(&q);
        q += s * (alpha - beta);
    }
    -q
}

/// Minimizes the penalized energy over interior nodes, starting from
/// `start` (which must be feasible) with its endpoints pinned.
pub fn minimize_energy(
    metric: &FinslerMetric,
    domain: &Domain,
    start: &DiscreteCurve,
    epsilon: f64,
    options: &OptimizeOptions,
) -> Result<MinimizeResult> {
    if options.memory == 0 || options.max_iterations == 0 {
        return Err(FinslerError::parameter(
            "options",
            "memory and max_iterations must be positive",
        ));
    }
    // Surfaces TooFewSegments / CurveLeftDomain / dimension errors for
    // the starting curve before any iteration runs.
    crate::energy::discrete_energy(metric, domain, start, epsilon)?;

    let lift0 = start.lift();
    let interior = lift0.len() - 2;
    let dim = metric.dim();
    let problem = Problem {
        metric,
        domain,
        epsilon,
        ends: (lift0[0].clone(), lift0[lift0.len() - 1].clone()),
        interior,
        dim,
    };
    let mut x = DVector::zeros(interior * dim);
    for j in 0..interior {
        for k in 0..dim {
            x[j * dim + k] = lift0[j + 1][k];
        }
    }

    let mut energy = problem.energy(&x);
    let (mut grad, mut sup) = problem.gradient(&x)?;
    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;

    for _ in 0..options.max_iterations {
        if sup <= options.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut direction = two_loop(&history, &grad);
        if !direction.iter().all(|v| v.is_finite()) || direction.dot(&grad) >= 0.0 {
            history.clear();
            direction = -&grad;
        }
        let slope = direction.dot(&grad);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &x + &direction * t;
            let e_cand = problem.energy(&cand);
            if e_cand <= energy + ARMIJO_C1 * t * slope {
                accepted = Some((cand, e_cand));
                break;
            }
            t *= BACKTRACK;
        }
        let Some((x_new, e_new)) = accepted else {
            termination = Termination::Stalled;
            break;
        };

        let (g_new, sup_new) = problem.gradient(&x_new)?;
        let s = &x_new - &x;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > options.memory {
                history.pop_front();
            }
        }

        let progress = energy - e_new;
        x = x_new;
        grad = g_new;
        sup = sup_new;
        let stalled = progress <= 4.0 * f64::EPSILON * (1.0 + energy.abs());
        energy = e_new;
        iterations += 1;
        // A machine-precision stall inside the tolerance is a clean
        // convergence; the loop head reports it as such.
        if stalled && sup > options.gradient_tolerance {
            termination = Termination::Stalled;
            break;
        }
    }
    let lift = problem.lift_of(&x);
    let curve = DiscreteCurve::from_lift(start.chart_arc(), &lift)?;
    Ok(MinimizeResult {
        curve,
        energy,
        gradient_norm: sup,
        iterations,
        termination,
    })
}
