//! Forward Finsler metrics on a chart.
//!
//! A metric is evaluated through its energy `G(x, y) = F(x, y)^2`. For
//! Riemannian data `G = y' a(x) y` and every derivative is analytic; for
//! Randers data `F = sqrt(y' a y) + b . y` derivatives fall back to
//! central finite differences. Reversal is an orientation flag: the
//! reversed metric evaluates the original at `-y`, so reversing twice is
//! exactly the identity.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::sync::Arc;

use crate::chart::{Chart, TangentVector};
use crate::error::{FinslerError, Result};
use crate::field::{MatrixField, VectorField};
use crate::par;
use crate::sampling;

/// Relative step for first differences of the energy.
pub const DEFAULT_FD_STEP: f64 = 1.0e-5;
/// Relative step for second differences of the energy. Wider than the
/// first-difference step because second differences divide by `h^2`:
/// at 1e-5 the rounding floor would sit near the tensor tolerance.
pub const DEFAULT_FD_STEP_SECOND: f64 = 1.2e-4;

/// Velocity norms below this threshold route through the homogeneity
/// rescale `G(x, y) = |y|^2 G(x, y/|y|)` to keep differences well scaled.
const TINY_VELOCITY: f64 = 1.0e-8;

/// Residual gate for audits of metrics with analytic derivatives.
pub const AUDIT_TOL_ANALYTIC: f64 = 1.0e-6;
/// Residual gate for audits of finite-difference metrics.
pub const AUDIT_TOL_FD: f64 = 1.0e-4;

#[derive(Clone, Debug)]
enum MetricKind {
    Riemannian { a: MatrixField },
    Randers { a: MatrixField, b: VectorField },
}

/// Energy value together with both coordinate gradients.
#[derive(Debug, Clone)]
pub struct EnergyJet {
    pub value: f64,
    /// Partial derivatives of `G` in the base point.
    pub x_gradient: DVector<f64>,
    /// Partial derivatives of `G` in the velocity.
    pub y_gradient: DVector<f64>,
}

/// The symmetric positive-definite velocity Hessian `g(x, y)` of `G/2`.
#[derive(Debug, Clone)]
pub struct FundamentalTensor {
    matrix: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl FundamentalTensor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Bilinear form `g(u, w)`.
    pub fn inner(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (u.transpose() * &self.matrix * w)[(0, 0)]
    }
}

/// Outcome of a randomized axiom audit.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub requested: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub max_homogeneity_residual: f64,
    pub max_euler_residual: f64,
    pub max_tensor_residual: f64,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone)]
pub struct FinslerMetric {
    chart: Arc<Chart>,
    kind: MetricKind,
    reverse: bool,
    fd_step: f64,
    fd_step_second: f64,
}

impl std::fmt::Debug for FinslerMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FinslerMetric")
            .field("dim", &self.chart.dim())
            .field(
                "kind",
                &match self.kind {
                    MetricKind::Riemannian { .. } => "riemannian",
                    MetricKind::Randers { .. } => "randers",
                },
            )
            .field("reverse", &self.reverse)
            .finish()
    }
}

/// Deterministic batch of construction-time validation points: sample-box
/// corners, the center, and a seeded handful of interior draws.
fn validation_points(chart: &Chart) -> Vec<DVector<f64>> {
    let dim = chart.dim();
    let mut points = Vec::new();
    let center = DVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let (lo, hi) = chart.sample_interval(i);
            0.5 * (lo + hi)
        }),
    );
    points.push(center);
    if dim <= 4 {
        for mask in 0..(1usize << dim) {
            let corner = DVector::from_iterator(
                dim,
                (0..dim).map(|i| {
                    let (lo, hi) = chart.sample_interval(i);
                    let w = hi - lo;
                    if mask >> i & 1 == 1 {
                        hi - 0.01 * w
                    } else {
                        lo + 0.01 * w
                    }
                }),
            );
            points.push(corner);
        }
    }
    let mut rng = sampling::rng_for(0xF1E1D, 0);
    for _ in 0..64 {
        points.push(sampling::sample_coords(chart, &mut rng));
    }
    points.retain(|p| chart.is_valid(p));
    points
}

fn check_positive_definite(m: &DMatrix<f64>) -> Result<f64> {
    let eig = m.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(FinslerError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(min)
}

impl FinslerMetric {
    /// Riemannian metric `F = sqrt(y' a(x) y)`. The matrix field must be
    /// symmetric positive definite at every valid point; this is checked
    /// on a deterministic batch of samples at construction.
    pub fn riemannian(chart: Chart, a: MatrixField) -> Result<Self> {
        let chart = Arc::new(chart);
        for p in validation_points(&chart) {
            check_positive_definite(&a.value(&p))?;
        }
        Ok(FinslerMetric {
            chart,
            kind: MetricKind::Riemannian { a },
            reverse: false,
            fd_step: DEFAULT_FD_STEP,
            fd_step_second: DEFAULT_FD_STEP_SECOND,
        })
    }

    /// The standard flat metric on the chart.
    pub fn euclidean(chart: Chart) -> Self {
        let dim = chart.dim();
        FinslerMetric::riemannian(chart, MatrixField::identity(dim))
            .expect("identity matrix field is positive definite")
    }

    /// Randers metric `F = sqrt(y' a y) + b . y`. Positivity of `F` away
    /// from `y = 0` requires `|b|_a < 1`; violations found on the
    /// validation batch are construction errors.
    pub fn randers(chart: Chart, a: MatrixField, b: VectorField) -> Result<Self> {
        let chart = Arc::new(chart);
        for p in validation_points(&chart) {
            let am = a.value(&p);
            check_positive_definite(&am)?;
            let bv = b.value(&p);
            let sol = am
                .clone()
                .lu()
                .solve(&bv)
                .ok_or(FinslerError::NotPositiveDefinite {
                    min_eigenvalue: f64::NAN,
                })?;
            let norm_a = bv.dot(&sol).max(0.0).sqrt();
            if norm_a >= 1.0 - 1.0e-9 {
                return Err(FinslerError::RandersPositivity { norm: norm_a });
            }
        }
        Ok(FinslerMetric {
            chart,
            kind: MetricKind::Randers { a, b },
            reverse: false,
            fd_step: DEFAULT_FD_STEP,
            fd_step_second: DEFAULT_FD_STEP_SECOND,
        })
    }

    /// Overrides the finite-difference steps (relative to `max(1, |y|)`).
    pub fn with_fd_step(mut self, first: f64, second: f64) -> Self {
        assert!(first > 0.0 && second > 0.0);
        self.fd_step = first;
        self.fd_step_second = second;
        self
    }

    /// The reversed metric `F~(x, y) = F(x, -y)`. Involutive: reversing a
    /// reversed metric returns the original orientation, and evaluations
    /// agree bitwise because negation is exact.
    pub fn reversed(&self) -> Self {
        let mut m = self.clone();
        m.reverse = !m.reverse;
        m
    }

    pub fn is_reversed(&self) -> bool {
        self.reverse
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn chart_arc(&self) -> Arc<Chart> {
        Arc::clone(&self.chart)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn fd_step_second(&self) -> f64 {
        self.fd_step_second
    }

    /// True when every derivative used by this metric has a closed form.
    pub fn has_analytic_derivatives(&self) -> bool {
        match &self.kind {
            MetricKind::Riemannian { a } => a.has_analytic_partials(),
            MetricKind::Randers { .. } => false,
        }
    }

    fn oriented(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.reverse {
            -y
        } else {
            y.clone()
        }
    }

    /// Energy at raw coordinates, without chart validation. Finite
    /// difference stencils may probe marginally outside the chart.
    pub(crate) fn energy_raw(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let y = self.oriented(y);
        self.energy_raw_oriented(x, &y)
    }

    fn energy_raw_oriented(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match &self.kind {
            MetricKind::Riemannian { a } => {
                let am = a.value(x);
                (y.transpose() * am * y)[(0, 0)]
            }
            MetricKind::Randers { a, b } => {
                let am = a.value(x);
                let alpha = (y.transpose() * am * y)[(0, 0)].max(0.0).sqrt();
                let beta = b.value(x).dot(y);
                let f = alpha + beta;
                f * f
            }
        }
    }

    /// The norm `F(x, y)`. Defined for every `y`, zero exactly on `y = 0`.
    pub fn norm(&self, v: &TangentVector) -> Result<f64> {
        self.chart.validate(v.base.coords())?;
        self.chart.check_dim(&v.velocity)?;
        Ok(self
            .energy_raw(v.base.coords(), &v.velocity)
            .max(0.0)
            .sqrt())
    }

    /// The energy `G(x, y) = F^2(x, y)` without derivatives; continuous
    /// through the zero section.
    pub fn energy_value(&self, v: &TangentVector) -> Result<f64> {
        self.chart.validate(v.base.coords())?;
        self.chart.check_dim(&v.velocity)?;
        Ok(self.energy_raw(v.base.coords(), &v.velocity))
    }

    /// Energy with both gradients. Errors on `y = 0` where the velocity
    /// gradient has no continuous extension.
    pub fn energy_jet(&self, v: &TangentVector) -> Result<EnergyJet> {
        self.chart.validate(v.base.coords())?;
        self.chart.check_dim(&v.velocity)?;
        let x = v.base.coords();
        let y_norm = v.velocity.norm();
        if y_norm == 0.0 {
            return Err(FinslerError::ZeroSectionDerivative);
        }
        if y_norm < TINY_VELOCITY {
            // 2-homogeneity: G(x, y) = s^2 G(x, y/s) with s = |y|.
            let unit = &v.velocity / y_norm;
            let jet = self.energy_jet_raw(x, &unit);
            return Ok(EnergyJet {
                value: y_norm * y_norm * jet.value,
                x_gradient: jet.x_gradient * (y_norm * y_norm),
                y_gradient: jet.y_gradient * y_norm,
            });
        }
        Ok(self.energy_jet_raw(x, &v.velocity))
    }

    pub(crate) fn energy_jet_raw(&self, x: &DVector<f64>, y: &DVector<f64>) -> EnergyJet {
        let y_or = self.oriented(y);
        let mut jet = match &self.kind {
            MetricKind::Riemannian { a } => {
                let am = a.value(x);
                let value = (y_or.transpose() * &am * &y_or)[(0, 0)];
                let y_gradient = 2.0 * &am * &y_or;
                let parts = a.partials(x);
                let x_gradient = DVector::from_iterator(
                    x.len(),
                    parts
                        .iter()
                        .map(|dk| (y_or.transpose() * dk * &y_or)[(0, 0)]),
                );
                EnergyJet {
                    value,
                    x_gradient,
                    y_gradient,
                }
            }
            MetricKind::Randers { .. } => {
                let value = self.energy_raw_oriented(x, &y_or);
                let n = x.len();
                let hx: Vec<f64> = (0..n).map(|k| self.fd_step * x[k].abs().max(1.0)).collect();
                let hy = self.fd_step * y_or.norm().max(1.0);
                let mut xp = x.clone();
                let x_gradient = DVector::from_iterator(
                    n,
                    (0..n).map(|k| {
                        xp[k] = x[k] + hx[k];
                        let fp = self.energy_raw_oriented(&xp, &y_or);
                        xp[k] = x[k] - hx[k];
                        let fm = self.energy_raw_oriented(&xp, &y_or);
                        xp[k] = x[k];
                        (fp - fm) / (2.0 * hx[k])
                    }),
                );
                let mut yp = y_or.clone();
                let y_gradient = DVector::from_iterator(
                    n,
                    (0..n).map(|k| {
                        yp[k] = y_or[k] + hy;
                        let fp = self.energy_raw_oriented(x, &yp);
                        yp[k] = y_or[k] - hy;
                        let fm = self.energy_raw_oriented(x, &yp);
                        yp[k] = y_or[k];
                        (fp - fm) / (2.0 * hy)
                    }),
                );
                EnergyJet {
                    value,
                    x_gradient,
                    y_gradient,
                }
            }
        };
        if self.reverse {
            jet.y_gradient = -jet.y_gradient;
        }
        jet
    }

    /// The fundamental tensor `g(x, y) = Hess_y(G)/2`, positive definite
    /// away from the zero section.
    pub fn fundamental_tensor(&self, v: &TangentVector) -> Result<FundamentalTensor> {
        self.chart.validate(v.base.coords())?;
        self.chart.check_dim(&v.velocity)?;
        let y_norm = v.velocity.norm();
        if y_norm == 0.0 {
            return Err(FinslerError::ZeroSectionDerivative);
        }
        let x = v.base.coords();
        // 0-homogeneous in y: evaluate on the unit sphere when y is tiny.
        let y_eval = if y_norm < TINY_VELOCITY {
            self.oriented(&(&v.velocity / y_norm))
        } else {
            self.oriented(&v.velocity)
        };
        let matrix = self.tensor_raw(x, &y_eval);
        let min_eigenvalue =
            check_positive_definite(&matrix).map_err(|_| FinslerError::ConvexityViolation {
                min_eigenvalue: matrix
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min),
            })?;
        Ok(FundamentalTensor {
            matrix,
            min_eigenvalue,
        })
    }

    /// Tensor at raw, already-oriented coordinates.
    pub(crate) fn tensor_raw(&self, x: &DVector<f64>, y_oriented: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            MetricKind::Riemannian { a } => a.value(x),
            MetricKind::Randers { .. } => {
                let n = y_oriented.len();
                let h = self.fd_step_second * y_oriented.norm().max(1.0);
                let g0 = self.energy_raw_oriented(x, y_oriented);
                let mut out = DMatrix::zeros(n, n);
                let mut yp = y_oriented.clone();
                for i in 0..n {
                    yp[i] = y_oriented[i] + h;
                    let fp = self.energy_raw_oriented(x, &yp);
                    yp[i] = y_oriented[i] - h;
                    let fm = self.energy_raw_oriented(x, &yp);
                    yp[i] = y_oriented[i];
                    out[(i, i)] = 0.5 * (fp - 2.0 * g0 + fm) / (h * h);
                    for j in (i + 1)..n {
                        let mut eval = |si: f64, sj: f64| {
                            yp[i] = y_oriented[i] + si * h;
                            yp[j] = y_oriented[j] + sj * h;
                            let v = self.energy_raw_oriented(x, &yp);
                            yp[i] = y_oriented[i];
                            yp[j] = y_oriented[j];
                            v
                        };
                        let mixed = 0.5
                            * (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0)
                                + eval(-1.0, -1.0))
                            / (4.0 * h * h);
                        out[(i, j)] = mixed;
                        out[(j, i)] = mixed;
                    }
                }
                out
            }
        }
    }

    /// Effective velocity for tensor/spray evaluation under reversal.
    pub(crate) fn orient_velocity(&self, y: &DVector<f64>) -> DVector<f64> {
        self.oriented(y)
    }

    /// The matrix field when the metric is Riemannian.
    pub(crate) fn riemannian_parts(&self) -> Option<&MatrixField> {
        match &self.kind {
            MetricKind::Riemannian { a } => Some(a),
            MetricKind::Randers { .. } => None,
        }
    }

    /// Randomized audit of the metric axioms: positive 1-homogeneity of
    /// `F`, the Euler identity `dyG . y = 2 G`, agreement of `g(y)[y, y]`
    /// with `F^2`, and positive definiteness of the tensor. Residuals are
    /// relative; the gate depends on whether derivatives are analytic.
    pub fn audit(&self, sample_count: usize, seed: u64) -> AuditReport {
        let mut rng = sampling::rng_for(seed, 0xA0D1);
        let dim = self.dim();
        let mut batch = Vec::with_capacity(sample_count);
        let mut skipped = 0usize;
        for _ in 0..sample_count {
            let x = sampling::sample_coords(&self.chart, &mut rng);
            let y = sampling::sample_velocity(dim, &mut rng);
            let lambda: f64 = rng.random_range(0.2..5.0);
            if self.chart.is_valid(&x) {
                batch.push((x, y, lambda));
            } else {
                skipped += 1;
            }
        }
        let evaluated = batch.len();

        struct SampleStats {
            homogeneity: f64,
            euler: f64,
            tensor: f64,
            min_eig: f64,
        }

        let stats = par::map(batch, |(x, y, lambda)| {
            let f1 = self.energy_raw(&x, &y).max(0.0).sqrt();
            let mut homogeneity = 0.0f64;
            for l in [0.5, 2.0, 10.0, lambda] {
                let fl = self.energy_raw(&x, &(&y * l)).max(0.0).sqrt();
                let denom = fl.abs().max(1e-12);
                homogeneity = homogeneity.max((fl - l * f1).abs() / denom);
            }
            let jet = self.energy_jet_raw(&x, &y);
            let euler = (jet.y_gradient.dot(&y) - 2.0 * jet.value).abs() / jet.value.abs().max(1.0);
            let y_or = self.orient_velocity(&y);
            let g = self.tensor_raw(&x, &y_or);
            let quad = (y_or.transpose() * &g * &y_or)[(0, 0)];
            let tensor = (quad - jet.value).abs() / jet.value.abs().max(1e-12);
            let min_eig = g
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            SampleStats {
                homogeneity,
                euler,
                tensor,
                min_eig,
            }
        });

        let mut report = AuditReport {
            requested: sample_count,
            evaluated,
            skipped,
            max_homogeneity_residual: 0.0,
            max_euler_residual: 0.0,
            max_tensor_residual: 0.0,
            min_eigenvalue: f64::INFINITY,
            tolerance: if self.has_analytic_derivatives() {
                AUDIT_TOL_ANALYTIC
            } else {
                AUDIT_TOL_FD
            },
            pass: false,
        };
        for s in &stats {
            report.max_homogeneity_residual = report.max_homogeneity_residual.max(s.homogeneity);
            report.max_euler_residual = report.max_euler_residual.max(s.euler);
            report.max_tensor_residual = report.max_tensor_residual.max(s.tensor);
            report.min_eigenvalue = report.min_eigenvalue.min(s.min_eig);
        }
        if stats.is_empty() {
            report.min_eigenvalue = f64::NAN;
        }
        report.pass = !stats.is_empty()
            && report.max_homogeneity_residual < report.tolerance
            && report.max_euler_residual < report.tolerance
            && report.max_tensor_residual < report.tolerance
            && report.min_eigenvalue > 0.0;
        report
    }
}
