//! Domains cut out of a chart by a boundary function.
//!
//! A domain is the set `{phi > 0}`; its boundary is the zero level set.
//! The boundary band makes "on the boundary" a floating-point notion:
//! `|phi| <= band * (1 + |grad phi|)` counts as boundary.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::chart::{Chart, ChartPoint};
use crate::error::{FinslerError, Result};
use crate::field::ScalarField;
use crate::sampling;

/// Default base width of the boundary band.
pub const BOUNDARY_BAND: f64 = 1.0e-8;
/// Newton projection stops when `|phi|` falls below this.
pub const PROJECTION_TOL: f64 = 1.0e-10;
const PROJECTION_MAX_ITERS: usize = 50;

#[derive(Clone)]
pub struct Domain {
    chart: Arc<Chart>,
    phi: ScalarField,
    band: f64,
    full: bool,
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("dim", &self.chart.dim())
            .field("band", &self.band)
            .field("full", &self.full)
            .finish()
    }
}

impl Domain {
    /// Domain bounded by the zero level set of `phi`. A handful of
    /// deterministic samples are projected onto the boundary to verify
    /// the gradient does not vanish there.
    pub fn new(chart: Chart, phi: ScalarField) -> Result<Self> {
        let domain = Domain {
            chart: Arc::new(chart),
            phi,
            band: BOUNDARY_BAND,
            full: false,
        };
        let mut rng = sampling::rng_for(0xD05A11, 0);
        let mut projected = 0;
        for _ in 0..16 {
            let x = sampling::sample_coords(&domain.chart, &mut rng);
            if !domain.chart.is_valid(&x) {
                continue;
            }
            if let Ok(p) = domain.project_coords(&x) {
                projected += 1;
                let grad = domain.phi.gradient(&p);
                if grad.norm() < 1e-12 {
                    return Err(FinslerError::parameter(
                        "phi",
                        "gradient vanishes on the boundary",
                    ));
                }
            }
            if projected >= 4 {
                break;
            }
        }
        Ok(domain)
    }

    /// The whole chart as a domain: `phi` is identically 1, so there is
    /// no boundary and the penalty term degenerates to a constant.
    pub fn full(chart: Chart) -> Self {
        Domain {
            chart: Arc::new(chart),
            phi: ScalarField::constant(1.0),
            band: BOUNDARY_BAND,
            full: true,
        }
    }

    pub fn with_band(mut self, band: f64) -> Self {
        assert!(band > 0.0);
        self.band = band;
        self
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

    pub fn band(&self) -> f64 {
        self.band
    }

    /// True for the trivial whole-chart domain.
    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn phi(&self, x: &DVector<f64>) -> f64 {
        self.phi.value(x)
    }

    pub fn phi_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.phi.gradient(x)
    }

    pub fn phi_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.phi.hessian(x)
    }

    pub fn boundary_field(&self) -> &ScalarField {
        &self.phi
    }

    /// Strict interior test: `phi > 0`.
    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        self.chart.is_valid(x) && self.phi.value(x) > 0.0
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        self.phi.value(p.coords()) > 0.0
    }

    /// Boundary test within the band, scaled by the local gradient size.
    pub fn on_boundary(&self, x: &DVector<f64>) -> bool {
        if self.full {
            return false;
        }
        let phi = self.phi.value(x);
        let grad = self.phi.gradient(x).norm();
        phi.abs() <= self.band * (1.0 + grad)
    }

    /// Ensures a boundary-band point, for operations defined on the
    /// boundary only.
    pub fn require_boundary(&self, x: &DVector<f64>) -> Result<()> {
        if self.on_boundary(x) {
            Ok(())
        } else {
            Err(FinslerError::NotOnBoundary {
                phi: self.phi.value(x),
            })
        }
    }

    /// Projects a nearby point onto the boundary with damped Newton steps
    /// along the gradient. Deterministic; errors after 50 iterations.
    pub fn project_to_boundary(&self, w: &ChartPoint) -> Result<ChartPoint> {
        let coords = self.project_coords(w.coords())?;
        self.chart.point(coords)
    }

    pub(crate) fn project_coords(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = w.clone();
        let mut phi = self.phi.value(&x);
        for _ in 0..PROJECTION_MAX_ITERS {
            if phi.abs() <= PROJECTION_TOL {
                return Ok(x);
            }
            let grad = self.phi.gradient(&x);
            let g2 = grad.norm_squared();
            if g2 < 1e-24 || !phi.is_finite() {
                break;
            }
            let full_step = &grad * (phi / g2);
            // Halve the step until |phi| decreases; keeps the iteration
            // inside the convergence basin for steep level sets.
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = &x - &full_step * t;
                if self.chart.is_valid(&cand) {
                    let cand_phi = self.phi.value(&cand);
                    if cand_phi.abs() < phi.abs() {
                        x = cand;
                        phi = cand_phi;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if phi.abs() <= PROJECTION_TOL {
            return Ok(x);
        }
        Err(FinslerError::NewtonStalled {
            iterations: PROJECTION_MAX_ITERS,
            residual: phi.abs(),
        })
    }

    /// Moves a point to `phi >= target` along the gradient, doubling the
    /// step until the target is met. Used to seed interior curves.
    pub fn push_inward(&self, x: &DVector<f64>, target: f64) -> Result<DVector<f64>> {
        let mut x = x.clone();
        if self.phi.value(&x) >= target {
            return Ok(x);
        }
        let mut t = 1e-3;
        for _ in 0..60 {
            let grad = self.phi.gradient(&x);
            let n = grad.norm();
            if n < 1e-14 {
                return Err(FinslerError::parameter(
                    "push_inward",
                    "gradient vanished before reaching the interior target",
                ));
            }
            let cand = &x + &grad * (t / n);
            if self.chart.is_valid(&cand) && self.phi.value(&cand) > self.phi.value(&x) {
                x = cand;
                if self.phi.value(&x) >= target {
                    return Ok(x);
                }
                t *= 2.0;
            } else {
                t *= 0.5;
                if t < 1e-15 {
                    break;
                }
            }
        }
        Err(FinslerError::parameter(
            "push_inward",
            "could not reach the interior target",
        ))
    }

    /// Deterministic boundary points: chart samples projected onto the
    /// level set. Fewer than `count` may come back if projections fail.
    pub fn boundary_samples(&self, count: usize, seed: u64) -> Vec<ChartPoint> {
        let mut rng = sampling::rng_for(seed, 0xB0D1);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 50 * count.max(1) {
            attempts += 1;
            let x = sampling::sample_coords(&self.chart, &mut rng);
            if !self.chart.is_valid(&x) {
                continue;
            }
            if let Ok(p) = self.project_coords(&x) {
                if let Ok(point) = self.chart.point(p) {
                    out.push(point);
                }
            }
        }
        out
    }
}
