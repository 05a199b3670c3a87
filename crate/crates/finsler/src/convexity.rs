//! Convexity of the domain boundary, in three grades.
//!
//! Infinitesimal convexity checks the sign of the boundary Hessian
//!
//! ```text
//! H_phi(x, y)[y, y] = y' Hess(phi)(x) y - grad(phi)(x) . spray(x, y),
//! ```
//!
//! local convexity probes the boundary-tangent exponential images under
//! both orientations, and the tangency probe follows one tangent
//! geodesic. Normal curvature converts the Hessian sign into curvature
//! toward the inner normal.

use nalgebra::{DMatrix, DVector};

use crate::chart::{ChartPoint, TangentVector};
use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;
use crate::par;
use crate::sampling;
use crate::spray::Spray;

/// A Hessian value above this counts as a convexity violation.
pub const TOL_POSITIVE: f64 = 1.0e-8;
/// An exponential image with `phi` above this counts as entering.
pub const TOL_ENTER: f64 = 1.0e-7;
/// Tangency gate: `|dphi[y]| <= TANGENT_TOL * |y| * |grad phi|`.
pub const TANGENT_TOL: f64 = 1.0e-8;
/// Residual target for the inner-normal Newton solve.
pub const NORMAL_RESIDUAL_TOL: f64 = 1.0e-10;
const NORMAL_MAX_ITERS: usize = 50;

/// One probed direction, with its Hessian value or exponential-image
/// `phi` value.
#[derive(Clone, Debug)]
pub struct ConvexitySample {
    pub point: ChartPoint,
    pub direction: DVector<f64>,
    pub value: f64,
    /// Probe radius for local checks; `None` for infinitesimal ones.
    pub radius: Option<f64>,
    /// True when the sample was taken under the reversed metric.
    pub reversed: bool,
    /// True when the probe could not be completed (left the chart).
    pub inconclusive: bool,
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub point: ChartPoint,
    pub direction: DVector<f64>,
    pub value: f64,
    pub radius: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Convex,
    Nonconvex(Witness),
    Inconclusive,
}

impl Verdict {
    pub fn is_convex(&self) -> bool {
        matches!(self, Verdict::Convex)
    }

    pub fn is_nonconvex(&self) -> bool {
        matches!(self, Verdict::Nonconvex(_))
    }
}

#[derive(Clone, Debug)]
pub struct ConvexityReport {
    pub samples: Vec<ConvexitySample>,
    pub verdict: Verdict,
    /// Verdict under the reversed metric (infinitesimal checks only).
    pub reversed_verdict: Option<Verdict>,
    pub tolerance: f64,
    /// Largest probed value among conclusive samples.
    pub max_value: f64,
    /// Largest radius at which every direction stayed convex and
    /// conclusive (local checks only).
    pub largest_verified_radius: Option<f64>,
}

/// Outcome of following one boundary-tangent geodesic.
#[derive(Clone, Debug, PartialEq)]
pub enum TangencyOutcome {
    StaysOnBoundary,
    ExitsDomain { time: f64 },
    EntersDomain { time: f64, phi: f64 },
}

/// The Finslerian boundary Hessian `H_phi(x, y)[y, y]`. Defined at any
/// chart point, 2-homogeneous in `y`.
pub fn finsler_hessian(metric: &FinslerMetric, domain: &Domain, v: &TangentVector) -> Result<f64> {
    let spray = Spray::new(metric.clone());
    metric.chart().validate(v.base.coords())?;
    metric.chart().check_dim(&v.velocity)?;
    if v.velocity.norm() == 0.0 {
        return Err(FinslerError::ZeroSectionDerivative);
    }
    Ok(hessian_with_spray(
        &spray,
        domain,
        v.base.coords(),
        &v.velocity,
    ))
}

fn hessian_with_spray(spray: &Spray, domain: &Domain, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let hess = domain.phi_hessian(x);
    let quad = (y.transpose() * hess * y)[(0, 0)];
    let grad = domain.phi_gradient(x);
    quad - grad.dot(&spray.coefficients_raw(x, y))
}

/// The inward Finsler unit normal at a boundary point: the unique `n`
/// with `F(x, n) = 1`, `dphi[n] > 0`, and `g(x, n)[n, w] = 0` on the
/// tangent plane. Solved as `g(x,n) n = mu grad(phi)`, `G(x,n) = 1` by a
/// damped Newton iteration started along the gradient; note that
/// `g(x,n) n` is exactly half the velocity gradient of `G`.
pub fn inner_normal(
    metric: &FinslerMetric,
    domain: &Domain,
    x: &ChartPoint,
) -> Result<TangentVector> {
    metric.chart().validate(x.coords())?;
    domain.require_boundary(x.coords())?;
    let coords = x.coords();
    let grad = domain.phi_gradient(coords);
    let grad_norm = grad.norm();
    if grad_norm < 1e-14 {
        return Err(FinslerError::parameter(
            "phi",
            "gradient vanishes at the boundary point",
        ));
    }
    let dim = coords.len();

    let f_grad = metric.energy_raw(coords, &grad).max(0.0).sqrt();
    let mut n = &grad / f_grad;
    let mut mu = {
        let jet = metric.energy_jet_raw(coords, &n);
        0.5 * jet.y_gradient.dot(&grad) / (grad_norm * grad_norm)
    };

    let residual = |n: &DVector<f64>, mu: f64| -> (DVector<f64>, f64) {
        let jet = metric.energy_jet_raw(coords, n);
        let r_vec = 0.5 * &jet.y_gradient - mu * &grad;
        (r_vec, jet.value - 1.0)
    };
    let norm_of = |r: &(DVector<f64>, f64)| (r.0.norm_squared() + r.1 * r.1).sqrt();

    let mut r = residual(&n, mu);
    for iteration in 0..NORMAL_MAX_ITERS {
        let r_norm = norm_of(&r);
        if r_norm <= NORMAL_RESIDUAL_TOL {
            let orientation = grad.dot(&n);
            if orientation <= 0.0 {
                return Err(FinslerError::WrongOrientation { value: orientation });
            }
            return Ok(TangentVector::new(x.clone(), n));
        }

        // Jacobian: [ g(x,n)  -grad ; dyG'  0 ].
        let g = metric.tensor_raw(coords, &metric.orient_velocity(&n));
        let jet = metric.energy_jet_raw(coords, &n);
        let mut jac = DMatrix::zeros(dim + 1, dim + 1);
        jac.view_mut((0, 0), (dim, dim)).copy_from(&g);
        for i in 0..dim {
            jac[(i, dim)] = -grad[i];
            jac[(dim, i)] = jet.y_gradient[i];
        }
        let mut rhs = DVector::zeros(dim + 1);
        for i in 0..dim {
            rhs[i] = -r.0[i];
        }
        rhs[dim] = -r.1;
        let delta = jac.lu().solve(&rhs).ok_or(FinslerError::NewtonStalled {
            iterations: iteration,
            residual: r_norm,
        })?;

        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..20 {
            let n_cand = &n + delta.rows(0, dim) * t;
            let mu_cand = mu + delta[dim] * t;
            if n_cand.norm() > 1e-14 {
                let r_cand = residual(&n_cand, mu_cand);
                if norm_of(&r_cand) < (1.0 - 1e-4 * t) * r_norm {
                    n = n_cand;
                    mu = mu_cand;
                    r = r_cand;
                    advanced = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !advanced {
            return Err(FinslerError::NewtonStalled {
                iterations: iteration + 1,
                residual: r_norm,
            });
        }
    }
    Err(FinslerError::NewtonStalled {
        iterations: NORMAL_MAX_ITERS,
        residual: norm_of(&r),
    })
}

/// Normal curvature of the boundary at `x` in tangent direction `y`,
/// positive when the boundary bends toward the domain:
/// `Lambda_n(y) = -H_phi(x, y)[y, y] / dphi[n]`.
pub fn normal_curvature(metric: &FinslerMetric, domain: &Domain, v: &TangentVector) -> Result<f64> {
    let coords = v.base.coords();
    domain.require_boundary(coords)?;
    if v.velocity.norm() == 0.0 {
        return Err(FinslerError::ZeroSectionDerivative);
    }
    let grad = domain.phi_gradient(coords);
    let pairing = grad.dot(&v.velocity);
    if pairing.abs() > TANGENT_TOL * v.velocity.norm() * grad.norm() {
        return Err(FinslerError::NotTangent { value: pairing });
    }
    let h = finsler_hessian(metric, domain, v)?;
    let n = inner_normal(metric, domain, &v.base)?;
    let denom = grad.dot(&n.velocity);
    Ok(-h / denom)
}

/// Samples unit tangent directions at a boundary point and checks the
/// sign of the Finslerian Hessian under both metric orientations.
pub fn infinitesimal_convexity_check(
    metric: &FinslerMetric,
    domain: &Domain,
    x: &ChartPoint,
    direction_samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if direction_samples == 0 {
        return Err(FinslerError::parameter(
            "direction_samples",
            "must be positive",
        ));
    }
    domain.require_boundary(x.coords())?;
    let grad = domain.phi_gradient(x.coords());
    if grad.norm() < 1e-14 {
        return Err(FinslerError::parameter(
            "phi",
            "gradient vanishes at the boundary point",
        ));
    }
    let directions = sampling::tangent_directions(&grad, direction_samples, seed);
    let forward = Spray::new(metric.clone());
    let backward = Spray::new(metric.reversed());

    let values = par::map(directions, |d| {
        let h_fwd = hessian_with_spray(&forward, domain, x.coords(), &d);
        let h_bwd = hessian_with_spray(&backward, domain, x.coords(), &d);
        (d, h_fwd, h_bwd)
    });

    let mut samples = Vec::with_capacity(2 * values.len());
    for (d, h_fwd, h_bwd) in &values {
        samples.push(ConvexitySample {
            point: x.clone(),
            direction: d.clone(),
            value: *h_fwd,
            radius: None,
            reversed: false,
            inconclusive: false,
        });
        samples.push(ConvexitySample {
            point: x.clone(),
            direction: d.clone(),
            value: *h_bwd,
            radius: None,
            reversed: true,
            inconclusive: false,
        });
    }

    let verdict_of = |reversed: bool| -> Verdict {
        for (d, h_fwd, h_bwd) in &values {
            let h = if reversed { *h_bwd } else { *h_fwd };
            if h > TOL_POSITIVE {
                return Verdict::Nonconvex(Witness {
                    point: x.clone(),
                    direction: d.clone(),
                    value: h,
                    radius: None,
                });
            }
        }
        Verdict::Convex
    };

    let max_value = values
        .iter()
        .map(|(_, h, _)| *h)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvexityReport {
        samples,
        verdict: verdict_of(false),
        reversed_verdict: Some(verdict_of(true)),
        tolerance: TOL_POSITIVE,
        max_value,
        largest_verified_radius: None,
    })
}

/// Probes `phi` along exponential images of boundary-tangent rays under
/// both orientations. A single verdict covers both maps; samples that
/// leave the chart are marked inconclusive.
pub fn local_convexity_check(
    metric: &FinslerMetric,
    domain: &Domain,
    x: &ChartPoint,
    radii: &[f64],
    direction_samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if direction_samples == 0 || radii.is_empty() {
        return Err(FinslerError::parameter(
            "radii/direction_samples",
            "must be nonempty and positive",
        ));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(FinslerError::parameter(
            "radii",
            "must be strictly positive",
        ));
    }
    domain.require_boundary(x.coords())?;
    let grad = domain.phi_gradient(x.coords());
    let directions = sampling::tangent_directions(&grad, direction_samples, seed);
    let forward = Spray::new(metric.clone());
    let backward = Spray::new(metric.reversed());

    let probes = par::map(directions, |d| {
        let mut out = Vec::with_capacity(2 * radii.len());
        for (spray, reversed) in [(&forward, false), (&backward, true)] {
            let speed = spray.metric().energy_raw(x.coords(), &d).max(0.0).sqrt();
            let unit = &d / speed;
            for &r in radii {
                let v = TangentVector::new(x.clone(), &unit * r);
                match spray.exponential(&v) {
                    Ok(image) => {
                        let phi = domain.phi(image.coords());
                        out.push(ConvexitySample {
                            point: x.clone(),
                            direction: d.clone(),
                            value: phi,
                            radius: Some(r),
                            reversed,
                            inconclusive: false,
                        });
                    }
                    Err(FinslerError::LeftChart { .. }) => {
                        out.push(ConvexitySample {
                            point: x.clone(),
                            direction: d.clone(),
                            value: f64::NAN,
                            radius: Some(r),
                            reversed,
                            inconclusive: true,
                        });
                    }
                    Err(_) => out.push(ConvexitySample {
                        point: x.clone(),
                        direction: d.clone(),
                        value: f64::NAN,
                        radius: Some(r),
                        reversed,
                        inconclusive: true,
                    }),
                }
            }
        }
        out
    });
    let samples: Vec<ConvexitySample> = probes.into_iter().flatten().collect();

    let mut verdict = Verdict::Convex;
    let mut max_value = f64::NEG_INFINITY;
    let mut any_inconclusive = false;
    for s in &samples {
        if s.inconclusive {
            any_inconclusive = true;
            continue;
        }
        max_value = max_value.max(s.value);
        if s.value > TOL_ENTER && !verdict.is_nonconvex() {
            verdict = Verdict::Nonconvex(Witness {
                point: s.point.clone(),
                direction: s.direction.clone(),
                value: s.value,
                radius: s.radius,
            });
        }
    }
    if verdict.is_convex() && any_inconclusive {
        verdict = Verdict::Inconclusive;
    }

    // Largest radius whose closed radius-prefix is fully verified.
    let mut sorted_radii: Vec<f64> = radii.to_vec();
    sorted_radii.sort_by(f64::total_cmp);
    let mut largest = None;
    'outer: for &r in &sorted_radii {
        for s in &samples {
            let sr = s.radius.expect("local samples carry radii");
            if sr <= r && (s.inconclusive || s.value > TOL_ENTER) {
                break 'outer;
            }
        }
        largest = Some(r);
    }

    Ok(ConvexityReport {
        samples,
        verdict,
        reversed_verdict: None,
        tolerance: TOL_ENTER,
        max_value,
        largest_verified_radius: largest,
    })
}

/// Integrates one boundary-tangent geodesic and reports the first
/// crossing of the boundary band, if any.
pub fn tangency_probe(
    metric: &FinslerMetric,
    domain: &Domain,
    x: &ChartPoint,
    y: &DVector<f64>,
    horizon: f64,
    step: f64,
) -> Result<TangencyOutcome> {
    domain.require_boundary(x.coords())?;
    metric.chart().check_dim(y)?;
    if y.norm() == 0.0 {
        return Err(FinslerError::ZeroSectionDerivative);
    }
    let grad = domain.phi_gradient(x.coords());
    let pairing = grad.dot(y);
    if pairing.abs() > TANGENT_TOL * y.norm() * grad.norm() {
        return Err(FinslerError::NotTangent { value: pairing });
    }
    let spray = Spray::new(metric.clone());
    let path = spray.integrate(&TangentVector::new(x.clone(), y.clone()), horizon, step)?;
    let tol = TOL_POSITIVE;
    for (t, p) in path.times.iter().zip(&path.points).skip(1) {
        let phi = domain.phi(p.coords());
        if phi > tol {
            return Ok(TangencyOutcome::EntersDomain { time: *t, phi });
        }
        if phi < -tol {
            return Ok(TangencyOutcome::ExitsDomain { time: *t });
        }
    }
    Ok(TangencyOutcome::StaysOnBoundary)
}
