//! Geodesic spray and fixed-step geodesic integration.
//!
//! The spray contraction is assembled pointwise from the energy jet and
//! the fundamental tensor,
//!
//! ```text
//! spray^l = 1/2 g^{lj} ( y^k d2G/dy^j dx^k  -  dG/dx^j ),
//! ```
//!
//! so individual connection coefficients are never materialized.
//! Geodesics solve `x'' = -spray(x, x')` with a classical fixed-step RK4
//! scheme; the conserved speed `F(x, x')` is monitored as an accuracy
//! witness.

use nalgebra::DVector;
use std::sync::Arc;

use crate::chart::{Chart, ChartPoint, TangentVector};
use crate::error::{FinslerError, Result};
use crate::metric::FinslerMetric;

/// Relative speed drift beyond which a path is flagged inaccurate.
pub const DRIFT_WARN: f64 = 1.0e-3;
/// Drift target the exponential map refines its step to meet.
pub const EXP_DRIFT_TOL: f64 = 1.0e-6;
/// Hard cap on steps during exponential-map refinement.
const EXP_MAX_STEPS: usize = 1 << 16;

/// Velocities shorter than this are treated as the zero section, where
/// the spray vanishes by 2-homogeneity.
const TINY_VELOCITY: f64 = 1.0e-10;

/// The contraction values `spray^i(x, y)`.
#[derive(Clone, Debug)]
pub struct SprayCoefficients {
    pub values: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct Spray {
    metric: FinslerMetric,
}

/// A geodesic sampled on a uniform time grid. Points are wrapped into
/// the chart's canonical ranges; velocities are raw coordinate vectors.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<ChartPoint>,
    pub velocities: Vec<DVector<f64>>,
    /// Max relative drift of `F(x, x')` from its initial value.
    pub speed_drift: f64,
    /// True when integration stopped early at the chart boundary.
    pub left_chart: bool,
    /// True when the speed drift exceeds `DRIFT_WARN`.
    pub inaccurate: bool,
}

impl GeodesicPath {
    /// Wraps externally produced samples into a path, recomputing the
    /// speed-drift diagnostic under `metric`.
    pub fn from_samples(
        metric: &FinslerMetric,
        times: Vec<f64>,
        points: Vec<ChartPoint>,
        velocities: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != times.len() || points.len() != velocities.len() {
            return Err(FinslerError::parameter(
                "samples",
                "times, points, velocities must have equal nonzero length",
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FinslerError::parameter(
                "times",
                "must start at 0 and increase strictly",
            ));
        }
        let mut path = GeodesicPath {
            times,
            points,
            velocities,
            speed_drift: 0.0,
            left_chart: false,
            inaccurate: false,
        };
        path.speed_drift = constant_speed_drift(metric, &path)?;
        path.inaccurate = path.speed_drift > DRIFT_WARN;
        Ok(path)
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("path has at least the start node")
    }

    pub fn endpoint(&self) -> &ChartPoint {
        self.points
            .last()
            .expect("path has at least the start node")
    }

    pub fn endpoint_velocity(&self) -> &DVector<f64> {
        self.velocities
            .last()
            .expect("path has at least the start node")
    }
}

impl Spray {
    pub fn new(metric: FinslerMetric) -> Self {
        Spray { metric }
    }

    pub fn metric(&self) -> &FinslerMetric {
        &self.metric
    }

    fn chart(&self) -> Arc<Chart> {
        self.metric.chart_arc()
    }

    /// Spray coefficients at a validated tangent vector.
    pub fn coefficients(&self, v: &TangentVector) -> Result<SprayCoefficients> {
        self.metric.chart().validate(v.base.coords())?;
        self.metric.chart().check_dim(&v.velocity)?;
        if v.velocity.norm() == 0.0 {
            return Err(FinslerError::ZeroSectionDerivative);
        }
        Ok(SprayCoefficients {
            values: self.coefficients_raw(v.base.coords(), &v.velocity),
        })
    }

    /// Spray at raw coordinates. 2-homogeneous in `y`; zero on the zero
    /// section by continuity.
    pub(crate) fn coefficients_raw(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        let y_norm = y.norm();
        if y_norm < TINY_VELOCITY {
            return DVector::zeros(n);
        }
        if !(1.0e-4..=1.0e4).contains(&y_norm) {
            // Rescale onto the unit sphere: spray(x, s y) = s^2 spray(x, y).
            let unit = y / y_norm;
            return self.coefficients_raw(x, &unit) * (y_norm * y_norm);
        }

        if let Some(a) = self.metric.riemannian_parts() {
            // Quadratic energy: dG/dx_l = y' (d_l a) y, and the contracted
            // mixed block is 2 (sum_k y_k d_k a) y. Reversal is a no-op
            // because every term is even in y.
            let parts = a.partials(x);
            let mut m = parts[0].clone() * y[0];
            for k in 1..n {
                m += &parts[k] * y[k];
            }
            let c =
                DVector::from_iterator(n, parts.iter().map(|dk| (y.transpose() * dk * y)[(0, 0)]));
            let rhs = 2.0 * (&m * y) - c;
            let am = a.value(x);
            let sol = am
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .unwrap_or_else(|| am.lu().solve(&rhs).expect("tensor is invertible"));
            return 0.5 * sol;
        }

        // Generic path: a directional difference of the velocity gradient
        // along the curve direction replaces the contracted mixed block.
        let jet = self.metric.energy_jet_raw(x, y);
        let h = self.metric.fd_step_second() * x.norm().max(1.0);
        let t = h / y_norm;
        let jet_p = self.metric.energy_jet_raw(&(x + y * t), y);
        let jet_m = self.metric.energy_jet_raw(&(x - y * t), y);
        let mixed = (jet_p.y_gradient - jet_m.y_gradient) / (2.0 * t);
        let rhs = mixed - jet.x_gradient;
        let y_or = self.metric.orient_velocity(y);
        let g = self.metric.tensor_raw(x, &y_or);
        let sol = g
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| g.lu().solve(&rhs).expect("tensor is invertible"));
        0.5 * sol
    }

    /// Integrates the geodesic for `horizon > 0` with step size close to
    /// `step` (rounded so the grid covers the horizon exactly). Stops
    /// early, without an error, if a node leaves the chart.
    pub fn integrate(
        &self,
        start: &TangentVector,
        horizon: f64,
        step: f64,
    ) -> Result<GeodesicPath> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FinslerError::parameter(
                "horizon",
                "must be positive and finite",
            ));
        }
        if !(step > 0.0) || step > horizon {
            return Err(FinslerError::parameter(
                "step",
                "must satisfy 0 < step <= horizon",
            ));
        }
        let steps = (horizon / step).round().max(1.0) as usize;
        self.integrate_with_steps(start, horizon, steps)
    }

    /// Same as `integrate` with an explicit step count (`h = horizon/steps`).
    pub fn integrate_with_steps(
        &self,
        start: &TangentVector,
        horizon: f64,
        steps: usize,
    ) -> Result<GeodesicPath> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FinslerError::parameter(
                "horizon",
                "must be positive and finite",
            ));
        }
        if steps == 0 {
            return Err(FinslerError::parameter("steps", "must be at least 1"));
        }
        let chart = self.chart();
        chart.validate(start.base.coords())?;
        chart.check_dim(&start.velocity)?;
        if start.velocity.norm() == 0.0 {
            return Err(FinslerError::ZeroSectionDerivative);
        }

        let h = horizon / steps as f64;
        // The state is integrated without wrapping so winding stays
        // continuous; stored points are wrapped per node.
        let mut x = start.base.coords().clone();
        let mut y = start.velocity.clone();

        let f0 = self.metric.energy_raw(&x, &y).max(0.0).sqrt();
        let mut drift = 0.0f64;
        let mut times = Vec::with_capacity(steps + 1);
        let mut points = Vec::with_capacity(steps + 1);
        let mut velocities = Vec::with_capacity(steps + 1);
        times.push(0.0);
        points.push(start.base.clone());
        velocities.push(y.clone());
        let mut left_chart = false;

        for step_idx in 0..steps {
            let (nx, ny) = self.rk4_step(&x, &y, h);
            let finite = nx.iter().all(|c| c.is_finite()) && ny.iter().all(|c| c.is_finite());
            if !finite {
                left_chart = true;
                break;
            }
            let wrapped = chart.wrap(nx.clone());
            if !chart.is_valid(&wrapped) {
                left_chart = true;
                break;
            }
            x = nx;
            y = ny;
            times.push(h * (step_idx + 1) as f64);
            points.push(chart.point(wrapped).expect("validated above"));
            velocities.push(y.clone());
            let f = self.metric.energy_raw(&x, &y).max(0.0).sqrt();
            drift = drift.max((f - f0).abs() / f0.max(1e-12));
        }

        Ok(GeodesicPath {
            times,
            points,
            velocities,
            speed_drift: drift,
            left_chart,
            inaccurate: drift > DRIFT_WARN,
        })
    }

    fn rk4_step(&self, x: &DVector<f64>, y: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>) {
        let acc = |x: &DVector<f64>, y: &DVector<f64>| -self.coefficients_raw(x, y);
        let k1x = y.clone();
        let k1y = acc(x, y);
        let k2x = y + &k1y * (h / 2.0);
        let k2y = acc(&(x + &k1x * (h / 2.0)), &k2x);
        let k3x = y + &k2y * (h / 2.0);
        let k3y = acc(&(x + &k2x * (h / 2.0)), &k3x);
        let k4x = y + &k3y * h;
        let k4y = acc(&(x + &k3x * h), &k4x);
        let nx = x + (k1x + 2.0 * k2x + 2.0 * k3x + k4x) * (h / 6.0);
        let ny = y + (k1y + 2.0 * k2y + 2.0 * k3y + k4y) * (h / 6.0);
        (nx, ny)
    }

    /// Exponential map: the unit-time geodesic endpoint with initial
    /// velocity `v.velocity`. The step count doubles until the speed
    /// drift meets `EXP_DRIFT_TOL`. Errors if the geodesic exits the
    /// chart, carrying the last point reached.
    pub fn exponential(&self, v: &TangentVector) -> Result<ChartPoint> {
        if v.velocity.norm() < TINY_VELOCITY {
            self.metric.chart().validate(v.base.coords())?;
            return Ok(v.base.clone());
        }
        let speed = self.metric.energy_value(v)?.max(0.0).sqrt();
        let mut steps = ((speed / 0.02).ceil() as usize).clamp(16, 1024);
        loop {
            let path = self.integrate_with_steps(v, 1.0, steps)?;
            if path.left_chart {
                return Err(FinslerError::LeftChart {
                    exit: path.endpoint().coords().iter().cloned().collect(),
                });
            }
            if path.speed_drift <= EXP_DRIFT_TOL || steps >= EXP_MAX_STEPS {
                return Ok(path.endpoint().clone());
            }
            steps *= 2;
        }
    }
}

/// Exponential map under the forward or reversed metric.
pub fn exponential_map(
    metric: &FinslerMetric,
    x: &ChartPoint,
    v: &DVector<f64>,
    reversed: bool,
) -> Result<ChartPoint> {
    let m = if reversed {
        metric.reversed()
    } else {
        metric.clone()
    };
    Spray::new(m).exponential(&TangentVector::new(x.clone(), v.clone()))
}

/// Recomputes the relative speed drift of a path under `metric`.
/// Errors if the speed vanishes at any node (geodesics never stop).
pub fn constant_speed_drift(metric: &FinslerMetric, path: &GeodesicPath) -> Result<f64> {
    if path.points.is_empty() {
        return Err(FinslerError::parameter(
            "path",
            "must have at least one node",
        ));
    }
    let mut f0 = 0.0;
    let mut drift = 0.0f64;
    for (i, (p, v)) in path.points.iter().zip(&path.velocities).enumerate() {
        let f = metric.energy_raw(p.coords(), v).max(0.0).sqrt();
        if f <= 0.0 {
            return Err(FinslerError::DegeneratePath { node: i });
        }
        if i == 0 {
            f0 = f;
        } else {
            drift = drift.max((f - f0).abs() / f0);
        }
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::scenes;
    use approx::assert_abs_diff_eq;

    fn tv(metric: &FinslerMetric, x: &[f64], y: &[f64]) -> TangentVector {
        TangentVector::from_slices(metric.chart(), x, y).unwrap()
    }

    #[test]
    fn flat_metrics_have_zero_spray() {
        let euclid = FinslerMetric::euclidean(Chart::euclidean(3));
        let s = Spray::new(euclid.clone());
        let g = s
            .coefficients(&tv(&euclid, &[0.3, -0.9, 2.0], &[1.0, 2.0, -0.5]))
            .unwrap();
        assert_abs_diff_eq!(g.values.norm(), 0.0, epsilon = 1e-12);

        // Constant drift keeps geodesics straight; spray still vanishes
        // up to finite-difference noise.
        let randers = scenes::randers_constant(&[0.5, 0.0]).unwrap();
        let s = Spray::new(randers.clone());
        let g = s
            .coefficients(&tv(&randers, &[0.1, 0.4], &[0.8, -0.6]))
            .unwrap();
        assert!(g.values.norm() < 1e-5, "residual spray {}", g.values.norm());
    }

    #[test]
    fn hyperbolic_spray_matches_closed_form() {
        // At height 1 the spray is (-2uv, u^2 - v^2) for velocity (u, v).
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        for (u, v) in [(1.0, 0.0), (0.0, 1.0), (0.7, -1.3), (2.0, 0.5)] {
            let g = s.coefficients(&tv(&m, &[0.0, 1.0], &[u, v])).unwrap();
            assert_abs_diff_eq!(g.values[0], -2.0 * u * v, epsilon = 1e-9);
            assert_abs_diff_eq!(g.values[1], u * u - v * v, epsilon = 1e-9);
        }
    }

    #[test]
    fn spray_is_two_homogeneous() {
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let g1 = s.coefficients(&tv(&m, &[0.2, 1.5], &[0.4, -0.3])).unwrap();
        let g3 = s.coefficients(&tv(&m, &[0.2, 1.5], &[1.2, -0.9])).unwrap();
        assert_abs_diff_eq!(g3.values[0], 9.0 * g1.values[0], epsilon = 1e-9);
        assert_abs_diff_eq!(g3.values[1], 9.0 * g1.values[1], epsilon = 1e-9);
    }

    #[test]
    fn zero_velocity_spray_is_a_zero_section_error() {
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let err = s.coefficients(&tv(&m, &[0.0, 1.0], &[0.0, 0.0]));
        assert!(matches!(err, Err(FinslerError::ZeroSectionDerivative)));
    }

    #[test]
    fn vertical_hyperbolic_geodesic_is_exponential_in_height() {
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let path = s
            .integrate(&tv(&m, &[0.0, 1.0], &[0.0, 1.0]), 1.0, 1e-3)
            .unwrap();
        let end = path.endpoint();
        assert_abs_diff_eq!(end.coords()[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(end.coords()[1], std::f64::consts::E, epsilon = 1e-6);
        assert!(!path.left_chart);
        assert!(path.speed_drift < 1e-10, "drift {}", path.speed_drift);
        assert!(!path.inaccurate);
    }

    #[test]
    fn horizontal_launch_follows_the_unit_semicircle() {
        // Unit-speed geodesic from (0, 1) heading right: (tanh t, sech t).
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let t = 1.0f64;
        let path = s
            .integrate_with_steps(&tv(&m, &[0.0, 1.0], &[1.0, 0.0]), t, 400)
            .unwrap();
        let end = path.endpoint();
        assert_abs_diff_eq!(end.coords()[0], t.tanh(), epsilon = 1e-10);
        assert_abs_diff_eq!(end.coords()[1], 1.0 / t.cosh(), epsilon = 1e-10);
    }

    #[test]
    fn euclidean_straight_lines_are_exact() {
        let m = FinslerMetric::euclidean(Chart::euclidean(2));
        let s = Spray::new(m.clone());
        let path = s
            .integrate(&tv(&m, &[0.0, 0.0], &[1.0, 2.0]), 1.0, 0.01)
            .unwrap();
        let end = path.endpoint();
        assert_abs_diff_eq!(end.coords()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.coords()[1], 2.0, epsilon = 1e-12);
        assert!(path.speed_drift < 1e-14);
    }

    #[test]
    fn integration_stops_at_the_chart_boundary() {
        let chart = Chart::euclidean(2).with_bounds(0, -1.0, 1.0);
        let m = FinslerMetric::euclidean(chart);
        let s = Spray::new(m.clone());
        let path = s
            .integrate(&tv(&m, &[0.0, 0.0], &[1.0, 0.0]), 5.0, 0.01)
            .unwrap();
        assert!(path.left_chart);
        let last = path.endpoint();
        assert!(last.coords()[0] < 1.0);
        assert!(last.coords()[0] > 0.97);
    }

    #[test]
    fn exponential_map_recovers_flat_translation() {
        let m = FinslerMetric::euclidean(Chart::euclidean(2));
        let s = Spray::new(m.clone());
        let p = s.exponential(&tv(&m, &[1.0, -2.0], &[0.25, 0.5])).unwrap();
        assert_abs_diff_eq!(p.coords()[0], 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coords()[1], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn exponential_of_zero_velocity_is_the_base_point() {
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let p = s.exponential(&tv(&m, &[0.4, 2.0], &[0.0, 0.0])).unwrap();
        assert_eq!(p.coords()[0], 0.4);
        assert_eq!(p.coords()[1], 2.0);
    }

    #[test]
    fn forward_and_reversed_exponentials_agree_on_constant_drift() {
        // Straight geodesics for both orientations of a constant-drift
        // metric; only the traversal speed differs, not the image.
        let m = scenes::randers_constant(&[0.5, 0.0]).unwrap();
        let x = m.chart().point_from(&[0.0, 0.0]).unwrap();
        let v = DVector::from_column_slice(&[1.0, 0.0]);
        let fwd = exponential_map(&m, &x, &v, false).unwrap();
        let bwd = exponential_map(&m, &x, &v, true).unwrap();
        assert_abs_diff_eq!(fwd.coords()[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fwd.coords()[1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(bwd.coords()[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(bwd.coords()[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn periodic_coordinates_wrap_in_the_stored_path() {
        let m = scenes::flat_cylinder();
        let s = Spray::new(m.clone());
        let period = std::f64::consts::TAU;
        let path = s
            .integrate(&tv(&m, &[0.0, 0.0], &[period, 0.0]), 1.0, 0.01)
            .unwrap();
        // One full wrap returns to the start fiber.
        let end = path.endpoint();
        assert!(end.coords()[0] < 1e-9 || period - end.coords()[0] < 1e-9);
        assert_abs_diff_eq!(end.coords()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reversed_spray_evaluates_at_the_opposite_velocity() {
        let m = scenes::randers_constant(&[0.3, 0.1]).unwrap();
        let forward = Spray::new(m.clone());
        let backward = Spray::new(m.reversed());
        let f = forward
            .coefficients(&tv(&m, &[0.2, -0.4], &[-0.9, 0.5]))
            .unwrap();
        let b = backward
            .coefficients(&tv(&m, &[0.2, -0.4], &[0.9, -0.5]))
            .unwrap();
        assert_abs_diff_eq!(f.values[0], b.values[0], epsilon = 1e-7);
        assert_abs_diff_eq!(f.values[1], b.values[1], epsilon = 1e-7);
    }

    #[test]
    fn drift_monitor_flags_a_non_geodesic_polyline() {
        let m = FinslerMetric::euclidean(Chart::euclidean(2));
        let times = vec![0.0, 0.5, 1.0];
        let points = vec![
            m.chart().point_from(&[0.0, 0.0]).unwrap(),
            m.chart().point_from(&[0.5, 0.0]).unwrap(),
            m.chart().point_from(&[1.5, 0.0]).unwrap(),
        ];
        let velocities = vec![
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[2.0, 0.0]),
        ];
        let path = GeodesicPath::from_samples(&m, times, points, velocities).unwrap();
        assert!(path.speed_drift >= 0.1);
        assert!(path.inaccurate);
        let drift = constant_speed_drift(&m, &path).unwrap();
        assert_abs_diff_eq!(drift, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_speed_node_is_a_degenerate_path() {
        let m = FinslerMetric::euclidean(Chart::euclidean(2));
        let times = vec![0.0, 1.0];
        let points = vec![
            m.chart().point_from(&[0.0, 0.0]).unwrap(),
            m.chart().point_from(&[1.0, 0.0]).unwrap(),
        ];
        let velocities = vec![
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 0.0]),
        ];
        let err = GeodesicPath::from_samples(&m, times, points, velocities);
        assert!(matches!(err, Err(FinslerError::DegeneratePath { node: 1 })));
    }

    #[test]
    fn rk4_error_decays_at_fourth_order() {
        let m = scenes::hyperbolic_half_plane();
        let s = Spray::new(m.clone());
        let reference = (1.0f64.tanh(), 1.0 / 1.0f64.cosh());
        let mut errors = Vec::new();
        for steps in [25usize, 50, 100] {
            let path = s
                .integrate_with_steps(&tv(&m, &[0.0, 1.0], &[1.0, 0.0]), 1.0, steps)
                .unwrap();
            let end = path.endpoint();
            let e = ((end.coords()[0] - reference.0).powi(2)
                + (end.coords()[1] - reference.1).powi(2))
            .sqrt();
            errors.push(e);
        }
        let order1 = (errors[0] / errors[1]).log2();
        let order2 = (errors[1] / errors[2]).log2();
        assert!(order1 > 3.7, "observed order {order1}");
        assert!(order2 > 3.7, "observed order {order2}");
    }
}
