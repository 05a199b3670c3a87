//! Deterministic sample generation for audits and convexity sweeps.
//!
//! Direction fans are reproducible functions of the seed: in one tangent
//! dimension the two unit directions alternate, in two the golden-angle
//! sequence fills the circle evenly, and in higher dimensions seeded
//! Gaussian directions are used. Chart samples come from a counter-mode
//! ChaCha stream so the same seed always yields the same batch.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::Chart;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point in the chart's per-coordinate sample intervals.
pub(crate) fn sample_coords(chart: &Chart, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        chart.dim(),
        (0..chart.dim()).map(|i| {
            let (lo, hi) = chart.sample_interval(i);
            rng.random_range(lo..hi)
        }),
    )
}

/// Nonzero vector with direction uniform on the sphere and Euclidean norm
/// in `[0.5, 2]`.
pub(crate) fn sample_velocity(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let dir = gaussian_direction(dim, rng);
    let scale: f64 = rng.random_range(0.5..2.0);
    dir * scale
}

fn gaussian_direction(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| standard_normal(rng)));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per normal keeps the stream layout simple.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Euclidean-orthonormal basis of the hyperplane orthogonal to `normal`.
pub(crate) fn orthonormal_complement(normal: &DVector<f64>) -> DMatrix<f64> {
    let n = normal.len();
    let unit = normal / normal.norm();
    // Householder reflection mapping e_1 to `unit`; columns 2..n of the
    // reflector then span the complement.
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let mut w = &unit - &e1;
    let wn = w.norm();
    let reflector = if wn < 1e-12 {
        DMatrix::identity(n, n)
    } else {
        w /= wn;
        DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
    };
    reflector.columns(1, n - 1).into_owned()
}

/// `count` unit directions inside the hyperplane orthogonal to `normal`.
pub(crate) fn tangent_directions(
    normal: &DVector<f64>,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let basis = orthonormal_complement(normal);
    let m = basis.ncols();
    match m {
        0 => Vec::new(),
        1 => {
            let t = basis.column(0).into_owned();
            (0..count)
                .map(|j| if j % 2 == 0 { t.clone() } else { -&t })
                .collect()
        }
        2 => {
            // Golden-angle fan, rotated deterministically by the seed.
            let golden = 0.618_033_988_749_894_9_f64;
            let offset = (seed as f64 * golden).fract();
            (0..count)
                .map(|j| {
                    let theta = std::f64::consts::TAU * ((j as f64 * golden + offset).fract());
                    let u = basis.column(0) * theta.cos() + basis.column(1) * theta.sin();
                    u
                })
                .collect()
        }
        _ => {
            let mut rng = rng_for(seed, 0x7461_6e67);
            (0..count)
                .map(|_| &basis * gaussian_direction(m, &mut rng))
                .collect()
        }
    }
}
