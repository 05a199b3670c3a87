//! Coordinate charts, points, and tangent vectors.
//!
//! Everything in this crate works in a single chart: an open box in `R^n`
//! where individual coordinates may be periodic (angles on a cylinder) or
//! restricted to an open interval (a half-plane). Periodic coordinates are
//! stored canonically in `[0, period)`; differences between points are
//! always taken through the shortest representative.

use nalgebra::DVector;

use crate::error::{FinslerError, Result};

/// Per-coordinate description: an optional period and an optional open
/// interval of validity. A periodic coordinate ignores its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub period: Option<f64>,
    pub bounds: Option<(f64, f64)>,
}

impl Coordinate {
    fn free() -> Self {
        Coordinate {
            period: None,
            bounds: None,
        }
    }
}

/// A single coordinate chart of dimension >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coords: Vec<Coordinate>,
}

impl Chart {
    /// Chart covering all of `R^dim` with no periodicity.
    pub fn euclidean(dim: usize) -> Self {
        assert!(dim >= 1, "chart dimension must be at least 1");
        Chart {
            coords: vec![Coordinate::free(); dim],
        }
    }

    /// Marks coordinate `index` as periodic with the given period.
    pub fn with_period(mut self, index: usize, period: f64) -> Self {
        assert!(period > 0.0, "period must be positive");
        self.coords[index].period = Some(period);
        self.coords[index].bounds = None;
        self
    }

    /// Restricts coordinate `index` to the open interval `(lo, hi)`.
    /// Either end may be infinite.
    pub fn with_bounds(mut self, index: usize, lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "bounds must satisfy lo < hi");
        self.coords[index].bounds = Some((lo, hi));
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinate(&self, index: usize) -> &Coordinate {
        &self.coords[index]
    }

    /// First periodic coordinate, if any. Used for winding-class sweeps.
    pub fn first_periodic(&self) -> Option<(usize, f64)> {
        self.coords
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.period.map(|p| (i, p)))
    }

    pub(crate) fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// A point is valid when every non-periodic coordinate lies strictly
    /// inside its bound interval. Periodic coordinates are always valid.
    pub fn validate(&self, coords: &DVector<f64>) -> Result<()> {
        self.check_dim(coords)?;
        for (i, c) in self.coords.iter().enumerate() {
            let x = coords[i];
            if !x.is_finite() {
                return Err(FinslerError::PointOutsideChart { index: i, value: x });
            }
            if c.period.is_none() {
                if let Some((lo, hi)) = c.bounds {
                    if x <= lo || x >= hi {
                        return Err(FinslerError::PointOutsideChart { index: i, value: x });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, coords: &DVector<f64>) -> bool {
        self.validate(coords).is_ok()
    }

    /// Wraps periodic coordinates into `[0, period)` without validating.
    pub fn wrap(&self, mut coords: DVector<f64>) -> DVector<f64> {
        for (i, c) in self.coords.iter().enumerate() {
            if let Some(p) = c.period {
                coords[i] = coords[i].rem_euclid(p);
            }
        }
        coords
    }

    /// Canonical point construction: wrap, then validate.
    pub fn point(&self, coords: DVector<f64>) -> Result<ChartPoint> {
        let wrapped = self.wrap(coords);
        self.validate(&wrapped)?;
        Ok(ChartPoint { coords: wrapped })
    }

    pub fn point_from(&self, coords: &[f64]) -> Result<ChartPoint> {
        self.point(DVector::from_column_slice(coords))
    }

    /// Shortest-representative difference `b - a`, component-wise through
    /// the period on periodic coordinates. Differences already shorter
    /// than half a period pass through untouched (bitwise), so reversing
    /// a short segment negates its difference exactly.
    pub fn wrap_diff(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut d = b - a;
        for (i, c) in self.coords.iter().enumerate() {
            if let Some(p) = c.period {
                if d[i].abs() < 0.5 * p {
                    continue;
                }
                d[i] = (d[i] + 0.5 * p).rem_euclid(p) - 0.5 * p;
            }
        }
        d
    }

    /// Euclidean length of the shortest-representative difference.
    pub fn wrapped_distance(&self, a: &ChartPoint, b: &ChartPoint) -> f64 {
        self.wrap_diff(a.coords(), b.coords()).norm()
    }

    /// Closed interval used when drawing deterministic samples from the
    /// chart: the bound interval shrunk away from finite ends, one period
    /// on periodic coordinates, `[-1, 1]` on free ones.
    pub fn sample_interval(&self, index: usize) -> (f64, f64) {
        let c = &self.coords[index];
        if let Some(p) = c.period {
            return (0.0, p);
        }
        match c.bounds {
            Some((lo, hi)) if lo.is_finite() && hi.is_finite() => {
                let w = hi - lo;
                (lo + 0.05 * w, hi - 0.05 * w)
            }
            Some((lo, _)) if lo.is_finite() => (lo + 0.1, lo + 2.1),
            Some((_, hi)) if hi.is_finite() => (hi - 2.1, hi - 0.1),
            _ => (-1.0, 1.0),
        }
    }
}

/// A validated, canonically wrapped point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: DVector<f64>,
}

impl ChartPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }
}

/// A point together with a vector in the fiber over it.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub velocity: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, velocity: DVector<f64>) -> Self {
        TangentVector { base, velocity }
    }

    pub fn from_slices(chart: &Chart, base: &[f64], velocity: &[f64]) -> Result<Self> {
        let base = chart.point_from(base)?;
        let velocity = DVector::from_column_slice(velocity);
        chart.check_dim(&velocity)?;
        Ok(TangentVector { base, velocity })
    }
}
