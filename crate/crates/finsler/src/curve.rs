//! Discrete curves: ordered chart points with a continuous lift.
//!
//! Nodes are stored canonically wrapped. All arithmetic on a curve goes
//! through its lift, where consecutive differences are the shortest
//! periodic representatives; plain vector differences on the lift then
//! preserve the winding class. Midpoints are always formed as
//! `(a + b) * 0.5`, which is symmetric under reversal, so reversing a
//! curve reverses every derived quantity exactly.

use std::sync::Arc;

use nalgebra::DVector;

use crate::chart::{Chart, ChartPoint};
use crate::domain::Domain;
use crate::error::{FinslerError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    chart: Arc<Chart>,
    nodes: Vec<ChartPoint>,
}

impl DiscreteCurve {
    /// Builds a curve from canonical nodes. At least one segment.
    pub fn new(chart: Arc<Chart>, nodes: Vec<ChartPoint>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(FinslerError::TooFewSegments {
                min: 1,
                got: nodes.len().saturating_sub(1),
            });
        }
        for n in &nodes {
            chart.check_dim(n.coords())?;
        }
        Ok(DiscreteCurve { chart, nodes })
    }

    /// Wraps a lifted node array back into canonical points.
    pub fn from_lift(chart: Arc<Chart>, lift: &[DVector<f64>]) -> Result<Self> {
        let nodes = lift
            .iter()
            .map(|x| chart.point(x.clone()))
            .collect::<Result<Vec<_>>>()?;
        DiscreteCurve::new(chart, nodes)
    }

    /// Uniform straight chord from `p` to `q` along the shortest
    /// periodic representative of their difference. Endpoints are kept
    /// bit-for-bit.
    pub fn chord(
        chart: Arc<Chart>,
        p: &ChartPoint,
        q: &ChartPoint,
        segments: usize,
    ) -> Result<Self> {
        DiscreteCurve::winding_chord(chart, p, q, segments, None)
    }

    /// Chord whose displacement is the shortest representative plus
    /// `winding[k]` full periods on each periodic coordinate `k`.
    /// Nonzero winding on a non-periodic coordinate is rejected.
    pub fn winding_chord(
        chart: Arc<Chart>,
        p: &ChartPoint,
        q: &ChartPoint,
        segments: usize,
        winding: Option<&[i64]>,
    ) -> Result<Self> {
        if segments < 1 {
            return Err(FinslerError::TooFewSegments { min: 1, got: 0 });
        }
        chart.check_dim(p.coords())?;
        chart.check_dim(q.coords())?;
        let mut delta = chart.wrap_diff(p.coords(), q.coords());
        if let Some(w) = winding {
            if w.len() != chart.dim() {
                return Err(FinslerError::DimensionMismatch {
                    expected: chart.dim(),
                    got: w.len(),
                });
            }
            for (k, &turns) in w.iter().enumerate() {
                if turns == 0 {
                    continue;
                }
                match chart.coordinate(k).period {
                    Some(period) => delta[k] += turns as f64 * period,
                    None => {
                        return Err(FinslerError::parameter(
                            "winding",
                            "nonzero entry on a non-periodic coordinate",
                        ))
                    }
                }
            }
        }
        let n = segments;
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(p.clone());
        for i in 1..n {
            let t = i as f64 / n as f64;
            let lifted = p.coords() + &delta * t;
            nodes.push(chart.point(lifted)?);
        }
        nodes.push(q.clone());
        DiscreteCurve::new(chart, nodes)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn chart_arc(&self) -> Arc<Chart> {
        Arc::clone(&self.chart)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, i: usize) -> &ChartPoint {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[ChartPoint] {
        &self.nodes
    }

    pub fn first(&self) -> &ChartPoint {
        &self.nodes[0]
    }

    pub fn last(&self) -> &ChartPoint {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Continuous lift: starts at the first node's coordinates and
    /// accumulates shortest-representative differences on periodic
    /// coordinates. Non-periodic coordinates pass through bit-for-bit,
    /// so on seam-free charts the lift is exactly the node array.
    pub fn lift(&self) -> Vec<DVector<f64>> {
        let periodic: Vec<usize> = (0..self.chart.dim())
            .filter(|&k| self.chart.coordinate(k).period.is_some())
            .collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        out.push(self.nodes[0].coords().clone());
        for i in 1..self.nodes.len() {
            let mut x = self.nodes[i].coords().clone();
            if !periodic.is_empty() {
                let d = self
                    .chart
                    .wrap_diff(self.nodes[i - 1].coords(), self.nodes[i].coords());
                for &k in &periodic {
                    x[k] = out[i - 1][k] + d[k];
                }
            }
            out.push(x);
        }
        out
    }

    /// The same polygon traversed backward.
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        DiscreteCurve {
            chart: Arc::clone(&self.chart),
            nodes,
        }
    }

    /// Piecewise-linear resample of the lift at uniform parameters.
    /// Doubling the segment count keeps the original nodes bit-for-bit
    /// and inserts exact symmetric midpoints.
    pub fn resample(&self, segments: usize) -> Result<Self> {
        if segments < 1 {
            return Err(FinslerError::TooFewSegments { min: 1, got: 0 });
        }
        let lift = self.lift();
        let n = self.segment_count();
        let mut new_lift = Vec::with_capacity(segments + 1);
        for j in 0..=segments {
            if j == 0 {
                new_lift.push(lift[0].clone());
                continue;
            }
            if j == segments {
                new_lift.push(lift[n].clone());
                continue;
            }
            let u = j as f64 * n as f64 / segments as f64;
            let i = (u.floor() as usize).min(n - 1);
            let s = u - i as f64;
            let a = &lift[i];
            let b = &lift[i + 1];
            let x = if s == 0.0 {
                a.clone()
            } else if s == 0.5 {
                (a + b) * 0.5
            } else {
                a + (b - a) * s
            };
            new_lift.push(x);
        }
        DiscreteCurve::from_lift(Arc::clone(&self.chart), &new_lift)
    }

    /// Minimum of the domain's boundary function over all nodes and all
    /// segment midpoints.
    pub fn min_phi(&self, domain: &Domain) -> f64 {
        let lift = self.lift();
        let mut min = f64::INFINITY;
        for node in &self.nodes {
            min = min.min(domain.phi(node.coords()));
        }
        for i in 0..lift.len() - 1 {
            let mid = self.chart.wrap((&lift[i] + &lift[i + 1]) * 0.5);
            min = min.min(domain.phi(&mid));
        }
        min
    }

    /// Largest wrapped node-to-node distance between two curves with the
    /// same node count. Used to decide whether two critical connectors
    /// are the same curve.
    pub fn max_node_distance(&self, other: &Self) -> Result<f64> {
        if self.node_count() != other.node_count() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.node_count(),
                got: other.node_count(),
            });
        }
        let mut sup: f64 = 0.0;
        for (a, b) in self.nodes.iter().zip(&other.nodes) {
            sup = sup.max(self.chart.wrapped_distance(a, b));
        }
        Ok(sup)
    }
}
