//! Line-delimited `key=value` records and CSV curve dumps.
//!
//! Numbers are printed with 17 significant digits, enough to
//! reconstruct any double exactly; lines end with LF.

use std::fmt::Write as _;

use finsler::{DiscreteCurve, Domain, FinslerMetric, GeodesicPath, Result, TangentVector};

/// A double with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One result record: space-separated `key=value` pairs.
pub fn record(pairs: &[(&str, String)]) -> String {
    let mut line = String::new();
    for (i, (key, value)) in pairs.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{key}={value}");
    }
    line
}

fn csv_header(dim: usize) -> String {
    let mut header = String::from("s");
    for k in 1..=dim {
        let _ = write!(header, ",x{k}");
    }
    header.push_str(",F_speed,phi");
    header
}

fn csv_row(s: f64, coords: &[f64], speed: f64, phi: f64) -> String {
    let mut row = fmt_f64(s);
    for &c in coords {
        let _ = write!(row, ",{}", fmt_f64(c));
    }
    let _ = write!(row, ",{},{}", fmt_f64(speed), fmt_f64(phi));
    row
}

/// CSV dump of a discrete curve: arc parameter, coordinates, the
/// metric speed of the chord through each node, and the boundary
/// function. Node velocities are central differences of the lift,
/// one-sided at the ends.
pub fn curve_csv(metric: &FinslerMetric, domain: &Domain, curve: &DiscreteCurve) -> Result<String> {
    let lift = curve.lift();
    let n = curve.segment_count();
    let dim = metric.dim();
    let mut out = csv_header(dim);
    out.push('\n');
    for (i, node) in curve.nodes().iter().enumerate() {
        let velocity = if i == 0 {
            (&lift[1] - &lift[0]) * n as f64
        } else if i == n {
            (&lift[n] - &lift[n - 1]) * n as f64
        } else {
            (&lift[i + 1] - &lift[i - 1]) * (n as f64 / 2.0)
        };
        let speed = metric.norm(&TangentVector::new(node.clone(), velocity))?;
        let phi = domain.phi(node.coords());
        out.push_str(&csv_row(
            i as f64 / n as f64,
            node.coords().as_slice(),
            speed,
            phi,
        ));
        out.push('\n');
    }
    Ok(out)
}

/// CSV dump of an integrated geodesic with its sampled velocities.
pub fn path_csv(metric: &FinslerMetric, domain: &Domain, path: &GeodesicPath) -> Result<String> {
    let dim = metric.dim();
    let mut out = csv_header(dim);
    out.push('\n');
    for i in 0..path.node_count() {
        let point = &path.points[i];
        let speed = metric.norm(&TangentVector::new(
            point.clone(),
            path.velocities[i].clone(),
        ))?;
        let phi = domain.phi(point.coords());
        out.push_str(&csv_row(
            path.times[i],
            point.coords().as_slice(),
            speed,
            phi,
        ));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use finsler::scenes;

    #[test]
    fn records_and_numbers_format_stably() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(
            record(&[("verdict", "convex".into()), ("n", "3".into())]),
            "verdict=convex n=3"
        );
    }

    #[test]
    fn printed_doubles_reconstruct_exactly() {
        for v in [0.1, std::f64::consts::PI, 2.0 / 3.0, 1.0e-17, 123456.789] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn curve_csv_has_header_rows_and_lf_endings() {
        let (metric, domain) = scenes::euclidean_disk();
        let chart = metric.chart_arc();
        let p = chart.point_from(&[-0.5, 0.0]).unwrap();
        let q = chart.point_from(&[0.5, 0.0]).unwrap();
        let curve = DiscreteCurve::chord(chart, &p, &q, 4).unwrap();
        let csv = curve_csv(&metric, &domain, &curve).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,x1,x2,F_speed,phi");
        assert_eq!(lines.len(), 6);
        assert!(!csv.contains('\r'));
        assert!(csv.ends_with('\n'));
        // The chord has unit Euclidean speed: |q - p| = 1.
        let first_row: Vec<&str> = lines[1].split(',').collect();
        let speed: f64 = first_row[3].parse().unwrap();
        assert!((speed - 1.0).abs() < 1e-12);
    }
}
