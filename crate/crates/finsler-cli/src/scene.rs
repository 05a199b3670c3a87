//! Scene files: a TOML description of chart, metric, domain, endpoints,
//! and solver parameters, plus the builder that turns one into library
//! objects.
//!
//! Unknown keys are rejected. Every defaulted value is materialized
//! into the parsed struct, so re-serializing the config echoes the
//! fully resolved scene.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use finsler::{Chart, Domain, FinslerMetric, MatrixField, ScalarField, VectorField};

use crate::expr::parse_field;

/// Configuration error: a single human-readable line, no stack trace.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(message.into()))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodEntry {
    pub index: usize,
    pub period: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub dim: usize,
    #[serde(default)]
    pub periods: Vec<PeriodEntry>,
    #[serde(default)]
    pub bounds: Vec<BoundsEntry>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// One of `euclidean`, `riemannian`, `randers`.
    pub kind: String,
    /// Row-major `dim * dim` coefficient expressions of the symmetric
    /// part. Required for `riemannian`, optional for `randers`
    /// (identity when absent), rejected for `euclidean`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<String>>,
    /// Constant drift covector; `randers` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Boundary function expression; the domain is `boundary > 0`.
    /// Absent means the whole chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsConfig {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
}

fn default_segments() -> usize {
    64
}
fn default_max_segments() -> usize {
    256
}
fn default_epsilon_start() -> f64 {
    1.0
}
fn default_epsilon_factor() -> f64 {
    0.1
}
fn default_stages() -> usize {
    5
}
fn default_clearance() -> f64 {
    0.05
}
fn default_residual_tolerance() -> f64 {
    1.0e-3
}
fn default_gradient_tolerance() -> f64 {
    1.0e-6
}
fn default_max_iterations() -> usize {
    10_000
}
fn default_seed() -> u64 {
    42
}
fn default_samples() -> usize {
    1024
}
fn default_directions() -> usize {
    64
}
fn default_radii() -> Vec<f64> {
    vec![0.0125, 0.025, 0.05, 0.1]
}
fn default_horizon() -> f64 {
    1.0
}
fn default_step() -> f64 {
    1.0e-3
}
fn default_max_winding() -> u32 {
    2
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_factor")]
    pub epsilon_factor: f64,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Sample count for metric audits.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Directions per fan in convexity checks.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Probe radii for local convexity checks, smallest first.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Integration horizon for geodesics and tangency probes.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Integration step for geodesics and tangency probes.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_max_winding")]
    pub max_winding: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            segments: default_segments(),
            max_segments: default_max_segments(),
            epsilon_start: default_epsilon_start(),
            epsilon_factor: default_epsilon_factor(),
            stages: default_stages(),
            clearance: default_clearance(),
            residual_tolerance: default_residual_tolerance(),
            gradient_tolerance: default_gradient_tolerance(),
            max_iterations: default_max_iterations(),
            seed: default_seed(),
            samples: default_samples(),
            directions: default_directions(),
            radii: default_radii(),
            horizon: default_horizon(),
            step: default_step(),
            max_winding: default_max_winding(),
        }
    }
}

fn default_t_anchor() -> f64 {
    0.7
}
fn default_psi_anchor() -> f64 {
    1.3
}
fn default_rate() -> f64 {
    1.0
}
fn default_family() -> usize {
    100
}
fn default_grid() -> usize {
    201
}

/// Parameters of the comparison-dynamics oracle.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    #[serde(default = "default_rate")]
    pub a: f64,
    #[serde(default = "default_t_anchor")]
    pub t_anchor: f64,
    #[serde(default = "default_psi_anchor")]
    pub psi_anchor: f64,
    /// Members of the generated test-function family.
    #[serde(default = "default_family")]
    pub family: usize,
    /// Grid points on `[0, 1]`.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            a: default_rate(),
            t_anchor: default_t_anchor(),
            psi_anchor: default_psi_anchor(),
            family: default_family(),
            grid: default_grid(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub chart: ChartConfig,
    pub metric: MetricConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<EndpointsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub comparison: ComparisonConfig,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            // One line, not the multi-line caret diagnostic.
            let position = match e.span() {
                Some(span) => format!(" at bytes {}..{}", span.start, span.end),
                None => String::new(),
            };
            ConfigError(format!("scene parse error{position}: {}", e.message()))
        })
    }

    /// The resolved scene, defaults included, as deterministic TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }
}

/// Library objects built from a scene file.
#[derive(Debug)]
pub struct Scene {
    pub metric: FinslerMetric,
    pub domain: Domain,
    pub config: SceneConfig,
}

fn build_chart(config: &ChartConfig) -> Result<Chart, ConfigError> {
    if config.dim == 0 {
        return config_err("chart.dim must be at least 1");
    }
    let mut chart = Chart::euclidean(config.dim);
    for entry in &config.periods {
        if entry.index >= config.dim {
            return config_err(format!(
                "chart.periods index {} exceeds dimension {}",
                entry.index, config.dim
            ));
        }
        if !(entry.period > 0.0) {
            return config_err(format!(
                "chart.periods period must be positive, got {}",
                entry.period
            ));
        }
        chart = chart.with_period(entry.index, entry.period);
    }
    for entry in &config.bounds {
        if entry.index >= config.dim {
            return config_err(format!(
                "chart.bounds index {} exceeds dimension {}",
                entry.index, config.dim
            ));
        }
        if !(entry.lo < entry.hi) {
            return config_err(format!(
                "chart.bounds needs lo < hi, got [{}, {}]",
                entry.lo, entry.hi
            ));
        }
        chart = chart.with_bounds(entry.index, entry.lo, entry.hi);
    }
    Ok(chart)
}

/// Parses, binds, and packages a coefficient matrix of expressions.
fn build_matrix_field(entries: &[String], dim: usize) -> Result<MatrixField, ConfigError> {
    if entries.len() != dim * dim {
        return config_err(format!(
            "metric.coefficients needs {} entries for dimension {}, got {}",
            dim * dim,
            dim,
            entries.len()
        ));
    }
    let mut parsed = Vec::with_capacity(entries.len());
    for (slot, text) in entries.iter().enumerate() {
        let expr = parse_field(text)
            .map_err(|e| ConfigError(format!("metric.coefficients[{slot}]: {e}")))?;
        expr.bind(dim)
            .map_err(|e| ConfigError(format!("metric.coefficients[{slot}]: {e}")))?;
        parsed.push(expr.evaluator());
    }
    Ok(MatrixField::from_fn(move |x: &DVector<f64>| {
        DMatrix::from_fn(dim, dim, |i, j| parsed[i * dim + j](x))
    }))
}

fn build_metric(chart: Chart, config: &MetricConfig) -> Result<FinslerMetric, ConfigError> {
    let dim = chart.dim();
    match config.kind.as_str() {
        "euclidean" => {
            if config.coefficients.is_some() || config.drift.is_some() {
                return config_err("euclidean metric takes no coefficients or drift");
            }
            Ok(FinslerMetric::euclidean(chart))
        }
        "riemannian" => {
            if config.drift.is_some() {
                return config_err("riemannian metric takes no drift; use kind = \"randers\"");
            }
            let Some(entries) = &config.coefficients else {
                return config_err("riemannian metric requires metric.coefficients");
            };
            let a = build_matrix_field(entries, dim)?;
            FinslerMetric::riemannian(chart, a)
                .map_err(|e| ConfigError(format!("invalid riemannian metric: {e}")))
        }
        "randers" => {
            let Some(drift) = &config.drift else {
                return config_err("randers metric requires metric.drift");
            };
            if drift.len() != dim {
                return config_err(format!(
                    "metric.drift needs {dim} entries, got {}",
                    drift.len()
                ));
            }
            let a = match &config.coefficients {
                Some(entries) => build_matrix_field(entries, dim)?,
                None => MatrixField::identity(dim),
            };
            let b = VectorField::constant(DVector::from_column_slice(drift));
            FinslerMetric::randers(chart, a, b)
                .map_err(|e| ConfigError(format!("invalid randers metric: {e}")))
        }
        other => config_err(format!(
            "unknown metric kind '{other}'; expected euclidean, riemannian, or randers"
        )),
    }
}

fn build_domain(chart: &Chart, config: &DomainConfig) -> Result<Domain, ConfigError> {
    let Some(text) = &config.boundary else {
        return Ok(Domain::full(chart.clone()));
    };
    let expr = parse_field(text).map_err(|e| ConfigError(format!("domain.boundary: {e}")))?;
    expr.bind(chart.dim())
        .map_err(|e| ConfigError(format!("domain.boundary: {e}")))?;
    let phi = ScalarField::from_fn(expr.evaluator());
    Domain::new(chart.clone(), phi).map_err(|e| ConfigError(format!("invalid domain: {e}")))
}

/// Builds the metric and domain described by a scene config.
pub fn build_scene(config: SceneConfig) -> Result<Scene, ConfigError> {
    let chart = build_chart(&config.chart)?;
    let domain = build_domain(&chart, &config.domain)?;
    let metric = build_metric(chart, &config.metric)?;
    Ok(Scene {
        metric,
        domain,
        config,
    })
}
