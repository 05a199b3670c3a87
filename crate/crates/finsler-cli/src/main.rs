//! Command dispatch: maps subcommands onto library calls and prints
//! results as line-delimited records. Exit codes: 0 success, 1 domain
//! or solver failure, 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use finsler::{
    epsilon_continuation, exponential_map, gronwall_null_check, infinitesimal_convexity_check,
    local_convexity_check, multiplicity_search, symmetrized_distance, tangency_probe, ChartPoint,
    ComparisonSolution, ConnectionKind, ContinuationOptions, ContinuationReport, OptimizeOptions,
    Spray, TangencyOutcome, TangentVector, Verdict,
};
use finsler_cli::output::{curve_csv, fmt_f64, path_csv, record};
use finsler_cli::scene::{build_scene, Scene, SceneConfig};

#[derive(Parser)]
#[command(
    name = "finsler",
    about = "Finsler metrics, geodesics, and boundary convexity from scene files",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene file (TOML).
    #[arg(long, value_name = "PATH")]
    scene: PathBuf,
    /// Write the relevant curve as CSV to this path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Echo the fully resolved scene configuration before the results.
    #[arg(long)]
    echo_config: bool,
    /// Override solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override solver.segments.
    #[arg(long)]
    segments: Option<usize>,
    /// Override solver.stages.
    #[arg(long)]
    stages: Option<usize>,
    /// Override solver.max_winding.
    #[arg(long)]
    max_winding: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the metric axioms on random tangent vectors.
    MetricAudit(Common),
    /// Integrate the geodesic from [initial] over solver.horizon.
    Geodesic(Common),
    /// Exponential map of [initial]: the time-one geodesic endpoint.
    Expmap(Common),
    /// Boundary convexity checks at [initial] point.
    Convexity {
        #[command(subcommand)]
        mode: ConvexityMode,
    },
    /// Penalized continuation between [endpoints].
    Connect(Common),
    /// One-sided and symmetrized distance between [endpoints].
    Distance(Common),
    /// Connector sweep over winding classes (periodic charts).
    Multiplicity(Common),
    /// Closed-form comparison solution and the generated-family check.
    GrnewOracle(Common),
}

#[derive(Subcommand)]
enum ConvexityMode {
    /// Second-order test over a direction fan.
    Infinitesimal(Common),
    /// Exponential-image test at the configured radii.
    Local(Common),
    /// Integrate a boundary-tangent geodesic and classify its exit.
    Tangency(Common),
}

/// Errors are a single line each; the variant fixes the exit code.
enum Failure {
    /// Bad configuration: malformed scene, missing sections, bad flags.
    Config(String),
    /// The scene is valid but the computation failed.
    Run(String),
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure::Config(message.into())
    }
}

impl From<finsler::FinslerError> for Failure {
    fn from(e: finsler::FinslerError) -> Self {
        // Parameter rejections trace back to scene values, so they are
        // configuration errors; everything else failed at runtime.
        match &e {
            finsler::FinslerError::InvalidParameter { .. } => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<finsler_cli::scene::ConfigError> for Failure {
    fn from(e: finsler_cli::scene::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn load_scene(common: &Common) -> Result<Scene, Failure> {
    let text = std::fs::read_to_string(&common.scene).map_err(|e| {
        Failure::config(format!("cannot read scene {}: {e}", common.scene.display()))
    })?;
    let mut config = SceneConfig::from_toml(&text)?;
    if let Some(seed) = common.seed {
        config.solver.seed = seed;
    }
    if let Some(segments) = common.segments {
        config.solver.segments = segments;
    }
    if let Some(stages) = common.stages {
        config.solver.stages = stages;
    }
    if let Some(max_winding) = common.max_winding {
        config.solver.max_winding = max_winding;
    }
    let scene = build_scene(config)?;
    if common.echo_config {
        print!("{}", scene.config.echo());
        println!();
    }
    Ok(scene)
}

fn chart_point(scene: &Scene, coords: &[f64], what: &str) -> Result<ChartPoint, Failure> {
    scene
        .metric
        .chart()
        .point_from(coords)
        .map_err(|e| Failure::config(format!("{what}: {e}")))
}

fn endpoints(scene: &Scene) -> Result<(ChartPoint, ChartPoint), Failure> {
    let Some(endpoints) = &scene.config.endpoints else {
        return Err(Failure::config("scene needs an [endpoints] section"));
    };
    let p = chart_point(scene, &endpoints.p, "endpoints.p")?;
    let q = chart_point(scene, &endpoints.q, "endpoints.q")?;
    Ok((p, q))
}

fn initial(scene: &Scene) -> Result<(ChartPoint, DVector<f64>), Failure> {
    let Some(initial) = &scene.config.initial else {
        return Err(Failure::config("scene needs an [initial] section"));
    };
    let point = chart_point(scene, &initial.point, "initial.point")?;
    if initial.velocity.len() != scene.metric.dim() {
        return Err(Failure::config(format!(
            "initial.velocity needs {} entries, got {}",
            scene.metric.dim(),
            initial.velocity.len()
        )));
    }
    Ok((point, DVector::from_column_slice(&initial.velocity)))
}

fn optimize_options(scene: &Scene) -> OptimizeOptions {
    OptimizeOptions {
        gradient_tolerance: scene.config.solver.gradient_tolerance,
        max_iterations: scene.config.solver.max_iterations,
        ..OptimizeOptions::default()
    }
}

fn continuation_options(scene: &Scene) -> ContinuationOptions {
    let solver = &scene.config.solver;
    ContinuationOptions {
        epsilon_start: solver.epsilon_start,
        epsilon_factor: solver.epsilon_factor,
        stages: solver.stages,
        initial_segments: solver.segments,
        max_segments: solver.max_segments,
        clearance: solver.clearance,
        residual_tolerance: solver.residual_tolerance,
        optimize: optimize_options(scene),
    }
}

fn write_out(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))
}

fn kind_label(kind: &ConnectionKind) -> String {
    match kind {
        ConnectionKind::InteriorGeodesic => "interior_geodesic".into(),
        ConnectionKind::BoundaryTouching => "boundary_touching".into(),
        ConnectionKind::Failed { stage } => format!("failed_stage_{stage}"),
    }
}

fn verdict_label(verdict: &Verdict) -> &'static str {
    match verdict {
        Verdict::Convex => "convex",
        Verdict::Nonconvex(_) => "nonconvex",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn coords_label(coords: &DVector<f64>) -> String {
    let parts: Vec<String> = coords.iter().map(|&c| fmt_f64(c)).collect();
    parts.join(",")
}

fn run_metric_audit(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let report = scene
        .metric
        .audit(scene.config.solver.samples, scene.config.solver.seed);
    println!(
        "{}",
        record(&[
            ("samples", report.requested.to_string()),
            ("evaluated", report.evaluated.to_string()),
            ("skipped", report.skipped.to_string()),
            (
                "max_homogeneity_residual",
                fmt_f64(report.max_homogeneity_residual),
            ),
            ("max_euler_residual", fmt_f64(report.max_euler_residual)),
            ("max_tensor_residual", fmt_f64(report.max_tensor_residual)),
            ("min_eigenvalue", fmt_f64(report.min_eigenvalue)),
            ("tolerance", fmt_f64(report.tolerance)),
            ("pass", report.pass.to_string()),
        ])
    );
    Ok(())
}

fn run_geodesic(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (point, velocity) = initial(&scene)?;
    let spray = Spray::new(scene.metric.clone());
    let start = TangentVector::new(point, velocity);
    let path = spray.integrate(
        &start,
        scene.config.solver.horizon,
        scene.config.solver.step,
    )?;
    println!(
        "{}",
        record(&[
            ("nodes", path.node_count().to_string()),
            ("final_time", fmt_f64(path.final_time())),
            ("endpoint", coords_label(path.endpoint().coords())),
            ("speed_drift", fmt_f64(path.speed_drift)),
            ("left_chart", path.left_chart.to_string()),
            ("inaccurate", path.inaccurate.to_string()),
        ])
    );
    if let Some(out) = &common.out {
        write_out(out, &path_csv(&scene.metric, &scene.domain, &path)?)?;
    }
    Ok(())
}

fn run_expmap(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (point, velocity) = initial(&scene)?;
    let image = exponential_map(&scene.metric, &point, &velocity, false)?;
    let reversed = exponential_map(&scene.metric, &point, &velocity, true)?;
    println!(
        "{}",
        record(&[
            ("endpoint", coords_label(image.coords())),
            ("reversed_endpoint", coords_label(reversed.coords())),
        ])
    );
    Ok(())
}

fn run_convexity_infinitesimal(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (point, _) = initial(&scene)?;
    let report = infinitesimal_convexity_check(
        &scene.metric,
        &scene.domain,
        &point,
        scene.config.solver.directions,
        scene.config.solver.seed,
    )?;
    let mut pairs = vec![
        ("verdict", verdict_label(&report.verdict).to_string()),
        ("samples", report.samples.len().to_string()),
        ("tolerance", fmt_f64(report.tolerance)),
        ("max_value", fmt_f64(report.max_value)),
    ];
    if let Verdict::Nonconvex(witness) = &report.verdict {
        pairs.push(("witness_direction", coords_label(&witness.direction)));
        pairs.push(("witness_value", fmt_f64(witness.value)));
    }
    if let Some(reversed) = &report.reversed_verdict {
        pairs.push(("reversed_verdict", verdict_label(reversed).to_string()));
    }
    println!("{}", record(&pairs));
    Ok(())
}

fn run_convexity_local(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (point, _) = initial(&scene)?;
    let report = local_convexity_check(
        &scene.metric,
        &scene.domain,
        &point,
        &scene.config.solver.radii,
        scene.config.solver.directions,
        scene.config.solver.seed,
    )?;
    let mut pairs = vec![
        ("verdict", verdict_label(&report.verdict).to_string()),
        ("samples", report.samples.len().to_string()),
        ("tolerance", fmt_f64(report.tolerance)),
    ];
    match report.largest_verified_radius {
        Some(radius) => pairs.push(("largest_verified_radius", fmt_f64(radius))),
        None => pairs.push(("largest_verified_radius", "none".to_string())),
    }
    if let Verdict::Nonconvex(witness) = &report.verdict {
        pairs.push(("witness_direction", coords_label(&witness.direction)));
        pairs.push(("witness_value", fmt_f64(witness.value)));
        if let Some(radius) = witness.radius {
            pairs.push(("witness_radius", fmt_f64(radius)));
        }
    }
    println!("{}", record(&pairs));
    Ok(())
}

fn run_convexity_tangency(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (point, velocity) = initial(&scene)?;
    let outcome = tangency_probe(
        &scene.metric,
        &scene.domain,
        &point,
        &velocity,
        scene.config.solver.horizon,
        scene.config.solver.step,
    )?;
    let pairs = match outcome {
        TangencyOutcome::StaysOnBoundary => vec![("outcome", "stays_on_boundary".to_string())],
        TangencyOutcome::ExitsDomain { time } => vec![
            ("outcome", "exits_domain".to_string()),
            ("time", fmt_f64(time)),
        ],
        TangencyOutcome::EntersDomain { time, phi } => vec![
            ("outcome", "enters_domain".to_string()),
            ("time", fmt_f64(time)),
            ("phi", fmt_f64(phi)),
        ],
    };
    println!("{}", record(&pairs));
    Ok(())
}

fn print_continuation(report: &ContinuationReport) {
    for (i, stage) in report.stages.iter().enumerate() {
        let d = &stage.diagnostics;
        println!(
            "{}",
            record(&[
                ("stage", i.to_string()),
                ("epsilon", fmt_f64(stage.epsilon)),
                ("segments", stage.segments.to_string()),
                ("energy", fmt_f64(d.energy)),
                ("length", fmt_f64(d.length)),
                ("min_phi", fmt_f64(d.min_phi)),
                ("lambda_sup", fmt_f64(d.lambda_sup)),
                ("penalty_force", fmt_f64(d.penalty_force)),
                ("conservation_residual", fmt_f64(d.conservation_residual)),
                ("geodesic_residual", fmt_f64(d.geodesic_residual)),
                ("gradient_norm", fmt_f64(d.gradient_norm)),
                ("iterations", d.iterations.to_string()),
            ])
        );
    }
}

fn run_connect(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (p, q) = endpoints(&scene)?;
    let options = continuation_options(&scene);
    let report = epsilon_continuation(&scene.metric, &scene.domain, &p, &q, &options)?;
    print_continuation(&report);
    let limit = report.limit();
    println!(
        "{}",
        record(&[
            ("classification", kind_label(&report.kind)),
            ("length", fmt_f64(limit.length)),
            ("energy", fmt_f64(limit.energy)),
            ("min_phi", fmt_f64(limit.min_phi)),
        ])
    );
    if let Some(out) = &common.out {
        write_out(out, &curve_csv(&scene.metric, &scene.domain, &limit.curve)?)?;
    }
    Ok(())
}

fn run_distance(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (p, q) = endpoints(&scene)?;
    let options = optimize_options(&scene);
    let segments = scene.config.solver.segments;
    let symmetrized = symmetrized_distance(&scene.metric, &p, &q, segments, &options)?;
    println!(
        "{}",
        record(&[
            ("forward", fmt_f64(symmetrized.forward.length)),
            ("backward", fmt_f64(symmetrized.backward.length)),
            ("symmetrized", fmt_f64(symmetrized.value)),
            (
                "asymmetry",
                fmt_f64(symmetrized.forward.length - symmetrized.backward.length),
            ),
            (
                "forward_iterations",
                symmetrized.forward.iterations.to_string(),
            ),
            (
                "backward_iterations",
                symmetrized.backward.iterations.to_string(),
            ),
        ])
    );
    if let Some(out) = &common.out {
        write_out(
            out,
            &curve_csv(&scene.metric, &scene.domain, &symmetrized.forward.curve)?,
        )?;
    }
    Ok(())
}

fn run_multiplicity(common: &Common) -> Result<(), Failure> {
    let scene = load_scene(common)?;
    let (p, q) = endpoints(&scene)?;
    let options = continuation_options(&scene);
    let branches = multiplicity_search(
        &scene.metric,
        &scene.domain,
        &p,
        &q,
        scene.config.solver.max_winding,
        &options,
    )?;
    println!("{}", record(&[("branches", branches.len().to_string())]));
    for branch in &branches {
        let limit = branch.limit();
        println!(
            "{}",
            record(&[
                ("winding", branch.winding.to_string()),
                ("classification", kind_label(&branch.report.kind)),
                ("length", fmt_f64(limit.length)),
                ("min_phi", fmt_f64(limit.min_phi)),
            ])
        );
    }
    Ok(())
}

/// The same non-negative vanishing-anchor family as the library tests:
/// `amp * t^2 * (c0 + c1 sin 3t + c2 cos 5t)^2` with coefficients drawn
/// from the scene seed.
fn run_grnew_oracle(common: &Common) -> Result<(), Failure> {
    use rand::{Rng, SeedableRng};

    let scene = load_scene(common)?;
    let cmp = &scene.config.comparison;
    let solution = ComparisonSolution::new(cmp.a, cmp.t_anchor, cmp.psi_anchor)
        .map_err(|e| Failure::config(format!("comparison: {e}")))?;
    println!(
        "{}",
        record(&[
            ("lambda_minus", fmt_f64(solution.lambda_minus)),
            ("lambda_plus", fmt_f64(solution.lambda_plus)),
            ("c_minus", fmt_f64(solution.c_minus)),
            ("c_plus", fmt_f64(solution.c_plus)),
            ("value_at_anchor", fmt_f64(solution.value(cmp.t_anchor))),
            ("slope_at_anchor", fmt_f64(solution.slope(cmp.t_anchor))),
        ])
    );

    if cmp.grid < 3 {
        return Err(Failure::config("comparison.grid must be at least 3"));
    }
    let times: Vec<f64> = (0..cmp.grid)
        .map(|i| i as f64 / (cmp.grid - 1) as f64)
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scene.config.solver.seed);
    let mut hypothesis_held = 0usize;
    let mut counterexamples = 0usize;
    for member in 0..cmp.family {
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let amplitude = if member % 5 == 0 { 1.0e-10 } else { 1.0 };
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let shape = c[0] + c[1] * (3.0 * t).sin() + c[2] * (5.0 * t).cos();
                amplitude * t * t * shape * shape
            })
            .collect();
        let report = gronwall_null_check(cmp.a, &times, &values)?;
        if report.hypothesis_holds {
            hypothesis_held += 1;
            if !report.conclusion_holds {
                counterexamples += 1;
            }
        }
    }
    println!(
        "{}",
        record(&[
            ("family", cmp.family.to_string()),
            ("hypothesis_held", hypothesis_held.to_string()),
            ("counterexamples", counterexamples.to_string()),
        ])
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::MetricAudit(common) => run_metric_audit(common),
        Command::Geodesic(common) => run_geodesic(common),
        Command::Expmap(common) => run_expmap(common),
        Command::Convexity { mode } => match mode {
            ConvexityMode::Infinitesimal(common) => run_convexity_infinitesimal(common),
            ConvexityMode::Local(common) => run_convexity_local(common),
            ConvexityMode::Tangency(common) => run_convexity_tangency(common),
        },
        Command::Connect(common) => run_connect(common),
        Command::Distance(common) => run_distance(common),
        Command::Multiplicity(common) => run_multiplicity(common),
        Command::GrnewOracle(common) => run_grnew_oracle(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(2)
        }
    }
}
