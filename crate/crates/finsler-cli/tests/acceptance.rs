//! End-to-end checks of the runner: byte-level determinism of repeated
//! runs and the print/reparse round trip of the expression language.

use std::path::Path;
use std::process::Command;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finsler_cli::expr::parse_field;

/// Random points for the evaluation round trip, per expression.
const ROUND_TRIP_POINTS: usize = 1000;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
}

fn write_scene(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

const DISK: &str = r#"
[chart]
dim = 2
bounds = [{ index = 0, lo = -1.0, hi = 1.0 }, { index = 1, lo = -1.0, hi = 1.0 }]

[metric]
kind = "euclidean"

[domain]
boundary = "1 - x1^2 - x2^2"

[endpoints]
p = [-0.5, 0.0]
q = [0.5, 0.0]
"#;

const CYLINDER: &str = r#"
[chart]
dim = 2
periods = [{ index = 0, period = 6.283185307179586 }]

[metric]
kind = "euclidean"

[endpoints]
p = [0.0, 0.0]
q = [1.0, 0.5]

[solver]
segments = 8
max_segments = 8
stages = 2
epsilon_start = 0.001
max_winding = 1
"#;

/// Repeated runs with a fixed scene and seed produce byte-identical
/// records and byte-identical curve files, echoed config included.
#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let disk = write_scene(dir.path(), "disk.toml", DISK);
    let cylinder = write_scene(dir.path(), "cylinder.toml", CYLINDER);

    let run = |args: &[&str], out: Option<&Path>| -> (Vec<u8>, Vec<u8>) {
        let mut command = binary();
        command.args(args);
        if let Some(path) = out {
            command.args(["--out", path.to_str().unwrap()]);
        }
        let output = command.output().unwrap();
        assert_eq!(
            output.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
        let curve = out
            .map(|path| std::fs::read(path).unwrap())
            .unwrap_or_default();
        (output.stdout, curve)
    };

    let first_out = dir.path().join("first.csv");
    let second_out = dir.path().join("second.csv");
    let connect = [
        "connect",
        "--scene",
        disk.as_str(),
        "--echo-config",
        "--seed",
        "9",
    ];
    let (stdout_a, curve_a) = run(&connect, Some(&first_out));
    let (stdout_b, curve_b) = run(&connect, Some(&second_out));
    assert_eq!(stdout_a, stdout_b, "connect records drifted between runs");
    assert!(!curve_a.is_empty());
    assert_eq!(curve_a, curve_b, "curve files drifted between runs");

    let audit = ["metric-audit", "--scene", disk.as_str(), "--seed", "13"];
    assert_eq!(run(&audit, None).0, run(&audit, None).0);

    let sweep = ["multiplicity", "--scene", cylinder.as_str()];
    assert_eq!(run(&sweep, None).0, run(&sweep, None).0);
}

/// Parsing, printing, and reparsing preserves evaluation bit-for-bit
/// on a thousand random points per expression.
#[test]
fn printed_expressions_evaluate_identically() {
    let battery = [
        "1 - x1^2 - x2^2",
        "(x1^2 + x2^2 - 1) * (4 - x1^2 - x2^2)",
        "1 / x2^2",
        "x2^-2",
        "sqrt(x1^2 + x2^2) - 1",
        "exp(0 - x1) * sin(3 * x2) + cos(x1 / 2)",
        "abs(x1 - x2) + log(x2 + 2)",
        "0.5 * x1 + 1e-3 * x2 - 2",
        "(x1 + x2) * (x1 - x2) / (1 + x1^2)",
        "2 ^ 8 - x1 ^ 3",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for text in battery {
        let parsed = parse_field(text).unwrap();
        let printed = parsed.print();
        let reparsed = parse_field(&printed)
            .unwrap_or_else(|e| panic!("printed form of {text:?} fails to parse: {e}"));
        for _ in 0..ROUND_TRIP_POINTS {
            let x = DVector::from_column_slice(&[
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..3.0),
            ]);
            let before = parsed.eval(&x);
            let after = reparsed.eval(&x);
            assert_eq!(
                before.to_bits(),
                after.to_bits(),
                "{text:?} -> {printed:?} changed value at {x:?}"
            );
        }
    }
}
