//! End-to-end runs of the `molrate` binary.

use std::path::Path;
use std::process::{Command, Output};

use molrate::core::analysis::lower_bound;
use molrate::io::{read_levels, read_pi};

fn molrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molrate"))
        .args(args)
        .env("MOLRATE_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-12 * a.abs().max(b.abs()) + 1e-300
}

const PHYSICS: [&str; 8] = [
    "--distance",
    "4",
    "--diffusion",
    "1",
    "--velocity",
    "1",
    "--slot",
    "3",
];

#[test]
fn bound_rows_match_direct_evaluation() {
    let text = stdout(&molrate(&["bound", "--r", "4", "--t-max", "10"]));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "r",
            "T",
            "theta",
            "A",
            "B",
            "bound",
            "r_above_theta",
            "threshold_ok"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    for (row, t) in rows.iter().zip(1u32..) {
        let expect = lower_bound(4.0, t).unwrap();
        assert_eq!(row[1].parse::<u32>().unwrap(), t);
        for (col, want) in [
            (2, expect.theta),
            (3, expect.a),
            (4, expect.b),
            (5, expect.value),
        ] {
            let got: f64 = row[col].parse().unwrap();
            assert!(close(got, want), "T={t} column {col}: {got} vs {want}");
        }
        assert_eq!(&row[6], if expect.r_above_theta { "1" } else { "0" });
        assert_eq!(&row[7], if expect.threshold_ok { "1" } else { "0" });
    }
}

fn simulate(dir: &Path, name: &str) -> Vec<u8> {
    let out = dir.join(name);
    let mut args = vec!["simulate"];
    args.extend(PHYSICS);
    args.extend([
        "--lambda0",
        "10",
        "--channel-memory",
        "10",
        "--memory-bits",
        "1",
        "--power",
        "80",
    ]);
    args.extend([
        "--slots",
        "5000",
        "--seed",
        "42",
        "--output",
        out.to_str().unwrap(),
    ]);
    stdout(&molrate(&args));
    std::fs::read(out).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = simulate(dir.path(), "a.csv");
    let second = simulate(dir.path(), "b.csv");
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn pi_and_levels_files_feed_later_commands() {
    let dir = tempfile::tempdir().unwrap();
    let pi_path = dir.path().join("pi.csv");
    let mut args = vec!["pi"];
    args.extend(PHYSICS);
    args.extend(["--memory", "10", "--output", pi_path.to_str().unwrap()]);
    stdout(&molrate(&args));
    assert_eq!(read_pi(&pi_path).unwrap().len(), 11);

    // levels from the saved pi file equal levels from the physics
    let from_file = dir.path().join("levels_file.csv");
    let from_physics = dir.path().join("levels_physics.csv");
    let pi_arg = pi_path.to_str().unwrap();
    stdout(&molrate(&[
        "levels",
        "--pi-file",
        pi_arg,
        "--lambda0",
        "10",
        "--memory-bits",
        "2",
        "--power",
        "80",
        "--output",
        from_file.to_str().unwrap(),
    ]));
    let mut args = vec!["levels"];
    args.extend(PHYSICS);
    args.extend([
        "--lambda0",
        "10",
        "--channel-memory",
        "10",
        "--memory-bits",
        "2",
        "--power",
        "80",
    ]);
    args.extend(["--output", from_physics.to_str().unwrap()]);
    stdout(&molrate(&args));
    let a = read_levels(&from_file).unwrap();
    let b = read_levels(&from_physics).unwrap();
    assert_eq!(a.memory_bits(), 2);
    // the file holds pi to 12 digits and the level solve amplifies that rounding
    let near = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
    for (x, y) in a.levels().iter().zip(b.levels()) {
        assert!(near(*x, *y), "{x} vs {y}");
    }
    assert!(near(a.target_c(), b.target_c()));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = molrate(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let out = molrate(&["bound", "--r", "0.5", "--t-max", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_succeeds() {
    let out = molrate(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}

#[test]
fn verify_battery_passes() {
    let out = molrate(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
