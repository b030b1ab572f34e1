use std::path::Path;
use std::process::Command;

use inexact_bench::emit::{emit_trace, read_trace, TraceBuffer};
use inexact_bench::{
    execute, generate_problem, run_suite, ProblemKind, RunConfig, RunOptions, SolverDescriptor, SuiteConfig,
};
use inexact_bench::config::ProblemDescriptor;
use inexact_opt::trace::Cell;

fn run(name: &str, kind: ProblemKind, dim: usize, seed: u64, solver: SolverDescriptor) -> RunConfig {
    RunConfig {
        name: name.into(),
        problem: ProblemDescriptor {
            kind,
            dim,
            seed,
            value_error: 0.0,
            gradient_error: 0.0,
        },
        solver,
        trace_file: None,
        report_file: None,
    }
}

fn exact_suite() -> SuiteConfig {
    SuiteConfig {
        runs: vec![
            run(
                "gd",
                ProblemKind::Quadratic,
                10,
                7,
                SolverDescriptor::Gd {
                    l0: 1.0,
                    gradient_error0: 0.01,
                    value_error0: 0.01,
                    mu: 0.0,
                    iterations: 100,
                },
            ),
            run(
                "fgm",
                ProblemKind::Quadratic,
                10,
                8,
                SolverDescriptor::Fgm {
                    l0: 1.0,
                    gradient_error0: 0.01,
                    value_error0: 0.01,
                    iterations: 100,
                },
            ),
            run(
                "game",
                ProblemKind::DiagonalGame,
                2,
                0,
                SolverDescriptor::MirrorProx {
                    epsilon: 1e-3,
                    l0: 1.0,
                    gradient_error0: 0.0,
                    swap_divergence: false,
                },
            ),
        ],
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn exact_suite_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_suite(&exact_suite(), dir.path(), 3, RunOptions::default()).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.runs.len(), 3);
    let names: Vec<_> = summary.runs.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, ["gd", "fgm", "game"]);
    for n in names {
        assert!(dir.path().join(format!("{n}.json")).exists());
        assert!(dir.path().join(format!("{n}.csv")).exists());
    }
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_suite(&exact_suite(), a.path(), 1, RunOptions::default()).unwrap();
    run_suite(&exact_suite(), b.path(), 4, RunOptions::default()).unwrap();
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn generated_json_is_deterministic() {
    for kind in ProblemKind::ALL {
        let dim = if kind == ProblemKind::MaxAffine { 4 } else { 3 };
        let a = serde_json::to_string(&generate_problem(kind, dim, 42).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_problem(kind, dim, 42).unwrap()).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn under_declared_gradient_error_fails_validation() {
    let cfg = run(
        "abs",
        ProblemKind::HomogeneousNormConstrained,
        1,
        3,
        SolverDescriptor::ValidateModel {
            value_error: 0.0,
            gradient_error: 0.0,
            smoothness: 1.0,
            strong_convexity: 0.0,
            samples: 2000,
            spread: 1.0,
        },
    );
    let out = execute(&cfg, RunOptions::default());
    assert!(!out.report.passed);
    assert!(out.report.consistent());
}

#[test]
fn trace_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let values = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0 - f64::EPSILON];
    let trace = TraceBuffer {
        columns: &["k", "x", "flag"],
        rows: values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![Cell::from(i), Cell::from(*v), Cell::from(i % 2 == 0)])
            .collect(),
    };
    let path = dir.path().join("t.csv");
    emit_trace(&trace, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), values.len() + 1);
    let (header, rows) = read_trace(&path).unwrap();
    assert_eq!(header, ["k", "x", "flag"]);
    for (row, v) in rows.iter().zip(values) {
        assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

#[test]
fn empty_trace_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_trace(&TraceBuffer { columns: &["k", "f"], rows: vec![] }, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "k,f\n");
}

#[test]
fn io_errors_name_the_path() {
    let err = SuiteConfig::load(Path::new("/nonexistent/suite.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/suite.json"));
}

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inexact-bench"))
}

#[test]
fn cli_exit_code_follows_checks() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, serde_json::to_string(&exact_suite()).unwrap()).unwrap();
    let out = dir.path().join("out");
    let status = bench()
        .args(["run", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let certify = bench().args(["certify", "--report"]).arg(out.join("gd.json")).output().unwrap();
    assert!(certify.status.success(), "{}", String::from_utf8_lossy(&certify.stdout));

    let bad = SuiteConfig {
        runs: vec![run(
            "abs",
            ProblemKind::HomogeneousNormConstrained,
            1,
            3,
            SolverDescriptor::ValidateModel {
                value_error: 0.0,
                gradient_error: 0.0,
                smoothness: 1.0,
                strong_convexity: 0.0,
                samples: 1000,
                spread: 1.0,
            },
        )],
    };
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, serde_json::to_string(&bad).unwrap()).unwrap();
    let status = bench()
        .args(["run", "--config"])
        .arg(&bad_path)
        .env("INEXACT_BENCH_OUT", dir.path().join("env-out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(dir.path().join("env-out").join("abs.json").exists());
}

#[test]
fn cli_validate_reports_both_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("abs.json");
    let g = generate_problem(ProblemKind::HomogeneousNormConstrained, 1, 0).unwrap();
    std::fs::write(&problem, serde_json::to_string(&g).unwrap()).unwrap();
    let ok = bench()
        .args(["validate", "--problem"])
        .arg(&problem)
        .args(["--params", "0,2,0.01,0", "--samples", "2000"])
        .status()
        .unwrap();
    assert!(ok.success());
    let fail = bench()
        .args(["validate", "--problem"])
        .arg(&problem)
        .args(["--params", "0,0,1,0", "--samples", "2000"])
        .status()
        .unwrap();
    assert_eq!(fail.code(), Some(1));
}
