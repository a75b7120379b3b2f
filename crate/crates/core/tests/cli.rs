use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cutoff-fd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.push("--out");
    all.push(dir.to_str().unwrap());
    run(&all)
}

/// Least-squares slope of `log y` against `log x`, computed directly.
fn fit(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (sx, sy) = (lx.iter().sum::<f64>(), ly.iter().sum::<f64>());
    let sxx: f64 = lx.iter().map(|a| a * a).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_values_exit_2() {
    assert_eq!(run(&["aniso-run", "-J", "1"]).status.code(), Some(2));
    assert_eq!(run(&["aniso-run", "--dt", "-1"]).status.code(), Some(2));
    assert_eq!(
        run(&["lub1d", "--cutoff", "off", "-J", "16"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["lub1d", "--cutoff", "sometimes"]).status.code(),
        Some(2)
    );
}

#[test]
fn convergence_csv_rows_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "aniso-convergence",
            "-J",
            "6,8,12",
            "--dt",
            "0.05",
            "--t-end",
            "0.2",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["J", "h", "dt", "l2_error", "max_undershoot"]
    );
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [6.0, 8.0, 12.0]
    );

    let h: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let e: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let comment = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("# {key}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((comment("l2_slope") - fit(&h, &e)).abs() <= 1e-12);
    let u: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    if u.iter().all(|v| *v > 0.0) {
        assert!((comment("undershoot_slope") - fit(&h, &u)).abs() <= 1e-12);
    }

    let meta = std::fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    for key in ["cutoff=", "dt=", "integrator=", "seed=", "solver_tol="] {
        assert!(meta.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
}

#[test]
fn output_is_deterministic_across_execution_modes() {
    let args = [
        "aniso-convergence",
        "-J",
        "6,10",
        "--dt",
        "0.05",
        "--t-end",
        "0.1",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), &args).status.success());
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert!(run_in(b.path(), &seq).status.success());
    let read = |d: &Path| std::fs::read(d.join("convergence.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn lubrication_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["lub1d", "-J", "64", "--dt", "1e-5", "--t-end", "2e-4"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "trace.csv",
        "singularity.csv",
        "snapshots.csv",
        "final.csv",
        "metadata.txt",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let snaps = std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().next().unwrap(), "t,x,pre,post");
    assert_eq!(snaps.lines().count(), 1 + 10 * 65);
    let sing = std::fs::read_to_string(dir.path().join("singularity.csv")).unwrap();
    assert!(sing.lines().any(|l| l == "t,touching_length"));
}

#[test]
fn regularization_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "reg-compare",
            "-J",
            "32",
            "--dt",
            "1e-5",
            "--t-end",
            "1e-4",
            "--epsilon",
            "1e-6",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("regularization.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "quantity,reference,regularized,difference"
    );
    assert!(dir.path().join("singularity_reference.csv").exists());
    assert!(dir.path().join("singularity_regularized.csv").exists());
}

#[test]
fn diagnostics_rows_for_dt_and_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["diagnostics", "-J", "6", "--dt", "0.01"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let dts: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(dts, [0.01, 0.005]);
}
