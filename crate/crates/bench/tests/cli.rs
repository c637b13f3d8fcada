use std::fs;
use std::process::Command;

fn w2est(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_w2est")).args(args).output().unwrap()
}

#[test]
fn invalid_configuration_exits_with_two() {
    for args in [
        &["bench", "sample-complexity", "--trials", "0"][..],
        &["bench", "grid", "--h-list", "0.3"],
        &["bench", "sample-complexity", "--estimators", "X"],
        &["bench", "lambda-sweep", "--lambda", "-1"],
        &["bench", "timing", "--bogus-flag"],
    ] {
        let out = w2est(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn estimate_reads_point_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, out) = (dir.path().join("a.txt"), dir.path().join("b.txt"), dir.path().join("est.csv"));
    fs::write(&a, "# two atoms\n0 0\n1 0\n").unwrap();
    fs::write(&b, "0 1\n1 1\n").unwrap();
    let o = w2est(&[
        "estimate",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--estimators",
        "S,plugin",
        "--plugin-exact",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("plugin") && l.contains("1.000000000000e0")), "{stdout}");
    let table = w2est_bench::table::Table::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 2);
}

#[test]
fn estimate_rejects_ragged_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    fs::write(&a, "0 0\n1\n").unwrap();
    let o = w2est(&["estimate", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let base = dir.path().join(format!("{name}.csv"));
        let o = w2est(&[
            "bench",
            "sample-complexity",
            "--dim",
            "2",
            "--n-list",
            "20,40",
            "--trials",
            "3",
            "--lambda",
            "0.5",
            "--estimators",
            "S,R",
            "--eval-points",
            "50",
            "--output",
            base.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(dir.path().join(format!("{name}_S.csv"))).unwrap(),
            fs::read(dir.path().join(format!("{name}_R.csv"))).unwrap(),
        )
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn unreachable_timing_target_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("timing.csv");
    let o = w2est(&[
        "bench",
        "timing",
        "--dim",
        "2",
        "--n-list",
        "20",
        "--lambda-list",
        "1",
        "--trials",
        "1",
        "--estimators",
        "S",
        "--targets",
        "1e-12",
        "--output",
        base.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let text = fs::read_to_string(dir.path().join("timing_S.csv")).unwrap();
    assert!(text.lines().last().unwrap().ends_with(" 0"), "{text}");
}
