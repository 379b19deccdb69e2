use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wallopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wallopt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Last CSV row before the termination line: `index,x,y,value,...`.
fn last_row(csv: &str) -> Vec<f64> {
    let lines: Vec<&str> = csv.lines().collect();
    let row = lines[lines.len() - 2];
    row.split(',').skip(1).map(|v| v.parse().unwrap()).collect()
}

/// Gradient of `−xy·e^{−x²−y²} + y²/2`, written out by hand.
fn example1_grad(x: f64, y: f64) -> [f64; 2] {
    let e = (-x * x - y * y).exp();
    [-y * e * (1.0 - 2.0 * x * x), -x * e * (1.0 - 2.0 * y * y) + y]
}

#[test]
fn example6_from_2_1_reaches_the_optimum_region() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(dir.path(), &["example", "6", "--start", "2,1", "--check"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let row = last_row(&fs::read_to_string(dir.path().join("out/example6_start0.csv")).unwrap());
    assert!(row[2] <= -390.0, "value {}", row[2]);
}

#[test]
fn example7_from_tenth_ends_near_the_corner() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(dir.path(), &["example", "7", "--start", "0.1,0.1"]);
    assert!(o.status.success());
    let row = last_row(&fs::read_to_string(dir.path().join("out/example7_start0.csv")).unwrap());
    assert!(row[0].hypot(row[1] - 0.5) < 1e-2, "{row:?}");
}

#[test]
fn example1_basin_writes_image_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(
        dir.path(),
        &["example", "1", "--method", "bnqn", "--wall", "pole", "--grid", "0.5,-0.5003,1,11"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    assert!(fs::read(out.join("example1_G_bnqn.ppm")).unwrap().starts_with(b"P6\n11 11\n"));
    let stats = fs::read_to_string(out.join("example1_G_bnqn_stats.csv")).unwrap();
    assert!(stats.lines().any(|l| l.starts_with("p2,")) && stats.lines().any(|l| l.starts_with("p3,")));
}

#[test]
fn minimize_example1_finds_a_critical_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(dir.path(), &["minimize", "--objective", "example1", "--start", "1,0.3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("termination GradTol"));
    let row = last_row(&fs::read_to_string(dir.path().join("out/trace.csv")).unwrap());
    let g = example1_grad(row[0], row[1]);
    assert!(g[0].hypot(g[1]) <= 1e-6);
}

#[test]
fn minimize_from_the_wall_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"objective":{"kind":"builtin","name":"example7"},
        "wall":{"kind":"constant","region":{"kind":"polyhedron","half_spaces":[{"normal":[1,1],"bound":1}]},"r":1000},
        "start":{"kind":"fixed","point":[2,2]}}"#;
    fs::write(dir.path().join("wall.json"), spec).unwrap();
    let o = wallopt(dir.path(), &["minimize", "--config", "wall.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("WallStart"));
}

#[test]
fn seeded_runs_write_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"objective":{"kind":"builtin","name":"example1"},
        "start":{"kind":"uniform","lower":[-2,-2],"upper":[2,2]}}"#;
    fs::write(dir.path().join("run.json"), spec).unwrap();
    for out in ["a", "b"] {
        let o = wallopt(dir.path(), &["minimize", "--config", "run.json", "--seed", "7", "--out", out]);
        assert!(o.status.success());
    }
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/trace.csv")).unwrap());
}

#[test]
fn basin_on_example2_writes_ppm_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(
        dir.path(),
        &["basin", "--objective", "example2_modulus", "--grid", "0,0,3,51", "--workers", "2"],
    );
    assert!(o.status.success());
    let out = dir.path().join("out");
    assert!(fs::read(out.join("basin.ppm")).unwrap().starts_with(b"P6\n51 51\n255\n"));
    let stats = fs::read_to_string(out.join("basin_stats.csv")).unwrap();
    // Five roots plus the unresolved row.
    assert_eq!(stats.lines().count(), 1 + 5 + 1);
}

#[test]
fn report_over_example5_logs_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    assert!(wallopt(dir.path(), &["example", "5"]).status.success());
    let o = wallopt(dir.path(), &["report", "out/example5.jsonl"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("gamma history non-increasing"), "{text}");
}

#[test]
fn empty_report_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wallopt(dir.path(), &["report"]).status.code(), Some(2));
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    assert_eq!(wallopt(dir.path(), &["report", "empty.jsonl"]).status.code(), Some(2));
}

#[test]
fn missing_log_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wallopt(dir.path(), &["report", "missing.jsonl"]).status.code(), Some(3));
}

#[test]
fn inapplicable_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wallopt(dir.path(), &["example", "3", "--R", "5"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = wallopt(dir.path(), &["example", "9", "--check"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(wallopt(dir.path(), &["example", "9"]).status.success());
}
