use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polymatrix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polymatrix"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn line_value<'a>(text: &'a str, prefix: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no line starting with {prefix:?} in\n{text}"))
}

fn parse_vec(s: &str) -> Vec<f64> {
    s.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|v| v.trim().parse().unwrap())
        .collect()
}

const TRIANGLE: &str = r#"{"dims": [1, 1, 1], "class": "zero-sum",
  "blocks": [{"i": 0, "j": 1, "rows": 1, "cols": 1, "data": [1]},
             {"i": 0, "j": 2, "rows": 1, "cols": 1, "data": [1]},
             {"i": 1, "j": 2, "rows": 1, "cols": 1, "data": [1]}],
  "costs": COSTS}"#;

const ROTATION: &str = r#"{"dims": [1, 1], "class": "zero-sum",
  "blocks": [{"i": 0, "j": 1, "rows": 1, "cols": 1, "data": [1]}], "costs": [0, 0]}"#;

fn triangle(dir: &Path, name: &str, costs: &str) {
    fs::write(dir.join(name), TRIANGLE.replace("COSTS", costs)).unwrap();
}

#[test]
fn construct_reports_witness_determinants() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = polymatrix(d, &["construct", "--kind", "coord-even", "--dims", "2,2,2"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("|det| = 1,"), "{}", stdout(&out));

    let out = polymatrix(d, &["construct", "--kind", "coord-odd", "--dims", "3,2,2"]);
    assert!(stdout(&out).contains("det = 2 "), "{}", stdout(&out));

    // 3 + 3 is even and 3 <= K/2, so this is a valid zero-sum witness.
    let out = polymatrix(d, &["construct", "--kind", "zs-even", "--dims", "3,3"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("|det| = 1,"));

    let out = polymatrix(d, &["construct", "--kind", "zs-even", "--dims", "3,3,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polymatrix(d, &["construct", "--kind", "coord-even", "--dims", "4,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagonal block would be nonzero"));
}

#[test]
fn solve_reports_each_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = polymatrix(
        d,
        &["construct", "--kind", "coord-even", "--dims", "2,2,2", "--costs", "1,0,0,0,0,0", "--out", "even.json"],
    );
    assert!(out.status.success());
    let out = polymatrix(d, &["solve", "even.json", "--out", "solve.json"]);
    let text = stdout(&out);
    assert!(text.starts_with("Unique"));
    let x = parse_vec(line_value(&text, "x* = "));
    let e4 = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    assert!(x.iter().zip(e4).all(|(a, b)| (a - b).abs() < 1e-12));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("solve.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "unique");
    assert_eq!(report["uniqueness"]["determinant"]["sign"], -1);

    triangle(d, "tri.json", "[0, 0, 0]");
    let text = stdout(&polymatrix(d, &["solve", "tri.json"]));
    assert!(text.starts_with("NonUnique(W=1)"));
    let basis = parse_vec(line_value(&text, "d_1 = "));
    let s = 1.0 / 3f64.sqrt();
    assert!(basis.iter().zip([s, -s, s]).all(|(a, b)| (a - b).abs() < 1e-12));

    // (1, 0, -1) is orthogonal to (1, -1, 1): consistent. (1, 0, 0) is not.
    triangle(d, "tri_b.json", "[1, 0, -1]");
    assert!(stdout(&polymatrix(d, &["solve", "tri_b.json"])).starts_with("NonUnique(W=1)"));
    triangle(d, "tri_c.json", "[1, 0, 0]");
    let out = polymatrix(d, &["solve", "tri_c.json"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("NoEquilibrium"));
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), "{\"dims\": [1]}").unwrap();
    assert_eq!(polymatrix(d, &["solve", "bad.json"]).status.code(), Some(2));
    assert_eq!(polymatrix(d, &["solve", "missing.json"]).status.code(), Some(2));
    assert_eq!(polymatrix(d, &["montecarlo", "--class", "odd", "--dims", "1,1"]).status.code(), Some(2));
}

#[test]
fn montecarlo_fractions_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (class, dims, expected) in [("zero-sum", "1,1,1", "0"), ("zero-sum", "1,1,1,1", "1"), ("coordination", "2,2,2", "1")] {
        let out = polymatrix(d, &["montecarlo", "--class", class, "--dims", dims, "--samples", "200", "--csv", "sweep.csv"]);
        assert!(out.status.success());
        assert!(stdout(&out).contains(&format!("unique fraction {expected} ")), "{}", stdout(&out));
    }
    let csv = fs::read_to_string(d.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "class,dims,samples,fraction,min_sv_min");
    assert!(lines[1].starts_with("zero-sum,\"1,1,1\",200,0.0000000000000000e0,"));
}

#[test]
fn simulate_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("rot.json"), ROTATION).unwrap();
    let out = polymatrix(d, &["simulate", "rot.json", "--x0", "1,0", "--horizon", "1000", "--out", "rot.csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let final_dist: f64 = line_value(&text, "final |xbar - x*| = ")
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(final_dist <= 0.003);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("rot.convergence.json")).unwrap()).unwrap();
    let slope = report["decay_slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.1);
    let csv = fs::read_to_string(d.join("rot.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10_002);

    triangle(d, "tri.json", "[0, 0, 0]");
    let text = stdout(&polymatrix(d, &["simulate", "tri.json", "--x0", "1,0,0", "--horizon", "100", "--out", "t.csv"]));
    let closest = parse_vec(line_value(&text, "closest equilibrium = "));
    assert!(closest.iter().zip([1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0]).all(|(a, b)| (a - b).abs() < 1e-12));

    let text = stdout(&polymatrix(d, &["simulate", "tri.json", "--x0", "2,-2,2", "--horizon", "10", "--out", "f.csv"]));
    let numbers: Vec<f64> = line_value(&text, "final |xbar - x*| = ")
        .split(", ")
        .map(|part| part.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(numbers.len(), 3);
    assert!(numbers.iter().all(|v| *v < 1e-12), "{numbers:?}");
}

#[test]
fn simulate_without_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    triangle(d, "tri.json", "[1, 0, 0]");
    let out = polymatrix(d, &["simulate", "tri.json", "--x0", "0,0,0", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = polymatrix(d, &["simulate", "tri.json", "--method", "rk4", "--horizon", "5", "--out", "x.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unbounded-drift"));
}

#[test]
fn reduce_writes_general_game() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pennies = r#"{"dims": [2, 2], "class": "zero-sum",
      "blocks": [{"i": 0, "j": 1, "rows": 2, "cols": 2, "data": [1, -1, -1, 1]}], "costs": [0, 0, 0, 0]}"#;
    fs::write(d.join("p.json"), pennies).unwrap();
    let out = polymatrix(d, &["reduce", "p.json", "--agent", "0", "--coeffs", "1,1", "--rhs", "1", "--out", "r1.json"]);
    assert!(out.status.success());
    let out = polymatrix(d, &["reduce", "r1.json", "--agent", "1", "--coeffs", "1,1", "--rhs", "1", "--out", "r2.json"]);
    assert!(out.status.success());
    let reduced: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r2.json")).unwrap()).unwrap();
    assert_eq!(reduced["dims"], serde_json::json!([1, 1]));
    assert_eq!(reduced["class"], "general");
    assert!(d.join("r2.json.manifest.json").exists());
}

#[test]
fn manifest_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = polymatrix(d, &["sample", "--class", "general", "--dims", "2,1,2", "--seed", "9", "--sample-costs", "--out", "g.json"]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("g.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sample");
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["scale"], 1.0);
    assert!(polymatrix(d, &["replay", "g.json.manifest.json", "--out-dir", "re"]).status.success());
    assert_eq!(fs::read(d.join("g.json")).unwrap(), fs::read(d.join("re/g.json")).unwrap());
}
