use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use assouad_core::analysis::{sweep, write_sweep_csv};
use assouad_core::cubes::{build_cube_tree, natural_levels, unfold_spec, CubeTree};
use assouad_core::dimension::{exact_dimension_spec, set_assouad_estimate, DimensionKind};
use assouad_core::generators::{cantor_points, triadic_spec, uniform_spec, TreeSpec};
use assouad_core::measures::{build_mu_p, MassAssignment};
use assouad_core::metric::{Norm, ScaleWindow};
use assouad_core::rational::{ratio, to_f64, RationalRepr};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_assouad"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn rational_field(v: &Value) -> f64 {
    let repr: RationalRepr = serde_json::from_value(v.clone()).unwrap();
    to_f64(&repr.value::<serde_json::Error>().unwrap())
}

#[test]
fn gen_triadic_into_exact_assouad_prints_two() {
    let spec = ok(run(&["gen", "triadic"]));
    let out = ok(run_with_stdin(&["dim", "exact", "--p", "1/9", "--kind", "assouad"], spec.as_bytes()));
    assert_eq!(out.trim(), "2");
}

#[test]
fn solve_triadic_for_one_and_a_half() {
    let dir = TempDir::new().unwrap();
    let spec = path(&dir, "triadic.json");
    ok(run(&["gen", "triadic", "--out", &spec]));
    let out = ok(run(&["solve", "--spec", &spec, "--target", "1.5", "--tol", "1e-6"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["version"].is_string());
    let p = rational_field(&v["p"]);
    assert!((p - 3f64.powf(-1.5)).abs() < 1e-6, "p = {p}");
    assert!((p - 0.19245).abs() < 1e-5);
}

#[test]
fn corrupted_tree_fails_partition() {
    let dir = TempDir::new().unwrap();
    let points = path(&dir, "cantor.csv");
    let tree = path(&dir, "tree.json");
    let bad = path(&dir, "bad.json");
    ok(run(&["gen", "cantor", "--depth", "4", "--out", &points]));
    ok(run(&["tree", "build", "--points", &points, "--delta", "1/8", "--out", &tree]));
    let mut t: Value = serde_json::from_str(&fs::read_to_string(&tree).unwrap()).unwrap();
    let cubes = t["cubes"].as_array_mut().unwrap();
    let leaves: Vec<usize> = (0..cubes.len()).filter(|&i| cubes[i]["children"].as_array().unwrap().is_empty()).collect();
    let stolen = cubes[leaves[0]]["members"][0].clone();
    cubes[leaves[1]]["members"].as_array_mut().unwrap().push(stolen);
    fs::write(&bad, serde_json::to_string(&t).unwrap()).unwrap();

    let out = run(&["tree", "validate", "--tree", &bad, "--points", &points]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(i) partition: FAIL"), "{text}");
    assert!(text.contains("witness: point"), "{text}");

    let out = run(&["tree", "validate", "--tree", &bad, "--points", &points, "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
    let partition = v["properties"].as_array().unwrap().iter().find(|p| p["property"] == "partition").unwrap();
    assert_eq!(partition["status"], "fail");
    assert!(!partition["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn build_then_validate_round_trip() {
    let dir = TempDir::new().unwrap();
    let spaces: [&[&str]; 4] = [
        &["gen", "cantor", "--depth", "5"],
        &["gen", "grid", "--dim", "1", "--n", "81"],
        &["gen", "grid", "--dim", "2", "--n", "9"],
        &["gen", "random", "--dim", "2", "--n", "60"],
    ];
    for (i, args) in spaces.iter().enumerate() {
        let points = path(&dir, &format!("p{i}.csv"));
        let tree = path(&dir, &format!("t{i}.json"));
        let mut gen = args.to_vec();
        gen.extend(["--out", &points]);
        ok(run(&gen));
        for delta in ["1/8", "1/10"] {
            ok(run(&["tree", "build", "--points", &points, "--delta", delta, "--out", &tree]));
            let out = ok(run(&["tree", "validate", "--tree", &tree, "--points", &points]));
            assert!(out.ends_with("tree valid\n"), "{out}");
        }
    }
    let spec = path(&dir, "u.json");
    let tree = path(&dir, "u_tree.json");
    ok(run(&["gen", "uniform", "--m", "4", "--delta", "1/8", "--out", &spec]));
    ok(run(&["tree", "build", "--spec", &spec, "--depth", "4", "--out", &tree]));
    ok(run(&["tree", "validate", "--tree", &tree]));
}

#[test]
fn missing_points_for_metric_tree_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let points = path(&dir, "c.csv");
    let tree = path(&dir, "t.json");
    ok(run(&["gen", "cantor", "--depth", "3", "--out", &points]));
    ok(run(&["tree", "build", "--points", &points, "--delta", "1/8", "--out", &tree]));
    let out = run(&["tree", "validate", "--tree", &tree]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(run(&["dim", "nonsense"]).status.code(), Some(2));
}

#[test]
fn inexact_decimal_warns() {
    let spec = ok(run(&["gen", "triadic"]));
    let out = run_with_stdin(&["dim", "exact", "--p", "0.1234567890123", "--kind", "assouad"], spec.as_bytes());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let out = run_with_stdin(&["dim", "exact", "--p", "0.05", "--kind", "assouad"], spec.as_bytes());
    assert!(out.stderr.is_empty());
}

fn read_spec(p: &Path) -> TreeSpec {
    TreeSpec::from_json(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generated_specs_match_library() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("u.json");
    ok(run(&["gen", "uniform", "--m", "4", "--delta", "1/8", "--j", "2", "--out", file.to_str().unwrap()]));
    assert_eq!(read_spec(&file), uniform_spec(4, &ratio(1, 8), 2).unwrap());
    ok(run(&["gen", "triadic", "--out", file.to_str().unwrap()]));
    assert_eq!(read_spec(&file), triadic_spec());
}

#[test]
fn exact_dimension_matches_library() {
    let dir = TempDir::new().unwrap();
    let spec_path = path(&dir, "u.json");
    ok(run(&["gen", "uniform", "--m", "4", "--delta", "1/8", "--out", &spec_path]));
    let spec = uniform_spec(4, &ratio(1, 8), 1).unwrap();
    for (kind, arg) in [(DimensionKind::MeasureAssouad, "assouad"), (DimensionKind::MeasureLower, "lower"), (DimensionKind::SetAssouad, "set-assouad")] {
        let out = ok(run(&["dim", "exact", "--spec", &spec_path, "--p", "3/40", "--kind", arg, "--format", "json"]));
        let v: Value = serde_json::from_str(&out).unwrap();
        let lib = exact_dimension_spec(&spec, &ratio(3, 40), &[ratio(1, 1)], kind).unwrap();
        assert_eq!(v["value"].as_f64().unwrap(), lib.value());
        assert_eq!(v["exact"]["cycle_len"].as_u64().unwrap() as usize, lib.cycle_len);
        assert_eq!(rational_field(&v["exact"]["base"]), to_f64(&lib.base));
    }
}

#[test]
fn measure_build_matches_library() {
    let dir = TempDir::new().unwrap();
    let spec_path = path(&dir, "s.json");
    let tree_path = path(&dir, "t.json");
    let mass_path = path(&dir, "m.json");
    ok(run(&["gen", "triadic", "--out", &spec_path]));
    ok(run(&["tree", "build", "--spec", &spec_path, "--depth", "5", "--out", &tree_path]));
    ok(run(&["measure", "build", "--tree", &tree_path, "--p", "1/9", "--out", &mass_path]));
    let tree = CubeTree::from_json(&fs::read_to_string(&tree_path).unwrap()).unwrap();
    assert_eq!(tree.fingerprint(), unfold_spec(&triadic_spec(), 5).unwrap().fingerprint());
    let cli_mu = MassAssignment::from_json(&fs::read_to_string(&mass_path).unwrap()).unwrap();
    assert_eq!(cli_mu, build_mu_p(&tree, &ratio(1, 9)).unwrap());

    let out = ok(run(&["dim", "measure", "--tree", &tree_path, "--mass", &mass_path, "--format", "json", "--emit-evidence"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let lib = assouad_core::dimension::measure_chain_estimate(&tree, &cli_mu, 1, assouad_core::dimension::Extremum::Assouad).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), lib.value);
    assert_eq!(v["evidence"].as_array().unwrap().len(), lib.evidence.len());
}

#[test]
fn sweep_csv_matches_library() {
    let spec = ok(run(&["gen", "triadic"]));
    let out = ok(run_with_stdin(&["sweep", "--p", "1/3,1/4,1/9,1/27"], spec.as_bytes()));
    let grid = [ratio(1, 3), ratio(1, 4), ratio(1, 9), ratio(1, 27)];
    let rows = sweep(&triadic_spec(), &grid, None).unwrap();
    let mut expected = Vec::new();
    write_sweep_csv(&rows, &mut expected).unwrap();
    assert_eq!(out.as_bytes(), expected.as_slice());
}

#[test]
fn set_estimate_and_tree_match_library() {
    let dir = TempDir::new().unwrap();
    let points = path(&dir, "c.csv");
    let tree_path = path(&dir, "t.json");
    ok(run(&["gen", "cantor", "--depth", "5", "--out", &points]));
    let file = fs::File::open(&points).unwrap();
    let space = assouad_core::metric::FiniteMetricSpace::read_csv(file, Norm::Euclidean).unwrap();
    assert_eq!(space.len(), cantor_points(5).unwrap().len());

    let out = ok(run(&["dim", "set", "--points", &points, "--format", "json"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let window = ScaleWindow::new(space.min_positive_distance().unwrap(), space.diameter()).unwrap();
    let lib = set_assouad_estimate(&space, &window, 256).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), lib.value);
    assert_eq!(v["evidence"].as_array().unwrap().len(), lib.evidence.len().min(1));

    ok(run(&["tree", "build", "--points", &points, "--delta", "1/8", "--out", &tree_path]));
    let cli_tree = CubeTree::from_json(&fs::read_to_string(&tree_path).unwrap()).unwrap();
    let delta = ratio(1, 8);
    let lib_tree = build_cube_tree(&space, &delta, natural_levels(&space, &delta), 0).unwrap();
    assert_eq!(cli_tree.fingerprint(), lib_tree.fingerprint());
}

#[test]
fn checks_report_pass() {
    let dir = TempDir::new().unwrap();
    let spec = path(&dir, "s.json");
    ok(run(&["gen", "triadic", "--out", &spec]));
    let out = ok(run(&["check", "key-estimate", "--spec", &spec, "--depth", "5", "--p", "1/9", "--p2", "1/8"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(v["chains_checked"].as_u64().unwrap() > 0);
    ok(run(&["check", "continuity", "--spec", &spec, "--pairs", "1/9:1/8,1/27:1/20", "--random", "4", "--seed", "3"]));
    ok(run(&["check", "blowup", "--spec", &spec, "--p", "1/9,1/27,1/81"]));
    let out = ok(run(&["check", "binom", "--spec", &spec, "--beta", "1/2", "--n", "6", "--format", "text"]));
    assert_eq!(out, "pass\n");
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = ok(run(&["gen", "random", "--dim", "2", "--n", "40", "--seed", "7"]));
    let b = ok(run(&["gen", "random", "--dim", "2", "--n", "40", "--seed", "7", "--threads", "2"]));
    assert_eq!(a, b);
    let c = ok(run(&["gen", "random", "--dim", "2", "--n", "40", "--seed", "8"]));
    assert_ne!(a, c);
}
