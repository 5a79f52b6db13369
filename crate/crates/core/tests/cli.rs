//! End-to-end driver tests: exit-code contract, located diagnostics, and
//! byte-stable printed artifacts.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/fixtures");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn phg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_clean_program_exits_zero() {
    let out = phg(&["check", &fixture("triangle.phg")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("ok: no diagnostics"));
}

#[test]
fn check_grade_conflict_exits_one_with_node_name() {
    let out = phg(&["check", &fixture("conflict.phg")]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("error"), "{text}");
    assert!(text.contains("`c`"), "{text}");
    // located at the conflicting declaration
    assert!(text.contains("line 4"), "{text}");
}

#[test]
fn check_unit_conflict_reports_dims_error() {
    let out = phg(&["check", &fixture("units.phg")]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("[dims]"), "{text}");
}

#[test]
fn warnings_alone_exit_zero() {
    let out = phg(&["check", &fixture("warn_only.phg")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("warning"), "{text}");
    assert!(!text.contains("error"), "{text}");
}

#[test]
fn check_json_is_machine_readable() {
    let out = phg(&["--format", "json", "check", &fixture("conflict.phg")]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["diagnostics"].as_array().unwrap().iter().any(|d| {
        d["severity"] == "Error" && d["node"] == "c"
    }));
}

#[test]
fn sparsity_table_and_stability() {
    let args = ["sparsity", "--algebra", "3,0,1", "--kind", "gp", "--grades", "2,1"];
    let a = phg(&args);
    let b = phg(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b), "sparsity output must be byte-stable");
    let text = stdout(&a);
    assert!(text.contains("nonzero entries    21"), "{text}");
    assert!(text.contains("restricted dense   24"), "{text}");

    let bad = phg(&["sparsity", "--algebra", "3,0,1", "--kind", "gp", "--grades", "9,1"]);
    assert!(!bad.status.success());
}

#[test]
fn emit_kernel_text_is_byte_stable() {
    let args = ["emit", &fixture("triangle.phg"), "--edge", "face"];
    let a = phg(&args);
    let b = phg(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    assert!(text.starts_with("kernel join2 cl(3,0,1)"), "{text}");
    assert!(text.contains("out out_e012 out_e013 out_e023 out_e123"), "{text}");

    let json = phg(&["--format", "json", "emit", &fixture("triangle.phg"), "--edge", "face"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["kind"]["Join"]["order"], 2);
}

#[test]
fn eval_exact_triangle_area() {
    let out = phg(&[
        "--mode",
        "exact",
        "eval",
        &fixture("triangle.phg"),
        "--inputs",
        &fixture("points.json"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("area = 1/2"), "{}", stdout(&out));

    // kernel-backed evaluation agrees
    let k = phg(&[
        "--mode",
        "exact",
        "eval",
        &fixture("triangle.phg"),
        "--inputs",
        &fixture("points.json"),
        "--kernels",
    ]);
    assert_eq!(stdout(&out), stdout(&k));
}

#[test]
fn diff_matches_central_differences() {
    let out = phg(&[
        "diff",
        &fixture("triangle.phg"),
        "--inputs",
        &fixture("fpoints.json"),
        "--direction",
        &fixture("direction.json"),
        "--outputs",
        "area",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let tangent: f64 = text.trim().strip_prefix("area = ").unwrap().parse().unwrap();
    assert!(tangent.is_finite() && tangent != 0.0, "{text}");
}

#[test]
fn place_prints_block_plan() {
    let out = phg(&["place", &fixture("pipeline.phg")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("load_a -> tile (0,0)"), "{text}");
    assert!(text.contains("reduce_d -> tile (1,1)"), "{text}");
    assert!(text.contains("schedule: load_a -> compute_b -> compute_c -> reduce_d"), "{text}");

    // explicit target file path
    let out2 = phg(&["place", &fixture("pipeline.phg"), "--target", &fixture("target.json")]);
    assert!(out2.status.success());
    assert_eq!(stdout(&out), stdout(&out2));
}

#[test]
fn trace_shows_firing_sequence_and_quality() {
    let out = phg(&["trace", &fixture("triangle.phg")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("join fired -> `face` grades {3}"), "{text}");
    assert!(text.contains("norm[content] fired -> `area` grades {0}"), "{text}");
    assert!(text.contains("iterations: 5"), "{text}");
}

#[test]
fn mesh_check_flat_import() {
    let out = phg(&["check", "--mesh", &fixture("quad.mesh")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("boundary structure consistent"));
}
