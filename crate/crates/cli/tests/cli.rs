//! The real binary against golden outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_causalkit"));
    c.current_dir(dir("data"));
    c
}

fn dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const GOLDEN: &[(&str, &[&str], i32)] = &[
    ("dsep_fig2a_given_c2", &["dsep", "fig2a.dag", "--x", "U1", "--y", "U2", "--given", "C2"], 1),
    ("dsep_fig2a_empty", &["dsep", "fig2a.dag", "--x", "U1", "--y", "U2"], 0),
    ("identify_fig2b", &["identify", "fig2b.dag", "--treatment", "A", "--outcome", "Y"], 0),
    (
        "identify_fig2b_latex_explain",
        &["identify", "fig2b.dag", "--treatment", "A", "--outcome", "Y", "--format", "latex", "--explain"],
        0,
    ),
    ("identify_fig2b_raw", &["identify", "fig2b.dag", "--treatment", "A", "--outcome", "Y", "--raw"], 0),
    ("identify_fig3a", &["identify", "fig3a.dag", "--treatment", "A", "--outcome", "Y"], 0),
    ("identify_bow", &["identify", "bow.dag", "--treatment", "A", "--outcome", "Y"], 3),
    ("adjust_fig2a", &["adjust", "fig2a.dag", "--treatment", "A", "--outcome", "Y"], 0),
    ("adjust_fig2a_c2", &["adjust", "fig2a.dag", "--treatment", "A", "--outcome", "Y", "--set", "C2"], 1),
    ("adjust_fig3a_c", &["adjust", "fig3a.dag", "--treatment", "A", "--outcome", "Y", "--set", "C"], 0),
    ("adjust_fig2b", &["adjust", "fig2b.dag", "--treatment", "A", "--outcome", "Y"], 1),
];

#[test]
fn golden_outputs() {
    for (name, args, code) in GOLDEN {
        let o = run(args);
        let want = std::fs::read_to_string(dir("golden").join(format!("{name}.txt"))).unwrap();
        assert_eq!(o.status.code(), Some(*code), "{name}: {}", stderr(&o));
        assert_eq!(stdout(&o), want, "{name}");
    }
}

#[test]
fn connected_query_prints_collider_path() {
    let o = run(&["dsep", "fig2a.dag", "--x", "U1", "--y", "U2", "--given", "C2"]);
    let text = stdout(&o);
    assert!(text.starts_with("connected\n"));
    assert!(text.contains("U1 -> C2 <- U2"));
}

#[test]
fn malformed_file_reports_line() {
    let o = run(&["dsep", "malformed.dag", "--x", "A", "--y", "Y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn input_errors_exit_two() {
    for args in [
        &["dsep", "missing.dag", "--x", "A", "--y", "Y"][..],
        &["dsep", "fig3a.dag", "--x", "A", "--y", "Nope"],
        &["identify", "fig3a.dag", "--treatment", "A"],
        &["simulate", "--example", "7", "--out", "x.csv"],
        &["frobnicate"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn fig2b_expression_mentions_the_trapdoor() {
    let text = stdout(&run(&["identify", "fig2b.dag", "--treatment", "A", "--outcome", "Y"]));
    assert!(text.contains("c2"));
    assert!(text.contains("any fixed value of C2"));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn simulate(tmp: &Path, args: &[&str]) -> (Output, PathBuf) {
    let out = tmp.join("d.csv");
    let mut all = vec!["simulate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", out.to_str().unwrap()]);
    (run(&all), out)
}

#[test]
fn simulate_example_one_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = simulate(tmp.path(), &["--example", "1", "--n", "2000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed: 7"));
    let (header, rows) = read_csv(&out);
    for c in ["C1", "C2", "C3", "C4", "A", "Y"] {
        assert!(header.iter().any(|h| h == c), "{header:?}");
    }
    assert!(!header.iter().any(|h| h == "Y0"));
    assert_eq!(rows.len(), 2000);

    let (o, out) = simulate(tmp.path(), &["--example", "1", "--n", "2000", "--seed", "7", "--include-po"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = read_csv(&out);
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (a, y, y0, y1) = (col("A"), col("Y"), col("Y0"), col("Y1"));
    for r in &rows {
        assert_eq!(r[y], if r[a] == 1.0 { r[y1] } else { r[y0] });
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["n"], 2000);
    assert_eq!(meta["example"]["id"], 1);
}

#[test]
fn simulate_is_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, out) = simulate(tmp.path(), &["--example", "2", "--n", "500", "--seed", "3"]);
    let first = std::fs::read(&out).unwrap();
    let (_, out) = simulate(tmp.path(), &["--example", "2", "--n", "500", "--seed", "3"]);
    assert_eq!(first, std::fs::read(&out).unwrap());
    let (_, out) = simulate(tmp.path(), &["--example", "2", "--n", "500", "--seed", "4"]);
    assert_ne!(first, std::fs::read(&out).unwrap());
}

#[test]
fn simulate_example_two_records_condition_number() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = simulate(tmp.path(), &["--example", "2", "--n", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    // singular values of I - B are 1.1 and 0.9
    let k = meta["cyclic_condition_number"].as_f64().unwrap();
    assert!((k - 1.1 / 0.9).abs() < 1e-12, "{k}");
}

#[test]
fn simulate_example_four_is_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = simulate(tmp.path(), &["--example", "4", "--n", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().flatten().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn reproduce_quick_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r.json");
    let o = run(&["reproduce", "--quick", "--out", out.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["schema"], "repro/1");
    assert_eq!(r["quick"], true);
    assert_eq!(r["n"], 10_000);
    let ids: Vec<&str> = r["examples"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["example-1", "example-2", "example-3", "example-4", "example-5", "example-6"]);
    let all_pass = r["all_pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
    assert!(stderr(&o).contains("seed: "));
}
