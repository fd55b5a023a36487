use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regkit_cli::suite::{self, SuiteConfig, Tolerances};
use regkit_cli::{parse_report, parse_trace_csv};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.scenario"))
}

fn regkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regkit"))
        .args(args)
        .env_remove("REGKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn analyze(name: &str, dir: &Path, extra: &[&str]) -> Output {
    let s = scenario(name);
    let mut args = vec!["analyze", s.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend(extra);
    regkit(&args)
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("s.scenario");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn analyze_e5_reports_the_reference_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = analyze("e5", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("e5.json")).unwrap()).unwrap();
    let c = rec.constants.as_ref().unwrap();
    let want = (2.0 - 2f64.sqrt()).sqrt() / 2.0;
    assert!((c.sr.get().unwrap() - want).abs() < 1e-2);
    assert!((c.r.estimate.get().unwrap() - want).abs() < 1e-2);
    assert!(c.identities.max().unwrap() < 1e-9);
    assert!(rec.passed());
    assert!(rec.experiment.as_ref().unwrap().consistent);
    assert!(rec.wall_time.is_none());
    let csv = std::fs::read_to_string(dir.path().join("e5.csv")).unwrap();
    assert!(csv.starts_with("scenario,key,value,bound,budget,used\n"));
    assert!(csv.contains("e5,constants.sr,"));
}

#[test]
fn analyze_e3_separates_sr_and_r() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(analyze("e3", dir.path(), &[]).status.code(), Some(0));
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("e3.json")).unwrap()).unwrap();
    let c = rec.constants.unwrap();
    assert!((c.sr.get().unwrap() - 1.0).abs() < 1e-9);
    assert!(c.r.estimate.get().unwrap().abs() < 1e-12);
}

#[test]
fn reports_are_byte_identical_for_the_same_seed() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        assert_eq!(analyze("cross", d.path(), &["--seed", "11"]).status.code(), Some(0));
    }
    for f in ["cross.json", "cross.csv"] {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let d3 = tempfile::tempdir().unwrap();
    analyze("cross", d3.path(), &["--seed", "12"]);
    assert_ne!(std::fs::read(d1.path().join("cross.json")).unwrap(), std::fs::read(d3.path().join("cross.json")).unwrap());
}

#[test]
fn timing_flag_adds_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(analyze("e3", dir.path(), &["--timing"]).status.code(), Some(0));
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("e3.json")).unwrap()).unwrap();
    assert!(rec.wall_time.is_some());
}

#[test]
fn starved_budget_is_an_assertion_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = analyze("e5", dir.path(), &["--budget", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("assertion failed"));
    // The report is still written so the failure can be inspected.
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("e5.json")).unwrap()).unwrap();
    assert!(!rec.passed());
}

#[test]
fn malformed_dimension_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        dir.path(),
        "dim 2\nset A line point=0,0 direction=1,0,0\nset B line point=0,0 direction=1,1\nset intersection point at=0,0\nxbar 0,0\n",
    );
    let o = regkit(&["analyze", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2: expected 2 coordinates"), "{}", stderr(&o));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = "dim 2\nset A line point=0,0 direction=1,0\nset B line point=0,0 direction=1,1\nset intersection point at=0,0\n";
    let cases = [
        (format!("{base}xbar 0,0\nflavour mint\n"), "unknown key"),
        (format!("{base}xbar 1,0\n"), "not in the set"),
        (format!("{base}xbar 0,0\ndelta -1\n"), "delta must be positive"),
        (base.replace("point at=0,0", "point at=1,1") + "xbar 0,0\n", "not in the set"),
        (format!("{base}xbar 0,0\nbudget 10\nbudget 20\n"), "given twice"),
        ("xbar 0,0\n".to_string(), "xbar before dim"),
    ];
    for (text, msg) in cases {
        let p = write_scenario(dir.path(), &text);
        let o = regkit(&["analyze", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).contains(msg), "{msg}: {}", stderr(&o));
    }
    assert_eq!(regkit(&["analyze", "/nonexistent.scenario"]).status.code(), Some(1));
    assert_eq!(regkit(&["frobnicate"]).status.code(), Some(1));
    let e5 = scenario("e5");
    assert_eq!(regkit(&["analyze", e5.to_str().unwrap(), "--delta", "0"]).status.code(), Some(1));
    assert_eq!(regkit(&["classify", e5.to_str().unwrap(), "--set", "C"]).status.code(), Some(1));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_regkit"))
        .args(["verify", "--filter", "friedrichs/complement"])
        .env("REGKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_regkit"))
        .args(["verify", "--filter", "friedrichs/complement"])
        .env("REGKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn classify_cross_and_circle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cross = scenario("cross");
    assert_eq!(regkit(&["classify", cross.to_str().unwrap(), "--set", "A", "--out", d]).status.code(), Some(0));
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("cross-ladder-A.json")).unwrap()).unwrap();
    let l = &rec.ladders["A"];
    assert_eq!(l.clarke.verdict.holds, Some(false));
    assert!(l.elemental_subregular.modulus.as_ref().unwrap().get().unwrap() < 1e-12);

    let circle = scenario("circle-secant");
    assert_eq!(regkit(&["classify", circle.to_str().unwrap(), "--set", "A", "--out", d]).status.code(), Some(0));
    let rec = parse_report(&std::fs::read_to_string(dir.path().join("circle-secant-ladder-A.json")).unwrap()).unwrap();
    let l = &rec.ladders["A"];
    for r in [&l.prox_regular, &l.super_regular, &l.clarke] {
        assert_eq!(r.verdict.holds, Some(true));
    }
    assert_eq!(l.convex.verdict.holds, Some(false));
}

fn rates(dir: &Path, name: &str, alg: &str) -> Vec<(usize, Option<f64>, bool)> {
    let mut r = csv::Reader::from_path(dir.join(format!("{name}-{alg}-rates.csv"))).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[2].parse().unwrap(), rec[6].parse().ok(), &rec[5] == "true")
        })
        .collect()
}

#[test]
fn solve_writes_traces_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let e5 = scenario("e5");
    let o = regkit(&["solve", e5.to_str().unwrap(), "--alg", "ap", "--starts", "3", "--out", d]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for (_, rate, _) in rates(dir.path(), "e5", "ap") {
        assert!((rate.unwrap() - 0.5).abs() < 1e-4);
    }
    for i in 0..3 {
        let t = parse_trace_csv(&std::fs::read_to_string(dir.path().join(format!("e5-ap-{i}.csv"))).unwrap()).unwrap();
        assert_eq!(t.dim, 2);
        assert!(t.rows.len() > 10);
        assert!(t.rows.last().unwrap().d_int < 1e-10);
    }

    let o = regkit(&["solve", e5.to_str().unwrap(), "--alg", "dr", "--starts", "2", "--out", d]);
    assert_eq!(o.status.code(), Some(0));
    for (_, rate, _) in rates(dir.path(), "e5", "dr") {
        assert!(rate.unwrap() < 1.0);
    }

    let e3 = scenario("e3");
    assert_eq!(regkit(&["solve", e3.to_str().unwrap(), "--starts", "2", "--out", d]).status.code(), Some(0));
    for (iterations, _, finite) in rates(dir.path(), "e3", "ap") {
        assert!(iterations <= 2 && finite, "{iterations}");
    }
    assert_eq!(regkit(&["solve", e5.to_str().unwrap(), "--starts", "0"]).status.code(), Some(1));
}

#[test]
fn verify_filter_keeps_only_matching_checks() {
    let o = regkit(&["verify", "--suite", "paper", "--filter", "e5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).map(String::from).collect();
    assert!(lines.len() >= 8);
    for l in &lines {
        assert!(l.split_whitespace().nth(1).unwrap().contains("e5"), "{l}");
    }
    assert_eq!(regkit(&["verify", "--filter", "no-such-check"]).status.code(), Some(1));
}

#[test]
fn verify_fails_loudly_on_a_starved_battery() {
    let o = regkit(&["verify", "--filter", "e5/", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL e5/sandwich"));
}

#[test]
fn perturbed_identity_tolerance_fails() {
    let cfg = SuiteConfig {
        filter: Some("identities".into()),
        tol: Tolerances {
            identity: 0.0,
            ..Tolerances::default()
        },
        ..SuiteConfig::default()
    };
    let r = suite::run(&cfg).unwrap();
    assert_eq!(r.len(), 1);
    assert!(!r[0].pass, "{}", r[0].detail);

    let cfg = SuiteConfig {
        filter: Some("friedrichs".into()),
        tol: Tolerances {
            fri1: -1.0,
            fri2: -1.0,
            ..Tolerances::default()
        },
        ..SuiteConfig::default()
    };
    assert!(suite::run(&cfg).unwrap().iter().all(|r| !r.pass));
}

#[test]
fn report_merges_json_into_one_table() {
    let dir = tempfile::tempdir().unwrap();
    analyze("e3", dir.path(), &[]);
    analyze("e2-interior", dir.path(), &[]);
    let out = dir.path().join("sweep.csv");
    let a = dir.path().join("e3.json");
    let b = dir.path().join("e2-interior.json");
    let o = regkit(&["report", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("scenario,")).count(), 1);
    assert!(text.contains("e3,constants.sr,"));
    assert!(text.contains("e2-interior,constants.sr,inf,"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"tool\": \"regkit\"").unwrap();
    assert_eq!(regkit(&["report", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn shipped_scenarios_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let f = regkit_cli::parse_scenario(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(regkit_cli::parse_scenario(&f.to_text()).unwrap(), f);
        f.build().unwrap();
        n += 1;
    }
    assert!(n >= 2);
}
