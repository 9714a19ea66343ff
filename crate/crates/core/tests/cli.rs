mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use switchopt::cli::{parse_grid, CliError};
use switchopt::{CaseId, ProblemData, Solution, SwitchError};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_switchopt"));
    c.env("SWITCHOPT_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, d: &ProblemData) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, d.to_json()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_canonical() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "canonical_I2.json", &common::canonical_i2());
    let o = run(&["solve", "--input", s(&input)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in ["\"case\":\"I2\"", "\"alpha\":2.0", "\"B\":0.25"] {
        assert!(text.contains(needle), "{needle} missing from {text}");
    }
}

#[test]
fn classify_trivial() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "trivial_I1.json", &common::representative(CaseId::I1));
    let o = run(&["classify", "--input", s(&input)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), r#"{"case":"I1"}"#);
}

#[test]
fn classify_reports_thresholds_it_computed() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "ii3.json", &common::representative(CaseId::II3));
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["classify", "--input", s(&input)]))).unwrap();
    assert_eq!(v["case"], "II3");
    assert!(v["K0_star"].as_f64().unwrap() > 0.0);
    assert!(v["delta_dagger"].is_number() && v["x_hat"].is_number());
    assert!(v.get("K0_dagger").is_none());
}

#[test]
fn sample_grid_csv() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.json", &common::canonical_i2());
    let out = dir.path().join("grid.csv");
    let o = run(&[
        "sample",
        "--input",
        s(&input),
        "--grid",
        "0.1:10:100:log",
        "--output",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,w1,w0,dw1,dw0,region1,region0");
    assert_eq!(lines.len(), 101);
    assert!(lines[1].starts_with("0.1,") && lines[100].starts_with("10,"));
    // Below α = 2 the closed project waits, from α on it switches in.
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let x: f64 = f[0].parse().unwrap();
        let w0: f64 = f[2].parse().unwrap();
        let want = if x < 2.0 { 0.25 * x * x } else { x - 1.0 };
        assert!((w0 - want).abs() < 1e-12 * (1.0 + want), "{row}");
        assert_eq!(f[5], "P");
        assert_eq!(f[6], if x < 2.0 { "W" } else { "S_in" });
    }
}

#[test]
fn linear_grid_without_log_flag() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.json", &common::canonical_i2());
    let csv = stdout(&run(&["sample", "--input", s(&input), "--grid", "1:3:5"]));
    let xs: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(xs, ["1", "1.5", "2", "2.5", "3"]);
}

#[test]
fn verify_rereads_solve_output() {
    let dir = TempDir::new().unwrap();
    let mut rng = common::rng(5);
    for case in CaseId::ALL {
        let input = write(&dir, "p.json", &common::instance(case, &mut rng));
        let sol = dir.path().join("sol.json");
        assert_eq!(
            run(&["solve", "--input", s(&input), "--output", s(&sol)])
                .status
                .code(),
            Some(0)
        );
        let text = std::fs::read_to_string(&sol).unwrap();
        let parsed = Solution::from_json(&text).unwrap();
        let o = run(&["verify", "--input", s(&sol)]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["case"], case.as_str());
        assert_eq!(v["boundaries_reproduced"], true);
        assert_eq!(v["pass"], true, "{case}");
        let back: switchopt::FreeBoundaries =
            serde_json::from_value(v["boundaries"].clone()).unwrap();
        assert_eq!(back, parsed.boundaries);
    }
}

#[test]
fn verify_flags_an_edited_solution() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.json", &common::canonical_i2());
    let text = stdout(&run(&["solve", "--input", s(&input)]));
    let edited = dir.path().join("edited.json");
    std::fs::write(&edited, text.replace("\"alpha\":2.0", "\"alpha\":2.1")).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["verify", "--input", s(&edited)]))).unwrap();
    assert_eq!(v["boundaries_reproduced"], false);
    assert_eq!(v["pass"], false);
}

#[test]
fn simulate_reports_value_and_mc() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "c.json",
        &common::rescale_time(common::canonical_i2(), 50.0),
    );
    let args = [
        "simulate",
        "--input",
        s(&input),
        "--z",
        "0",
        "--x0",
        "1",
        "--paths",
        "4000",
        "--seed",
        "3",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["value"], 0.25);
    assert_eq!(v["region"], "W");
    assert_eq!(v["mc"]["paths"], 4000);
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["pass"], true);
    assert_eq!(stdout(&run(&args)), stdout(&o));
}

#[test]
fn invalid_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.json", &common::canonical_i2());
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    let bad_market = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&common::canonical_i2().to_json()).unwrap();
    v["market"]["sigma2"] = serde_json::json!(-0.5);
    std::fs::write(&bad_market, v.to_string()).unwrap();
    let missing = dir.path().join("missing.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--input", s(&garbage)],
        vec!["solve", "--input", s(&bad_market)],
        vec!["solve", "--input", s(&missing)],
        vec!["explode", "--input", s(&input)],
        vec!["solve"],
        vec!["sample", "--input", s(&input), "--grid", "0:1:10"],
        vec!["sample", "--input", s(&input), "--grid", "1:2:1"],
        vec!["simulate", "--input", s(&input)],
        vec!["simulate", "--input", s(&input), "--x0", "1", "--z", "2"],
        vec![
            "simulate",
            "--input",
            s(&input),
            "--x0",
            "1",
            "--paths",
            "0",
        ],
        vec![
            "simulate",
            "--input",
            s(&input),
            "--x0",
            "-1",
            "--paths",
            "10",
        ],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn solver_failures_map_to_exit_3() {
    let nb = SwitchError::RootNotBracketed {
        equation: "closed-mode switch-in (alpha)",
        lo: 1.0,
        hi: 2.0,
    };
    let e = CliError::from(nb);
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().contains("closed-mode switch-in (alpha)"));
    assert_eq!(
        CliError::from(SwitchError::PreconditionViolated("x".into())).exit_code(),
        3
    );
    assert_eq!(
        CliError::from(SwitchError::DivergentIntegral("x".into())).exit_code(),
        2
    );
    assert_eq!(
        CliError::from(SwitchError::InvalidPerturbation("x".into())).exit_code(),
        2
    );
}

#[test]
fn grid_parser() {
    let g = parse_grid("0.5:8:16:log").unwrap();
    assert_eq!((g.x_min, g.x_max, g.points, g.log), (0.5, 8.0, 16, true));
    assert!(!parse_grid("1:2:3").unwrap().log);
    for bad in [
        "1:2",
        "1:2:3:lin",
        "2:1:5",
        "1:2:x",
        "-1:2:5",
        "1:inf:5",
        "1:2:3:log:4",
    ] {
        assert!(parse_grid(bad).is_err(), "{bad}");
    }
}
