use std::path::Path;
use std::process::{Command, Output};

use ivput_core::{s0_max, solve_excited, Params};

fn ivput(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivput"))
        .args(args)
        .output()
        .expect("run ivput")
}

fn ok(args: &[&str]) -> String {
    let out = ivput(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

type Rows = Vec<std::collections::HashMap<String, String>>;

fn parse(text: &str) -> Rows {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(rec.iter().map(String::from))
                .collect()
        })
        .collect()
}

fn read(path: &Path) -> Rows {
    parse(&std::fs::read_to_string(path).unwrap())
}

fn num(row: &std::collections::HashMap<String, String>, col: &str) -> f64 {
    row[col]
        .parse()
        .unwrap_or_else(|_| panic!("{col} = {:?}", row[col]))
}

#[test]
fn classify_reports_case_and_action() {
    for (args, case, action) in [
        (
            &["--mu0", "-1.0", "--s0", "15000", "--spot", "15500"][..],
            "IIIb",
            "WaitForS0ThenExcited",
        ),
        (
            &["--mu0", "0.30", "--s0", "15000", "--spot", "15500"][..],
            "IV",
            "ExerciseNow",
        ),
        (
            &["--mu0", "0.30", "--s0", "15000", "--spot", "18000"][..],
            "IV",
            "WaitForB0",
        ),
        (
            &["--mu0", "-1.0", "--s0", "14500", "--spot", "15000"][..],
            "IIIc",
            "WaitForS0ThenExerciseAtS0",
        ),
        (
            &["--mu0", "0.30", "--s0", "15780", "--spot", "16000"][..],
            "IIIa",
            "WaitForS0ThenExcited",
        ),
    ] {
        let mut a = vec!["classify"];
        a.extend_from_slice(args);
        let rows = parse(&ok(&a));
        assert_eq!(rows.len(), 1);
        assert_eq!(
            (rows[0]["case"].as_str(), rows[0]["action"].as_str()),
            (case, action),
            "{args:?}"
        );
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# case IIIb\nmu0 = -1.0\ns0 = 15000\nspot = 15500\n").unwrap();
    let path = cfg.to_str().unwrap();
    assert_eq!(
        parse(&ok(&["classify", "--config", path]))[0]["case"],
        "IIIb"
    );
    let r = parse(&ok(&["classify", "--config", path, "--mu0", "0.3"]));
    assert_eq!(
        (r[0]["case"].as_str(), r[0]["action"].as_str()),
        ("IV", "ExerciseNow")
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mu0 = 0.3\nsigma0 = fast\n").unwrap();
    let out = ivput(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.cfg:2:") && err.contains("sigma0"),
        "{err}"
    );

    for args in [
        &["classify", "--no-such-flag"][..],
        &["frobnicate"][..],
        &["classify", "--sigma0", "-0.2"][..],
        &["classify", "--spot", "100"][..],
        &["select-strike"][..],
        &["simulate", "--rule", "hit-level", "--spot", "15500"][..],
        &["curves", "--mu0-values", "0.3,0.1"][..],
    ] {
        assert_eq!(ivput(args).status.code(), Some(1), "{args:?}");
    }
    let file = dir.path().join("occupied");
    std::fs::write(&file, "").unwrap();
    let out = ivput(&["classify", "--out", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(ivput(&["--help"]).status.code(), Some(0));
}

#[test]
fn curves_match_the_library_and_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["curves", "--out", d.path().to_str().unwrap()]);
    }
    for name in ["curves_mu0.csv", "b_star_curve.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }

    let rows = read(&a.path().join("curves_mu0.csv"));
    assert_eq!(rows.len(), 401);
    assert!(
        rows.iter().all(|r| r["b1"] == rows[0]["b1"]),
        "b1 does not depend on mu0"
    );
    let p = Params::worked_example(0.30, 15000.0);
    let e = solve_excited(&p).unwrap();
    let at = rows
        .iter()
        .find(|r| r["mu0"] == "0.3")
        .expect("mu0 = 0.3 row");
    assert!((num(at, "s0_max") - s0_max(0.30, &p, &e).unwrap()).abs() < 1e-6);
    for w in rows.windows(2) {
        assert!(num(&w[1], "b0") > num(&w[0], "b0"), "b0 increases with mu0");
    }
    for r in &rows {
        assert_eq!(
            r["s0_max"].is_empty(),
            num(r, "b0") <= num(r, "b1"),
            "mu0 = {}",
            r["mu0"]
        );
    }

    // approaching the switch level the band closes onto b0
    let b0 = num(at, "b0");
    let curve = read(&a.path().join("b_star_curve.csv"));
    assert_eq!(curve.len(), 251);
    let last = curve
        .iter()
        .rev()
        .find(|r| !r["b_star_minus_s0"].is_empty())
        .unwrap();
    let b_star = num(last, "s0") + num(last, "b_star_minus_s0");
    assert!(b0 - b_star < 0.01 * b0, "last row {last:?}");
    assert!(num(last, "s0") < num(at, "s0_max"));
}

#[test]
fn curve_row_at_the_crossing_drift() {
    let d = tempfile::tempdir().unwrap();
    ok(&[
        "curves",
        "--out",
        d.path().to_str().unwrap(),
        "--mu0-values",
        "0.137158",
        "--s0-values",
        "15000",
    ]);
    let rows = read(&d.path().join("curves_mu0.csv"));
    assert!(
        (num(&rows[0], "b0") - 14658.0).abs() <= 2.0,
        "{:?}",
        rows[0]
    );
    let b = read(&d.path().join("b_star_curve.csv"));
    assert!(
        (num(&b[0], "b_star_minus_s0") - 30.0).abs() <= 3.0,
        "{:?}",
        b[0]
    );
}

#[test]
fn jsonl_carries_the_same_rows() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    ok(&[
        "curves",
        "--out",
        dir,
        "--format",
        "jsonl",
        "--mu0-values",
        "0.0,0.3",
        "--s0-values",
        "15000",
    ]);
    let text = std::fs::read_to_string(d.path().join("curves_mu0.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["s0_max"].is_null());
    assert!((lines[1]["s0_max"].as_f64().unwrap() - 15748.576).abs() < 1e-2);
}

fn profile(args: &[&str]) -> Rows {
    let d = tempfile::tempdir().unwrap();
    let mut a = vec!["value-profile", "--out", d.path().to_str().unwrap()];
    a.extend_from_slice(args);
    ok(&a);
    read(&d.path().join("value_profile.csv"))
}

#[test]
fn value_profiles() {
    let p = Params::worked_example(0.30, 15000.0);
    let b1 = solve_excited(&p).unwrap().b1;
    let at_b1 = profile(&["--s-values", &format!("{b1:.17}")]);
    assert!((num(&at_b1[0], "v_excited") - (p.strike_k - b1)).abs() < 1e-9 * p.strike_k);

    let iv = profile(&["--s-min", "14000", "--s-max", "20000", "--s-step", "5"]);
    let sol = ivput_core::solve_pre_regime(&p, &solve_excited(&p).unwrap()).unwrap();
    let (b_star, b0) = (sol.b_star().unwrap(), sol.b0);
    for r in &iv {
        let s = num(r, "s");
        assert_eq!(r["v_pre_regime"].is_empty(), s <= p.s0);
        assert!(num(r, "v_excited") >= num(r, "gain") - 1e-9 * p.strike_k);
        if s > p.s0 {
            let gap = num(r, "v_pre_regime") - num(r, "gain");
            if s >= b_star && s <= b0 {
                assert!(gap.abs() < 1e-6, "s = {s}: {gap}");
            } else {
                assert!(gap > 0.0, "s = {s}: {gap}");
            }
        }
    }

    let iiia = profile(&[
        "--s0", "15780", "--s-min", "15790", "--s-max", "40000", "--s-step", "10",
    ]);
    for r in &iiia {
        assert!(num(r, "v_pre_regime") > num(r, "gain"), "{r:?}");
    }
}

#[test]
fn strike_screening() {
    let rows = parse(&ok(&[
        "select-strike",
        "--spot",
        "15500",
        "--strikes",
        "16300,17000,18000",
    ]));
    let by = |k: &str| rows.iter().find(|r| r["strike_K"] == k).unwrap();
    let k17 = by("17000");
    assert_eq!(k17["feasible"], "true");
    assert!((num(k17, "mu0_cross") - 0.137).abs() <= 0.002);
    assert!((num(k17, "mu0_shifted") - 0.30).abs() <= 0.002);
    assert_eq!(k17["rho0"], "0.163");
    assert!(by("18000")["reasons"].contains("s0 <= b1"));
    assert!(by("16300")["reasons"].contains("s >= b0"));
    assert_eq!(by("16300")["feasible"], "false");

    // above b*, raising the spot only loses feasibility through b0
    let mut was_feasible = true;
    for spot in (15100..16400).step_by(50) {
        let r = parse(&ok(&[
            "select-strike",
            "--spot",
            &spot.to_string(),
            "--strikes",
            "17000",
        ]));
        let feasible = r[0]["feasible"] == "true";
        assert!(was_feasible || !feasible, "spot {spot}");
        if !feasible {
            assert_eq!(r[0]["reasons"], "s >= b0", "spot {spot}");
        }
        was_feasible = feasible;
    }
    assert!(!was_feasible);
}

#[test]
fn verification_passes_and_catches_a_corrupted_boundary() {
    for (mu0, s0) in [("-1.0", "15000"), ("0.30", "15000")] {
        let out = ivput(&[
            "verify", "--mu0", mu0, "--s0", s0, "--paths", "20000", "--seed", "5",
        ]);
        let table = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "({mu0}, {s0}):\n{table}");
        assert!(parse(&table).iter().all(|r| r["passed"] == "true"));
    }
    let out = ivput(&[
        "verify",
        "--paths",
        "20000",
        "--seed",
        "5",
        "--scale-b1",
        "0.8",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--seed 5"), "{err}");
    assert!(parse(&String::from_utf8_lossy(&out.stdout))
        .iter()
        .any(|r| r["passed"] == "false"));
}

#[test]
fn simulation_is_reproducible() {
    let args = [
        "simulate",
        "--rule",
        "excited-optimal",
        "--regime",
        "excited",
        "--spot",
        "15500",
        "--paths",
        "4000",
        "--seed",
        "9",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let r = parse(&a);
    assert_eq!(r[0]["seed"], "9");
    assert_eq!(r[0]["n_paths"], "4000");
    let other = ok(&[
        "simulate",
        "--rule",
        "excited-optimal",
        "--regime",
        "excited",
        "--spot",
        "15500",
        "--paths",
        "4000",
        "--seed",
        "10",
    ]);
    assert_ne!(a, other);
}
