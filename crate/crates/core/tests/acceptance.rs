//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ivput_core::mc::{estimate_with, EventFilter, Payoff, SimConfig, StartState, StoppingRule};
use ivput_core::pre_regime::b0_of_mu0;
use ivput_core::verify::{
    absorbed_probes, attainment_checks, dominance_checks, excited_probes, pre_regime_probes, Check,
};
use ivput_core::{
    beta_roots, classify, classify_reformulated, exit_transforms, mckean_boundary, mu0_crossing,
    s0_max, solve_excited, solve_pre_regime, toy_nonuniqueness_a4, Case, Error, Params,
};

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            passed,
            summary: summary.into(),
            details: Vec::new(),
        }
    }
}

type Criterion = fn() -> Result<Outcome, Error>;

fn worked(mu0: f64, s0: f64) -> Params {
    Params::worked_example(mu0, s0)
}

fn excited_boundary() -> Result<Outcome, Error> {
    let b1 = solve_excited(&worked(0.30, 15000.0))?.b1;
    Ok(Outcome::new(
        (b1 - 14658.0).abs() <= 1.0,
        format!("b1 = {b1:.3} (want 14658 +- 1)"),
    ))
}

fn curve_crossing() -> Result<Outcome, Error> {
    let p = worked(0.30, 15000.0);
    let e = solve_excited(&p)?;
    let mu = mu0_crossing(&p, &e)?;
    let b0 = b0_of_mu0(mu, &p)?;
    Ok(Outcome::new(
        (mu - 0.137).abs() <= 0.002 && (b0 - e.b1).abs() < 1e-6,
        format!(
            "mu0 = {mu:.6} with b0 = {b0:.3}, b1 = {:.3} (want 0.137 +- 0.002)",
            e.b1
        ),
    ))
}

fn switch_level() -> Result<Outcome, Error> {
    let p = worked(0.30, 15000.0);
    let e = solve_excited(&p)?;
    let root = s0_max(0.30, &p, &e)?;
    let below = classify(&p.with_s0(root - 1.0), &e)?;
    let above = classify(&p.with_s0(root + 1.0), &e)?;
    Ok(Outcome::new(
        (root - 15742.0).abs() <= 3.0,
        format!("s0_max(0.30) = {root:.3} (want 15742 +- 3); case {below} below, {above} above"),
    ))
}

fn case_iv_boundary() -> Result<Outcome, Error> {
    let p = worked(0.30, 15000.0);
    let sol = solve_pre_regime(&p, &solve_excited(&p)?)?;
    let b = sol.b_star().unwrap_or(f64::NAN);
    let gap = sol.b0 - b;
    Ok(Outcome::new(
        sol.case == Case::IV && (b - 15030.0).abs() <= 3.0 && (gap - 800.0).abs() <= 80.0,
        format!(
            "b* = {b:.3}, b* - s0 = {:.3} (want 15030 +- 3); b0 - b* = {gap:.3} (want 800 +- 80)",
            b - p.s0
        ),
    ))
}

fn classification_map() -> Result<Outcome, Error> {
    let base = worked(0.0, 15000.0);
    let e = solve_excited(&base)?;
    let witnesses = [
        (-1.0, 14500.0, Case::IIIc),
        (-1.0, 15000.0, Case::IIIb),
        (0.30, 15000.0, Case::IV),
        (0.30, 15780.0, Case::IIIa),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (mu0, s0, want) in witnesses {
        let got = classify(&base.with_mu0(mu0).with_s0(s0), &e)?;
        ok &= got == want;
        details.push(format!("({mu0}, {s0}) -> {got} (want {want})"));
    }
    let (mut compared, mut banded, mut disagree) = (0, 0, 0);
    for i in 0..50 {
        for j in 0..50 {
            let mu0 = -1.0 + 2.0 * i as f64 / 49.0;
            let s0 = 14000.0 + 2500.0 * j as f64 / 49.0;
            let p = base.with_mu0(mu0).with_s0(s0);
            let primal = classify(&p, &e)?;
            if let Some(r) = classify_reformulated(&p, &e)? {
                compared += 1;
                if r != primal {
                    if primal == Case::IIIc && r == Case::IIIb {
                        banded += 1;
                    } else {
                        disagree += 1;
                    }
                }
            }
        }
    }
    ok &= disagree == 0;
    Ok(Outcome {
        passed: ok,
        summary: format!(
            "4 witnesses, 50x50 grid: {compared} comparable points, {disagree} disagreements, {banded} inside the equality band"
        ),
        details,
    })
}

fn residuals() -> Result<Outcome, Error> {
    let mut worst_excited: f64 = 0.0;
    let mut worst_band: f64 = 0.0;
    let mut worst_slope: f64 = 0.0;
    let mut iv_points = 0;
    for i in 0..10 {
        for j in 0..10 {
            let p = Params {
                sigma1: 0.15 + 0.05 * i as f64,
                lambda: 10f64.powf(-1.0 + 0.5 * j as f64),
                ..worked(0.30, 15000.0)
            };
            let e = solve_excited(&p)?;
            worst_excited = worst_excited.max(e.max_residual());
            let h = 1e-5 * e.b1;
            let fd = (e.value(e.b1 + h) - e.value(e.b1 - h)) / (2.0 * h);
            worst_slope = worst_slope.max((fd + 1.0).abs());
            let sol = solve_pre_regime(&p, &e)?;
            if let Some(r) = sol.band_residuals(512) {
                iv_points += 1;
                worst_band = r.iter().copied().fold(worst_band, f64::max);
                let b = sol.b_star().unwrap();
                if b > p.s0 * (1.0 + 1e-5) {
                    let hb = 1e-5 * b;
                    let left = (sol.value(b)? - sol.value(b - hb)?) / hb;
                    worst_slope = worst_slope.max((left + 1.0).abs());
                }
                let h0 = 1e-5 * sol.b0;
                let right = (sol.value(sol.b0 + h0)? - sol.value(sol.b0)?) / h0;
                worst_slope = worst_slope.max((right + 1.0).abs());
            }
        }
    }
    Ok(Outcome::new(
        worst_excited < 1e-9 && worst_band < 1e-9 && worst_slope < 1e-3,
        format!(
            "worst excited residual {worst_excited:.2e}, worst band residual {worst_band:.2e} over {iv_points} case-IV points, worst |slope + 1| {worst_slope:.2e}"
        ),
    ))
}

struct McCase {
    label: &'static str,
    params: Params,
}

fn mc_cases() -> [McCase; 3] {
    [
        McCase {
            label: "IIIb",
            params: worked(-1.0, 15000.0),
        },
        McCase {
            label: "IIIc",
            params: worked(-1.0, 14500.0),
        },
        McCase {
            label: "IV",
            params: worked(0.30, 15000.0),
        },
    ]
}

fn config(p: &Params, seed: u64) -> SimConfig {
    SimConfig {
        n_paths: 200_000,
        dt: 1.0 / 5000.0,
        seed,
        ..SimConfig::for_params(p)
    }
}

fn summarize(checks: &[Check]) -> (bool, Vec<String>) {
    let ok = checks.iter().all(|c| c.passed);
    let details = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}: {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect();
    (ok, details)
}

fn attainment() -> Result<Outcome, Error> {
    let mut checks = Vec::new();
    let p = worked(0.30, 15000.0);
    let e = solve_excited(&p)?;
    let pre = solve_pre_regime(&p, &e)?;
    let cfg = config(&p, 11);
    checks.extend(attainment_checks(&p, &e, &pre, &absorbed_probes(&p), &cfg)?);
    checks.extend(attainment_checks(&p, &e, &pre, &excited_probes(&e), &cfg)?);
    for (i, c) in mc_cases().iter().enumerate() {
        let e = solve_excited(&c.params)?;
        let pre = solve_pre_regime(&c.params, &e)?;
        assert_eq!(pre.case.to_string(), c.label);
        let probes = pre_regime_probes(&pre)?;
        checks.extend(attainment_checks(
            &c.params,
            &e,
            &pre,
            &probes,
            &config(&c.params, 12 + i as u64),
        )?);
    }
    let (ok, details) = summarize(&checks);
    Ok(Outcome {
        passed: ok,
        summary: format!(
            "{} of {} probes within 3 SE over cases i, ii, IIIb, IIIc, IV",
            checks.iter().filter(|c| c.passed).count(),
            checks.len()
        ),
        details,
    })
}

fn dominance() -> Result<Outcome, Error> {
    let mut checks = Vec::new();
    for (i, c) in mc_cases().iter().enumerate() {
        let e = solve_excited(&c.params)?;
        let pre = solve_pre_regime(&c.params, &e)?;
        let cfg = config(&c.params, 21 + i as u64);
        checks.extend(
            dominance_checks(&c.params, &e, &pre, &cfg)?
                .into_iter()
                .map(|mut k| {
                    k.name = format!("[{}] {}", c.label, k.name);
                    k
                }),
        );
    }
    let (ok, details) = summarize(&checks);
    Ok(Outcome {
        passed: ok,
        summary: format!(
            "{} of {} rule/probe pairs at or below analytic + 3 SE",
            checks.iter().filter(|c| c.passed).count(),
            checks.len()
        ),
        details,
    })
}

fn degenerations() -> Result<Outcome, Error> {
    let base = worked(0.30, 15000.0);
    let slow = Params {
        lambda: 1e-10,
        ..base
    };
    let b1 = solve_excited(&slow)?.b1;
    let b0 = mckean_boundary(
        beta_roots(slow.mu1, slow.sigma1, slow.alpha, 0.0)?,
        slow.strike_k,
    );
    let fast = Params {
        lambda: 1e6,
        ..base
    };
    let e = solve_excited(&fast)?;
    let k = fast.strike_k;
    let sup = (1..1000)
        .map(|i| {
            let s = e.b1 + (k - e.b1) * i as f64 / 1000.0;
            (e.value(s) - fast.gain(s)).abs()
        })
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        (b1 - b0).abs() < 1e-6 * k && sup < 1e-3 * k,
        format!(
            "lambda = 1e-10: |b1 - b0| = {:.3e}; lambda = 1e6: sup |V - gain| = {sup:.3} (bound {:.1})",
            (b1 - b0).abs(),
            1e-3 * k
        ),
    ))
}

fn toy_problem() -> Result<Outcome, Error> {
    let c = toy_nonuniqueness_a4();
    let has = |c2: f64, x0: f64| c.iter().any(|t| t.c2 == c2 && t.x0 == x0);
    let res = c
        .iter()
        .map(|t| t.value_residual.abs().max(t.slope_residual.abs()))
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        has(1.0, 1.0) && has(2.0, 0.5) && res < 1e-12,
        format!("{} candidates, worst residual {res:.1e}", c.len()),
    ))
}

fn laplace() -> Result<Outcome, Error> {
    let p = worked(0.30, 14000.0);
    let g = p.gamma()?;
    let cfg = config(&p, 31);
    let start = StartState::pre(15000.0);
    let mut details = Vec::new();
    let mut ok = true;
    let mut check =
        |label: &str, rule: &StoppingRule, filter: EventFilter, want: f64| -> Result<(), Error> {
            let est = estimate_with(&p, &start, &cfg, rule, Payoff::Discount(filter))?;
            let z = (est.mean - want) / est.std_error;
            ok &= z.abs() <= 3.0;
            details.push(format!(
                "{label}: mc {:.6} se {:.6} closed form {want:.6} z {z:.2}",
                est.mean, est.std_error
            ));
            Ok(())
        };
    check(
        "E[exp(-alpha tau_s0)]",
        &StoppingRule::HitLevelPreRegime(14000.0),
        EventFilter::Any,
        (15000.0f64 / 14000.0).powf(g.neg),
    )?;
    let (phi1, phi2) = exit_transforms(15000.0, 16000.0, g, 14000.0)?;
    let exit = StoppingRule::Composite(vec![
        StoppingRule::HitLevelPreRegime(14000.0),
        StoppingRule::HitUpperPreRegime(16000.0),
    ]);
    check("phi1", &exit, EventFilter::Lower, phi1)?;
    check("phi2", &exit, EventFilter::Upper, phi2)?;
    Ok(Outcome {
        passed: ok,
        summary: "hitting-time and two-sided exit transforms against simulation".into(),
        details,
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, Duration); 11] = [
        ("excited boundary", excited_boundary, Duration::from_secs(1)),
        ("curve crossing", curve_crossing, Duration::from_secs(1)),
        ("case-switch level", switch_level, Duration::from_secs(5)),
        ("case-IV boundary", case_iv_boundary, Duration::from_secs(5)),
        (
            "classification map",
            classification_map,
            Duration::from_secs(30),
        ),
        ("system residuals", residuals, Duration::from_secs(30)),
        ("MC attainment", attainment, Duration::from_secs(600)),
        ("MC dominance", dominance, Duration::from_secs(600)),
        ("degenerations", degenerations, Duration::from_secs(5)),
        ("toy non-uniqueness", toy_problem, Duration::from_secs(1)),
        ("Laplace transforms", laplace, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    let mut mc_total = Duration::ZERO;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let took = t.elapsed();
        if i == 6 || i == 7 {
            mc_total += took;
        }
        let (passed, summary, details) = match outcome {
            Ok(o) => (o.passed && took <= *budget, o.summary, o.details),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {summary} [{:.4} s, budget {} s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
        for d in details {
            println!("       {d}");
        }
    }
    println!(
        "MC attainment + dominance took {:.1} s (shared budget 600 s)",
        mc_total.as_secs_f64()
    );
    if mc_total > Duration::from_secs(600) {
        failed += 1;
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed.min(criteria.len()),
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
