//! Structural and Monte Carlo checks of a solved model.
//!
//! Probe points are placed relative to the solution's own boundaries, so a
//! corrupted solution is probed where its errors show.

use serde::Serialize;

use crate::analytic::ModelParams;
use crate::error::Result;
use crate::excited::ExcitedSolution;
use crate::mc::{estimate, MCEstimate, SimConfig, StartState, StoppingRule};
use crate::pre_regime::{Case, PreRegimeSolution};

/// Relative residual bound for the pasting systems.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Bound on `|FD slope + 1|` at a free boundary.
pub const SLOPE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub case: Case,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A start state together with the analytic value there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub start: StartState,
    pub analytic: f64,
}

/// Three absorbed-state probes: `V(s, 1, 0) = (K - s)^+`.
pub fn absorbed_probes(params: &ModelParams<f64>) -> Vec<Probe> {
    let k = params.strike_k;
    [0.5 * k, 0.9 * k, 1.2 * k]
        .into_iter()
        .map(|s| Probe {
            start: StartState::absorbed(s),
            analytic: params.gain(s),
        })
        .collect()
}

/// Three excited-state probes in the continuation region `(b1, inf)`.
pub fn excited_probes(excited: &ExcitedSolution<f64>) -> Vec<Probe> {
    let (b1, k) = (excited.b1, excited.params.strike_k);
    [1.005 * b1, 0.5 * (b1 + k), 1.05 * k]
        .into_iter()
        .map(|s| Probe {
            start: StartState::excited(s),
            analytic: excited.value(s),
        })
        .collect()
}

/// Three pre-hit probes; in case IV one in each of `(s0, b*)`, `(b*, b0)`
/// and `(b0, inf)`, with the first dropped when `b* = s0`.
pub fn pre_regime_probes(pre: &PreRegimeSolution<f64>) -> Result<Vec<Probe>> {
    let s0 = pre.params.s0;
    let points: Vec<f64> = match pre.b_star() {
        Some(b) => {
            let mut v = Vec::with_capacity(3);
            if b > s0 {
                v.push(0.5 * (s0 + b));
            }
            v.push(0.5 * (b + pre.b0));
            v.push(1.03 * pre.b0);
            v
        }
        None => vec![1.005 * s0, 1.03 * s0, 1.1 * s0],
    };
    points
        .into_iter()
        .map(|s| {
            Ok(Probe {
                start: StartState::pre(s),
                analytic: pre.value(s)?,
            })
        })
        .collect()
}

/// The rule claimed optimal from `start`.
pub fn optimal_rule(
    start: &StartState,
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
) -> StoppingRule {
    use crate::mc::Regime;
    match start.regime {
        Regime::Absorbed => StoppingRule::Immediate,
        Regime::Excited => StoppingRule::ExcitedOptimal { b1: excited.b1 },
        Regime::Pre => StoppingRule::pre_regime_optimal(pre),
    }
}

/// Deliberately suboptimal rules, each paired with the probes it applies to.
pub fn suboptimal_rules(
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
) -> Result<Vec<(&'static str, StoppingRule, Vec<Probe>)>> {
    let b1 = excited.b1;
    let ex = excited_probes(excited);
    let pr = pre_regime_probes(pre)?;
    let continuation: Vec<Probe> = ex
        .iter()
        .chain(pr.iter())
        .copied()
        .filter(|p| p.analytic > pre.params.gain(p.start.s))
        .collect();
    let mut rules = vec![
        ("immediate exercise", StoppingRule::Immediate, continuation),
        ("hit 0.9 b1", StoppingRule::HitLevel(0.9 * b1), ex.clone()),
        ("hit 1.1 b1", StoppingRule::HitLevel(1.1 * b1), ex),
        (
            "stop at s0",
            StoppingRule::HitLevelPreRegime(pre.params.s0),
            pr.clone(),
        ),
    ];
    if let Some(b_star) = pre.b_star() {
        rules.push((
            "ignore band",
            StoppingRule::ExcitedOptimal { b1 },
            pr.clone(),
        ));
        rules.push((
            "band up to 1.05 b0",
            StoppingRule::Composite(vec![
                StoppingRule::HitBandPreRegime {
                    lo: b_star,
                    hi: 1.05 * pre.b0,
                },
                StoppingRule::ExcitedOptimal { b1 },
            ]),
            pr,
        ));
    }
    Ok(rules)
}

/// Absolute slack added to `3 SE` so deterministic payoffs compare equal.
fn floor(params: &ModelParams<f64>) -> f64 {
    1e-12 * params.strike_k
}

fn within(est: &MCEstimate, analytic: f64, params: &ModelParams<f64>) -> bool {
    (est.mean - analytic).abs() <= (3.0 * est.std_error).max(floor(params))
}

fn below(est: &MCEstimate, analytic: f64, params: &ModelParams<f64>) -> bool {
    est.mean <= analytic + (3.0 * est.std_error).max(floor(params))
}

fn describe(est: &MCEstimate, analytic: f64) -> String {
    // payoffs that are deterministic up to rounding have no meaningful z-score
    let z = if est.std_error > 1e-9 * analytic.abs().max(1.0) {
        format!("{:.2}", (est.mean - analytic) / est.std_error)
    } else {
        "n/a".to_string()
    };
    format!(
        "mc {:.6} se {:.6} analytic {:.6} z {z} truncated {} seed {}",
        est.mean, est.std_error, analytic, est.n_truncated, est.seed
    )
}

/// `|MC(optimal rule) - analytic| <= 3 SE` at each probe.
pub fn attainment_checks(
    params: &ModelParams<f64>,
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
    probes: &[Probe],
    config: &SimConfig,
) -> Result<Vec<Check>> {
    probes
        .iter()
        .map(|p| {
            let rule = optimal_rule(&p.start, excited, pre);
            let est = estimate(params, &p.start, config, &rule)?;
            Ok(Check::new(
                format!("attainment {:?} s={:.4}", p.start.regime, p.start.s),
                within(&est, p.analytic, params),
                describe(&est, p.analytic),
            ))
        })
        .collect()
}

/// `MC(rule) <= analytic + 3 SE` for every suboptimal rule and probe.
pub fn dominance_checks(
    params: &ModelParams<f64>,
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
    config: &SimConfig,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (label, rule, probes) in suboptimal_rules(excited, pre)? {
        for p in probes {
            let est = estimate(params, &p.start, config, &rule)?;
            out.push(Check::new(
                format!("dominance {label} {:?} s={:.4}", p.start.regime, p.start.s),
                below(&est, p.analytic, params),
                describe(&est, p.analytic),
            ));
        }
    }
    Ok(out)
}

/// Residuals, smooth pasting and dominance over the gain, no simulation.
pub fn structural_checks(
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
) -> Vec<Check> {
    let k = excited.params.strike_k;
    let mut out = Vec::new();
    let r = excited.max_residual();
    out.push(Check::new(
        "excited pasting residuals",
        r < RESIDUAL_TOL,
        format!("max relative residual {r:e}"),
    ));
    let b1 = excited.b1;
    let h = 1e-5 * b1;
    let fd = (excited.value(b1 + h) - excited.value(b1 - h)) / (2.0 * h);
    out.push(Check::new(
        "excited smooth pasting at b1",
        (fd + 1.0).abs() < SLOPE_TOL,
        format!("finite-difference slope {fd}"),
    ));
    let worst = (1..=2000)
        .map(|i| {
            let s = k * 1e-3 * (1e4f64).powf(i as f64 / 2000.0);
            excited.value(s) - excited.params.gain(s)
        })
        .fold(f64::INFINITY, f64::min);
    out.push(Check::new(
        "excited value dominates gain",
        worst >= -1e-9 * k,
        format!("smallest gap {worst}"),
    ));
    if let Some(res) = pre.band_residuals(crate::pre_regime::DOMINANCE_GRID) {
        let r = res.iter().copied().fold(0.0, f64::max);
        out.push(Check::new(
            "band conditions",
            r < RESIDUAL_TOL,
            format!("relative residuals {res:?}"),
        ));
        let b_star = pre.b_star().unwrap_or(pre.params.s0);
        for (name, x) in [("b*", b_star), ("b0", pre.b0)] {
            let h = 1e-5 * x;
            let slope = if name == "b*" {
                (pre.value(x).unwrap_or(f64::NAN) - pre.value(x - h).unwrap_or(f64::NAN)) / h
            } else {
                (pre.value(x + h).unwrap_or(f64::NAN) - pre.value(x).unwrap_or(f64::NAN)) / h
            };
            // at b* = s0 there is no left branch to difference
            let ok = (name == "b*" && b_star <= pre.params.s0 * (1.0 + 1e-5))
                || (slope + 1.0).abs() < SLOPE_TOL;
            out.push(Check::new(
                format!("pre-regime smooth pasting at {name}"),
                ok,
                format!("finite-difference slope {slope}"),
            ));
        }
    }
    let s0 = pre.params.s0;
    let worst = (1..=2000)
        .map(|i| {
            let s = s0 + (10.0 * k - s0) * i as f64 / 2001.0;
            pre.value(s).unwrap_or(f64::NAN) - pre.params.gain(s)
        })
        .fold(f64::INFINITY, f64::min);
    out.push(Check::new(
        "pre-regime value dominates gain",
        worst >= -1e-9 * k,
        format!("smallest gap {worst}"),
    ));
    out
}

/// Structural checks, then attainment at the excited and pre-hit probes,
/// then every applicable suboptimal rule.
pub fn verify(
    params: &ModelParams<f64>,
    excited: &ExcitedSolution<f64>,
    pre: &PreRegimeSolution<f64>,
    config: &SimConfig,
) -> Result<VerifyReport> {
    let mut checks = structural_checks(excited, pre);
    let mut probes = excited_probes(excited);
    probes.extend(pre_regime_probes(pre)?);
    checks.extend(attainment_checks(params, excited, pre, &probes, config)?);
    checks.extend(dominance_checks(params, excited, pre, config)?);
    Ok(VerifyReport {
        case: pre.case,
        seed: config.seed,
        checks,
    })
}
