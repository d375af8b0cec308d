use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use ivput_core::mc::{estimate_with, EventFilter, Payoff};
use ivput_core::pre_regime::b0_of_mu0;
use ivput_core::strategy::{report_with, select_strikes, Action, DEFAULT_RHO0};
use ivput_core::verify::verify as run_checks;
use ivput_core::{
    classify as classify_case, s0_max, solve_b_star, solve_excited, solve_pre_regime, Case, Error,
    Excited, Params, PreRegime, SimConfig, StartState, StoppingRule,
};
use rayon::prelude::*;

use crate::config::Settings;
use crate::table::{Cell, Table};
use crate::{Grid, PayoffKind, RegimeKind, RuleKind, Shared};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Solver(Error),
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "output: {m}"),
            Failure::Solver(e) => write!(f, "solver: {e}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

fn params_from(s: &Settings) -> Result<Params, Failure> {
    let d = Params::worked_example(0.30, 15000.0);
    let p = Params {
        mu0: s.mu0.unwrap_or(d.mu0),
        sigma0: s.sigma0.unwrap_or(d.sigma0),
        mu1: s.mu1.unwrap_or(d.mu1),
        sigma1: s.sigma1.unwrap_or(d.sigma1),
        lambda: s.lambda.unwrap_or(d.lambda),
        alpha: s.alpha.unwrap_or(d.alpha),
        strike_k: s.strike_k.unwrap_or(d.strike_k),
        s0: s.s0.unwrap_or(d.s0),
    };
    p.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(p)
}

fn sim_config(s: &Settings, shared: &Shared, p: &Params) -> Result<SimConfig, Failure> {
    let d = SimConfig::for_params(p);
    let c = SimConfig {
        n_paths: s.paths.unwrap_or(d.n_paths),
        dt: s.dt.unwrap_or(d.dt),
        t_max: s.tmax.unwrap_or(d.t_max),
        seed: s.seed.unwrap_or(d.seed),
        bridge_correction: !shared.no_bridge,
    };
    c.validate(p).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn points(g: &Grid, name: &str) -> Result<Vec<f64>, Failure> {
    let bad = |why: &str| Failure::Usage(format!("{name} grid: {why}"));
    let xs = match &g.values {
        Some(v) => v.clone(),
        None => {
            if !(g.step > 0.0) || !g.min.is_finite() || !g.max.is_finite() || g.max < g.min {
                return Err(bad("need finite min <= max and step > 0"));
            }
            let n = ((g.max - g.min) / g.step * (1.0 + 1e-12)).floor() as usize;
            (0..=n).map(|i| g.min + g.step * i as f64).collect()
        }
    };
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(bad("values must be finite and nonempty"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(xs)
}

fn emit(table: &Table, name: &str, shared: &Shared) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    match &shared.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{name}.{}", shared.format.extension()));
            let mut buf = Vec::new();
            table.write(shared.format, &mut buf).map_err(io)?;
            write_file(&path, &buf)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(shared.format, &mut lock).map_err(io)?;
            lock.flush().map_err(io)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::WaitForS0ThenExcited => "WaitForS0ThenExcited",
        Action::WaitForS0ThenExerciseAtS0 => "WaitForS0ThenExerciseAtS0",
        Action::ExerciseNow => "ExerciseNow",
        Action::WaitForB0 => "WaitForB0",
    }
}

fn solved(p: &Params) -> Result<(Excited, PreRegime), Failure> {
    let e = solve_excited(p)?;
    let pre = solve_pre_regime(p, &e)?;
    Ok((e, pre))
}

pub fn classify(shared: &Shared) -> Result<(), Failure> {
    let s = shared.settings(Settings::default())?;
    let p = params_from(&s)?;
    let e = solve_excited(&p)?;
    let r = report_with(&p, &e, s.spot).map_err(|err| match err {
        Error::Domain { .. } => Failure::Usage(err.to_string()),
        other => Failure::Solver(other),
    })?;
    let mut t = Table::new(&[
        "mu0", "s0", "strike_K", "case", "b0", "b1", "b_star", "s0_max", "spot", "action",
    ]);
    t.push(vec![
        p.mu0.into(),
        p.s0.into(),
        p.strike_k.into(),
        r.case.to_string().into(),
        r.b0.into(),
        r.b1.into(),
        r.b_star.into(),
        r.s0_max.into(),
        r.spot.into(),
        r.action.map_or(Cell::Empty, |a| action_name(a).into()),
    ]);
    emit(&t, "classification", shared)
}

fn optional_s0_max(mu0: f64, p: &Params, e: &Excited) -> Result<Option<f64>, Failure> {
    match s0_max(mu0, p, e) {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoSwitchPoint { .. }) => Ok(None),
        Err(err) => Err(err.into()),
    }
}

pub fn curves(shared: &Shared, mu0_grid: &Grid, s0_grid: &Grid) -> Result<(), Failure> {
    let s = shared.settings(Settings::default())?;
    let p = params_from(&s)?;
    let mus = points(mu0_grid, "mu0")?;
    let s0s = points(s0_grid, "s0")?;
    let e = solve_excited(&p)?;

    let rows: Vec<Vec<Cell>> = mus
        .par_iter()
        .map(|&mu0| {
            let b0 = b0_of_mu0(mu0, &p)?;
            Ok(vec![
                mu0.into(),
                b0.into(),
                e.b1.into(),
                optional_s0_max(mu0, &p, &e)?.into(),
            ])
        })
        .collect::<Result<_, Failure>>()?;
    let mut t = Table::new(&["mu0", "b0", "b1", "s0_max"]);
    rows.into_iter().for_each(|r| t.push(r));

    let rows: Vec<Vec<Cell>> = s0s
        .par_iter()
        .map(|&s0| {
            let q = p.with_s0(s0);
            let gap = match classify_case(&q, &e)? {
                Case::IV => Some(solve_b_star(&q, &e, q.gamma()?)?.b_star - s0),
                _ => None,
            };
            Ok(vec![s0.into(), gap.into()])
        })
        .collect::<Result<_, Failure>>()?;
    let mut b = Table::new(&["s0", "b_star_minus_s0"]);
    rows.into_iter().for_each(|r| b.push(r));

    let with_dir = Shared {
        out: Some(shared.out.clone().unwrap_or_else(|| ".".into())),
        ..shared.clone()
    };
    emit(&t, "curves_mu0", &with_dir)?;
    emit(&b, "b_star_curve", &with_dir)
}

pub fn value_profile(shared: &Shared, s_grid: &Grid) -> Result<(), Failure> {
    let s = shared.settings(Settings::default())?;
    let p = params_from(&s)?;
    let xs = points(s_grid, "s")?;
    let (e, pre) = solved(&p)?;
    let rows: Vec<Vec<Cell>> = xs
        .par_iter()
        .map(|&x| {
            let v_pre = if x > p.s0 { Some(pre.value(x)?) } else { None };
            Ok(vec![
                x.into(),
                p.gain(x).into(),
                e.value(x).into(),
                v_pre.into(),
            ])
        })
        .collect::<Result<_, Failure>>()?;
    let mut t = Table::new(&["s", "gain", "v_excited", "v_pre_regime"]);
    rows.into_iter().for_each(|r| t.push(r));
    let with_dir = Shared {
        out: Some(shared.out.clone().unwrap_or_else(|| ".".into())),
        ..shared.clone()
    };
    emit(&t, "value_profile", &with_dir)
}

pub fn select_strike(shared: &Shared, strikes: &[f64], rho0: Option<f64>) -> Result<(), Failure> {
    let s = shared.settings(Settings {
        rho0,
        ..Default::default()
    })?;
    let p = params_from(&s)?;
    let spot = s.spot.ok_or_else(|| {
        Failure::Usage("select-strike needs a spot price (--spot or `spot` in the config)".into())
    })?;
    let rho0 = s.rho0.unwrap_or(DEFAULT_RHO0);
    let found = select_strikes(&p, strikes, spot, rho0).map_err(|err| match err {
        Error::InvalidParameter { .. } => Failure::Usage(err.to_string()),
        other => Failure::Solver(other),
    })?;
    let mut t = Table::new(&[
        "strike_K",
        "rho0",
        "spot",
        "b1",
        "mu0_cross",
        "mu0_shifted",
        "b0_shifted",
        "s0_max",
        "b_star",
        "feasible",
        "small_band",
        "reasons",
    ]);
    for c in found {
        t.push(vec![
            c.strike.into(),
            rho0.into(),
            spot.into(),
            c.b1.into(),
            c.mu_cross.into(),
            c.mu_shifted.into(),
            c.b0_shifted.into(),
            c.s0_max.into(),
            c.b_star.into(),
            c.feasible.into(),
            c.small_band.map_or(Cell::Empty, Cell::Bool),
            c.reasons.join("; ").into(),
        ]);
    }
    emit(&t, "strike_selection", shared)
}

pub fn verify(shared: &Shared, scale_b1: Option<f64>) -> Result<(), Failure> {
    let s = shared.settings(Settings::default())?;
    let p = params_from(&s)?;
    let cfg = sim_config(&s, shared, &p)?;
    let mut e = solve_excited(&p)?;
    if let Some(f) = scale_b1 {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Failure::Usage(format!(
                "--scale-b1 must be finite and > 0, got {f}"
            )));
        }
        e = e.with_b1(f * e.b1);
    }
    let pre = solve_pre_regime(&p, &e)?;
    let report = run_checks(&p, &e, &pre, &cfg)?;
    let mut t = Table::new(&["check", "passed", "detail"]);
    for c in &report.checks {
        t.push(vec![
            c.name.clone().into(),
            c.passed.into(),
            c.detail.clone().into(),
        ]);
    }
    emit(&t, "verification", shared)?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    eprintln!(
        "case {}, seed {}: {} of {} checks passed",
        report.case,
        report.seed,
        report.checks.len() - failed,
        report.checks.len()
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{failed} check(s) failed; rerun with --seed {} to reproduce",
            report.seed
        )))
    }
}

pub struct RuleSpec {
    pub kind: RuleKind,
    pub level: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

fn need(v: Option<f64>, flag: &str, rule: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("rule {rule} needs --{flag}")))
}

fn build_rule(spec: &RuleSpec, p: &Params) -> Result<StoppingRule, Failure> {
    Ok(match spec.kind {
        RuleKind::Immediate => StoppingRule::Immediate,
        RuleKind::AtAbsorption => StoppingRule::AtAbsorption,
        RuleKind::HitLevel => StoppingRule::HitLevel(need(spec.level, "level", "hit-level")?),
        RuleKind::HitLevelPre => {
            StoppingRule::HitLevelPreRegime(need(spec.level, "level", "hit-level-pre")?)
        }
        RuleKind::HitUpperPre => {
            StoppingRule::HitUpperPreRegime(need(spec.level, "level", "hit-upper-pre")?)
        }
        RuleKind::HitBandPre => StoppingRule::HitBandPreRegime {
            lo: need(spec.lo, "lo", "hit-band-pre")?,
            hi: need(spec.hi, "hi", "hit-band-pre")?,
        },
        RuleKind::ExcitedOptimal => StoppingRule::ExcitedOptimal {
            b1: solve_excited(p)?.b1,
        },
        RuleKind::PreRegimeOptimal => StoppingRule::pre_regime_optimal(&solved(p)?.1),
    })
}

pub fn simulate(
    shared: &Shared,
    spec: RuleSpec,
    regime: RegimeKind,
    payoff: PayoffKind,
) -> Result<(), Failure> {
    let s = shared.settings(Settings::default())?;
    let p = params_from(&s)?;
    let cfg = sim_config(&s, shared, &p)?;
    let x = s.spot.ok_or_else(|| {
        Failure::Usage("simulate needs a start price (--spot or `spot` in the config)".into())
    })?;
    let start = match regime {
        RegimeKind::Pre => StartState::pre(x),
        RegimeKind::Excited => StartState::excited(x),
        RegimeKind::Absorbed => StartState::absorbed(x),
    };
    let rule = build_rule(&spec, &p)?;
    let payoff = match payoff {
        PayoffKind::Put => Payoff::Put,
        PayoffKind::Discount => Payoff::Discount(EventFilter::Any),
    };
    let est = estimate_with(&p, &start, &cfg, &rule, payoff).map_err(|err| match err {
        Error::Domain { .. } | Error::InvalidParameter { .. } => Failure::Usage(err.to_string()),
        other => Failure::Solver(other),
    })?;
    let mut t = Table::new(&[
        "s",
        "regime",
        "mean",
        "std_error",
        "n_paths",
        "n_truncated",
        "seed",
    ]);
    t.push(vec![
        x.into(),
        format!("{regime:?}").to_lowercase().into(),
        est.mean.into(),
        est.std_error.into(),
        Cell::Int(est.n_paths as u64),
        Cell::Int(est.n_truncated as u64),
        Cell::Int(est.seed),
    ]);
    emit(&t, "simulation", shared)
}
