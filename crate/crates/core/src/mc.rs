//! Monte Carlo evaluation of stopping rules for the regime-switching price.
//!
//! Paths move in log space with exact Gaussian increments inside each regime,
//! so the only discretisation error is in detecting barrier crossings. With
//! `bridge_correction` on, every step is also tested against the
//! Brownian-bridge crossing probability, which is exact for a single barrier;
//! step sizes then grow with the distance to the nearest barrier. Without it
//! the step is fixed at `dt` and crossings are only seen at grid points.
//!
//! Each path draws from its own ChaCha8 stream (`seed`, stream = path index),
//! so estimates do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::ModelParams;
use crate::error::{Error, Result};
use crate::pre_regime::{Case, PreRegimeSolution};

/// Largest discarded tail `exp(-alpha t_max)`, relative to `K`.
pub const TRUNCATION_TOL: f64 = 1e-4;

/// Upper bound on an adaptive step, in years.
const MAX_STEP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Base time step in years.
    pub dt: f64,
    /// Truncation horizon in years.
    pub t_max: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl SimConfig {
    /// Defaults: 200k paths, `dt = 1/5000`, `t_max = 40 / alpha`, bridge correction on.
    pub fn for_params(params: &ModelParams<f64>) -> Self {
        Self {
            n_paths: 200_000,
            dt: 1.0 / 5000.0,
            t_max: 40.0 / params.alpha,
            seed: 0x5eed,
            bridge_correction: true,
        }
    }

    pub fn validate(&self, params: &ModelParams<f64>) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        for (name, v) in [("dt", self.dt), ("t_max", self.t_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and > 0",
                });
            }
        }
        if (-params.alpha * self.t_max).exp() >= TRUNCATION_TOL {
            return Err(Error::InvalidParameter {
                name: "t_max",
                value: self.t_max,
                reason: "exp(-alpha t_max) must be below the truncation tolerance 1e-4",
            });
        }
        Ok(())
    }
}

/// Regime of the simulated state `(y, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `(0, 1)`: `s0` not yet reached.
    Pre,
    /// `(1, 1)`: volatility `sigma1`, exponential clock running.
    Excited,
    /// `(1, 0)`: price frozen.
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub s: f64,
    pub regime: Regime,
}

impl StartState {
    pub fn pre(s: f64) -> Self {
        Self {
            s,
            regime: Regime::Pre,
        }
    }

    pub fn excited(s: f64) -> Self {
        Self {
            s,
            regime: Regime::Excited,
        }
    }

    pub fn absorbed(s: f64) -> Self {
        Self {
            s,
            regime: Regime::Absorbed,
        }
    }

    /// From the `(s, y, i)` coordinates.
    pub fn from_coords(s: f64, y: u8, i: u8) -> Result<Self> {
        let regime = match (y, i) {
            (0, 1) => Regime::Pre,
            (1, 1) => Regime::Excited,
            (1, 0) => Regime::Absorbed,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "start",
                    value: f64::from(y) * 10.0 + f64::from(i),
                    reason: "(y, i) must be one of (0, 1), (1, 1), (1, 0)",
                })
            }
        };
        Ok(Self { s, regime })
    }

    fn validate(&self, params: &ModelParams<f64>) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::Domain {
                what: "start price",
                value: self.s,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if self.regime == Regime::Pre && self.s <= params.s0 {
            return Err(Error::Domain {
                what: "start price before the switch",
                value: self.s,
                lo: params.s0,
                hi: f64::INFINITY,
            });
        }
        Ok(())
    }
}

/// A stopping rule. Every rule also stops at absorption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StoppingRule {
    Immediate,
    /// First time `S <= level`, in either live regime.
    HitLevel(f64),
    /// `HitLevel(b1)`: the optimal rule from the excited state.
    ExcitedOptimal {
        b1: f64,
    },
    /// First time `S <= level` before the switch. At `level = s0` this stops
    /// exactly at the switch.
    HitLevelPreRegime(f64),
    /// First time `S >= level` before the switch.
    HitUpperPreRegime(f64),
    /// First entry into `[lo, hi]` before the switch.
    HitBandPreRegime {
        lo: f64,
        hi: f64,
    },
    /// Stop only at absorption.
    AtAbsorption,
    /// The optimal rule for a solved pre-hit case.
    PreRegimeOptimal {
        case: Case,
        b1: f64,
        b_star: Option<f64>,
        b0: f64,
    },
    /// Earliest of the listed rules.
    Composite(Vec<StoppingRule>),
}

impl StoppingRule {
    pub fn pre_regime_optimal(sol: &PreRegimeSolution<f64>) -> Self {
        StoppingRule::PreRegimeOptimal {
            case: sol.case,
            b1: sol.b1,
            b_star: sol.b_star(),
            b0: sol.b0,
        }
    }

    /// Rewrites `PreRegimeOptimal` in terms of the primitive rules.
    pub fn expand(&self, s0: f64) -> StoppingRule {
        match self {
            StoppingRule::PreRegimeOptimal {
                case,
                b1,
                b_star,
                b0,
            } => match case {
                Case::IIIa | Case::IIIb => StoppingRule::ExcitedOptimal { b1: *b1 },
                Case::IIIc => StoppingRule::HitLevelPreRegime(s0),
                Case::IV => StoppingRule::Composite(vec![
                    StoppingRule::HitBandPreRegime {
                        lo: b_star.unwrap_or(s0),
                        hi: *b0,
                    },
                    StoppingRule::ExcitedOptimal { b1: *b1 },
                ]),
            },
            StoppingRule::Composite(rules) => {
                StoppingRule::Composite(rules.iter().map(|r| r.expand(s0)).collect())
            }
            other => other.clone(),
        }
    }
}

/// Which stops count towards a [`Payoff::Discount`] payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventFilter {
    Any,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payoff {
    /// `exp(-alpha tau) (K - S_tau)^+`.
    Put,
    /// `exp(-alpha tau)` when the stop matches the filter, else zero.
    Discount(EventFilter),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopEvent {
    Immediate,
    Lower,
    Upper,
    Absorption,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub payoff: f64,
    pub stop_time: f64,
    pub truncated: bool,
    pub event: StopEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single path.
    pub std_error: f64,
    pub n_paths: usize,
    pub n_truncated: usize,
    pub seed: u64,
}

/// Stop levels after flattening a rule for a given start.
#[derive(Debug, Clone, Copy)]
struct Plan {
    immediate: bool,
    pre_lower: f64,
    pre_upper: f64,
    excited_lower: f64,
}

impl Plan {
    fn new(rule: &StoppingRule, start: &StartState, s0: f64) -> Self {
        let mut plan = Plan {
            immediate: false,
            pre_lower: f64::NEG_INFINITY,
            pre_upper: f64::INFINITY,
            excited_lower: f64::NEG_INFINITY,
        };
        plan.add(&rule.expand(s0), start.s);
        plan
    }

    fn add(&mut self, rule: &StoppingRule, s: f64) {
        match *rule {
            StoppingRule::Immediate => self.immediate = true,
            StoppingRule::HitLevel(level) | StoppingRule::ExcitedOptimal { b1: level } => {
                self.pre_lower = self.pre_lower.max(level);
                self.excited_lower = self.excited_lower.max(level);
            }
            StoppingRule::HitLevelPreRegime(level) => self.pre_lower = self.pre_lower.max(level),
            StoppingRule::HitUpperPreRegime(level) => self.pre_upper = self.pre_upper.min(level),
            StoppingRule::HitBandPreRegime { lo, hi } => {
                // a continuous path enters the band through the nearer end
                if s > hi {
                    self.pre_lower = self.pre_lower.max(hi);
                } else if s < lo {
                    self.pre_upper = self.pre_upper.min(lo);
                } else {
                    self.immediate = true;
                }
            }
            StoppingRule::AtAbsorption => {}
            StoppingRule::Composite(ref rules) => {
                for r in rules {
                    self.add(r, s);
                }
            }
            StoppingRule::PreRegimeOptimal { .. } => unreachable!("expanded before planning"),
        }
    }
}

struct Path<'a> {
    params: &'a ModelParams<f64>,
    config: &'a SimConfig,
    plan: Plan,
    rng: ChaCha8Rng,
}

enum Crossing {
    None,
    Lower,
    Upper,
}

impl Path<'_> {
    fn stop(&self, t: f64, s: f64, event: StopEvent) -> PathOutcome {
        PathOutcome {
            payoff: (-self.params.alpha * t).exp() * self.params.gain(s),
            stop_time: t,
            truncated: event == StopEvent::Truncated,
            event,
        }
    }

    fn step_size(&self, d_lo: f64, d_hi: f64, sigma: f64, left: f64) -> f64 {
        let dt = self.config.dt;
        if !self.config.bridge_correction {
            return dt.min(left);
        }
        let d = d_lo.min(d_hi);
        let mut h = dt.max((d / (4.0 * sigma)).powi(2)).min(MAX_STEP);
        if d_lo.is_finite() && d_hi.is_finite() {
            // keep the two single-barrier bridge tests nearly independent
            h = h.min(((d_lo + d_hi) / (6.0 * sigma)).powi(2));
        }
        h.min(left)
    }

    fn bridge_hit(&mut self, d0: f64, d1: f64, var: f64) -> bool {
        self.config.bridge_correction && self.rng.random::<f64>() < (-2.0 * d0 * d1 / var).exp()
    }

    /// One exact GBM step between barriers `lo < x < hi` (log prices).
    fn advance(
        &mut self,
        x: f64,
        lo: f64,
        hi: f64,
        mu: f64,
        sigma: f64,
        h: f64,
    ) -> (f64, Crossing) {
        let z: f64 = self.rng.sample(StandardNormal);
        let x1 = x + (mu - 0.5 * sigma * sigma) * h + sigma * h.sqrt() * z;
        if x1 <= lo {
            return (x1, Crossing::Lower);
        }
        if x1 >= hi {
            return (x1, Crossing::Upper);
        }
        let var = sigma * sigma * h;
        if lo.is_finite() && self.bridge_hit(x - lo, x1 - lo, var) {
            return (x1, Crossing::Lower);
        }
        if hi.is_finite() && self.bridge_hit(hi - x, hi - x1, var) {
            return (x1, Crossing::Upper);
        }
        (x1, Crossing::None)
    }

    fn run(&mut self, start: &StartState) -> PathOutcome {
        let p = *self.params;
        let plan = self.plan;
        let s = start.s;
        match start.regime {
            Regime::Absorbed => return self.stop(0.0, s, StopEvent::Immediate),
            Regime::Pre if plan.immediate || s <= plan.pre_lower || s >= plan.pre_upper => {
                return self.stop(0.0, s, StopEvent::Immediate)
            }
            Regime::Excited if plan.immediate || s <= plan.excited_lower => {
                return self.stop(0.0, s, StopEvent::Immediate)
            }
            Regime::Pre => {}
            Regime::Excited => return self.run_excited(0.0, s.ln()),
        }

        // before the switch: lower barrier is the switch level or a stop above it
        let (lower_level, lower_stops) = if plan.pre_lower >= p.s0 {
            (plan.pre_lower, true)
        } else {
            (p.s0, false)
        };
        let (lo, hi) = (log_level(lower_level), plan.pre_upper.ln());
        let mut x = s.ln();
        let mut t = 0.0;
        loop {
            let left = self.config.t_max - t;
            if left <= 0.0 {
                return self.stop(self.config.t_max, x.exp(), StopEvent::Truncated);
            }
            let h = self.step_size(x - lo, hi - x, p.sigma0, left);
            let (x1, crossing) = self.advance(x, lo, hi, p.mu0, p.sigma0, h);
            let t1 = if h >= left { self.config.t_max } else { t + h };
            match crossing {
                Crossing::None => {
                    x = x1;
                    t = t1;
                }
                Crossing::Upper => {
                    return self.stop(0.5 * (t + t1), plan.pre_upper, StopEvent::Upper)
                }
                Crossing::Lower if lower_stops => {
                    return self.stop(0.5 * (t + t1), lower_level, StopEvent::Lower)
                }
                Crossing::Lower => {
                    let tau = 0.5 * (t + t1);
                    if p.s0 <= plan.excited_lower {
                        return self.stop(tau, p.s0, StopEvent::Lower);
                    }
                    return self.run_excited(tau, p.s0.ln());
                }
            }
        }
    }

    fn run_excited(&mut self, t_switch: f64, x_switch: f64) -> PathOutcome {
        let p = *self.params;
        let clock: f64 = Exp::new(p.lambda)
            .expect("lambda validated positive")
            .sample(&mut self.rng);
        let t_abs = t_switch + clock;
        let end = t_abs.min(self.config.t_max);
        let stop_level = self.plan.excited_lower;
        let lo = log_level(stop_level);
        let (mut x, mut t) = (x_switch, t_switch);
        loop {
            let left = end - t;
            if left <= 0.0 {
                let event = if t_abs <= self.config.t_max {
                    StopEvent::Absorption
                } else {
                    StopEvent::Truncated
                };
                return self.stop(end, x.exp(), event);
            }
            let h = self.step_size(x - lo, f64::INFINITY, p.sigma1, left);
            let (x1, crossing) = self.advance(x, lo, f64::INFINITY, p.mu1, p.sigma1, h);
            let t1 = if h >= left { end } else { t + h };
            match crossing {
                Crossing::None => {
                    x = x1;
                    t = t1;
                }
                _ => return self.stop(0.5 * (t + t1), stop_level, StopEvent::Lower),
            }
        }
    }
}

fn log_level(level: f64) -> f64 {
    if level > 0.0 {
        level.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates path number `index` of the stream selected by `config.seed`.
pub fn simulate_path(
    params: &ModelParams<f64>,
    start: &StartState,
    config: &SimConfig,
    rule: &StoppingRule,
    index: u64,
) -> Result<PathOutcome> {
    params.validate()?;
    config.validate(params)?;
    start.validate(params)?;
    Ok(run_path(
        params,
        start,
        config,
        Plan::new(rule, start, params.s0),
        index,
    ))
}

fn run_path(
    params: &ModelParams<f64>,
    start: &StartState,
    config: &SimConfig,
    plan: Plan,
    index: u64,
) -> PathOutcome {
    let mut path = Path {
        params,
        config,
        plan,
        rng: path_rng(config.seed, index),
    };
    path.run(start)
}

/// Estimates `E[exp(-alpha tau)(K - S_tau)^+]` for `rule`.
pub fn estimate(
    params: &ModelParams<f64>,
    start: &StartState,
    config: &SimConfig,
    rule: &StoppingRule,
) -> Result<MCEstimate> {
    estimate_with(params, start, config, rule, Payoff::Put)
}

/// [`estimate`] with a choice of payoff.
pub fn estimate_with(
    params: &ModelParams<f64>,
    start: &StartState,
    config: &SimConfig,
    rule: &StoppingRule,
    payoff: Payoff,
) -> Result<MCEstimate> {
    params.validate()?;
    config.validate(params)?;
    start.validate(params)?;
    let plan = Plan::new(rule, start, params.s0);
    let outcomes: Vec<(f64, bool)> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let o = run_path(params, start, config, plan, i);
            let value = match payoff {
                Payoff::Put => o.payoff,
                Payoff::Discount(filter) => {
                    let counted = match (filter, o.event) {
                        (_, StopEvent::Truncated) => false,
                        (EventFilter::Any, _) => true,
                        (EventFilter::Lower, e) => e == StopEvent::Lower,
                        (EventFilter::Upper, e) => e == StopEvent::Upper,
                    };
                    if counted {
                        (-params.alpha * o.stop_time).exp()
                    } else {
                        0.0
                    }
                }
            };
            (value, o.truncated)
        })
        .collect();
    let values: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let n_truncated = outcomes.iter().filter(|o| o.1).count();
    let (mean, std_error) = mean_and_se(&values);
    Ok(MCEstimate {
        mean,
        std_error,
        n_paths: values.len(),
        n_truncated,
        seed: config.seed,
    })
}

/// Pairwise summation, so the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams::worked_example(0.30, 15000.0)
    }

    fn config(n: usize) -> SimConfig {
        SimConfig {
            n_paths: n,
            ..SimConfig::for_params(&params())
        }
    }

    #[test]
    fn absorbed_start_stops_at_once() {
        let p = params();
        let s = 0.5 * p.strike_k;
        let o = simulate_path(
            &p,
            &StartState::absorbed(s),
            &config(1),
            &StoppingRule::Immediate,
            0,
        )
        .unwrap();
        assert_eq!(o.payoff, 0.5 * p.strike_k);
        assert_eq!(o.stop_time, 0.0);
        assert!(!o.truncated);
    }

    #[test]
    fn single_path_estimate() {
        let p = params();
        let cfg = config(1);
        let rule = StoppingRule::ExcitedOptimal { b1: 14658.0 };
        let start = StartState::excited(15500.0);
        let est = estimate(&p, &start, &cfg, &rule).unwrap();
        let path = simulate_path(&p, &start, &cfg, &rule, 0).unwrap();
        assert_eq!(est.mean, path.payoff);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.n_paths, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params();
        let rule = StoppingRule::Immediate;
        assert!(estimate(&p, &StartState::pre(p.s0), &config(10), &rule).is_err());
        assert!(StartState::from_coords(1.0, 0, 0).is_err());
        let short = SimConfig {
            t_max: 10.0,
            ..config(10)
        };
        assert!(estimate(&p, &StartState::excited(15000.0), &short, &rule).is_err());
        let empty = config(0);
        assert!(estimate(&p, &StartState::excited(15000.0), &empty, &rule).is_err());
    }

    #[test]
    fn composite_takes_the_earliest_stop() {
        let rule = StoppingRule::Composite(vec![
            StoppingRule::HitLevel(14000.0),
            StoppingRule::HitLevelPreRegime(15100.0),
            StoppingRule::HitBandPreRegime {
                lo: 15200.0,
                hi: 15800.0,
            },
        ]);
        let plan = Plan::new(&rule, &StartState::pre(16000.0), 15000.0);
        assert_eq!(plan.pre_lower, 15800.0);
        assert_eq!(plan.excited_lower, 14000.0);
        let plan = Plan::new(&rule, &StartState::pre(15150.0), 15000.0);
        assert_eq!(plan.pre_lower, 15100.0);
        assert_eq!(plan.pre_upper, 15200.0);
        assert!(Plan::new(&rule, &StartState::pre(15500.0), 15000.0).immediate);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = params();
        let cfg = config(2000);
        let rule = StoppingRule::ExcitedOptimal { b1: 14658.0 };
        let start = StartState::pre(15200.0);
        let a = estimate(&p, &start, &cfg, &rule).unwrap();
        let b = estimate(&p, &start, &cfg, &rule).unwrap();
        assert_eq!(a, b);
        let c = estimate(&p, &start, &SimConfig { seed: 7, ..cfg }, &rule).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
