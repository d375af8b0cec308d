//! Trading reading of a solved model: what to do now, and which strikes
//! give the disconnected (case IV) picture at a given spot.

use serde::Serialize;

use crate::analytic::ModelParams;
use crate::error::{Error, Result};
use crate::excited::{solve_excited, ExcitedSolution};
use crate::pre_regime::{
    b0_of_mu0, classify, mu0_crossing, s0_max, solve_b_star, solve_pre_regime, Case,
};

/// Default drift bump added to the crossing drift when screening strikes.
pub const DEFAULT_RHO0: f64 = 0.163;

/// Below this ratio `(b* - s0) / (s - s0)` the band is called small compared
/// with the distance to `s0`. A heuristic threshold.
pub const SCALE_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    WaitForS0ThenExcited,
    WaitForS0ThenExerciseAtS0,
    ExerciseNow,
    WaitForB0,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub case: Case,
    pub b0: f64,
    pub b1: f64,
    pub b_star: Option<f64>,
    /// Present when `b0 > b1`.
    pub s0_max: Option<f64>,
    pub spot: Option<f64>,
    pub action: Option<Action>,
}

/// Action for a spot `s > s0` in the given case.
///
/// In case IV below `b*` the holder keeps waiting; the pre-hit boundary is
/// not reachable from there without first passing `s0`.
pub fn action_for(case: Case, spot: f64, b_star: Option<f64>, b0: f64) -> Action {
    match case {
        Case::IIIc => Action::WaitForS0ThenExerciseAtS0,
        Case::IIIa | Case::IIIb => Action::WaitForS0ThenExcited,
        Case::IV => {
            let b_star = b_star.unwrap_or(f64::NEG_INFINITY);
            if spot > b0 {
                Action::WaitForB0
            } else if spot >= b_star {
                Action::ExerciseNow
            } else {
                Action::WaitForS0ThenExcited
            }
        }
    }
}

pub fn report(params: &ModelParams<f64>, spot: Option<f64>) -> Result<StrategyReport> {
    let excited = solve_excited(params)?;
    report_with(params, &excited, spot)
}

pub fn report_with(
    params: &ModelParams<f64>,
    excited: &ExcitedSolution<f64>,
    spot: Option<f64>,
) -> Result<StrategyReport> {
    if let Some(s) = spot {
        if !(s > params.s0) {
            return Err(Error::Domain {
                what: "spot",
                value: s,
                lo: params.s0,
                hi: f64::INFINITY,
            });
        }
    }
    let sol = solve_pre_regime(params, excited)?;
    let s0_max = if sol.b0 > sol.b1 {
        Some(s0_max(params.mu0, params, excited)?)
    } else {
        None
    };
    Ok(StrategyReport {
        case: sol.case,
        b0: sol.b0,
        b1: sol.b1,
        b_star: sol.b_star(),
        s0_max,
        spot,
        action: spot.map(|s| action_for(sol.case, s, sol.b_star(), sol.b0)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrikeCandidate {
    pub strike: f64,
    pub b1: f64,
    /// Drift at which `b0 = b1`.
    pub mu_cross: f64,
    /// `mu_cross + rho0`.
    pub mu_shifted: f64,
    pub s0_max: Option<f64>,
    pub b0_shifted: f64,
    pub b_star: Option<f64>,
    pub feasible: bool,
    /// Violated conditions, empty when feasible.
    pub reasons: Vec<String>,
    /// `(b* - s0) / (s - s0) < SCALE_RATIO`; present when `b*` exists.
    pub small_band: Option<bool>,
}

/// Screens each strike for `b1 < s0 < s0_max(mu_cross + rho0)` and
/// `b*(mu_cross + rho0, s0) < spot < b0(mu_cross + rho0)`, holding the other
/// fields of `base` fixed.
pub fn select_strikes(
    base: &ModelParams<f64>,
    strikes: &[f64],
    spot: f64,
    rho0: f64,
) -> Result<Vec<StrikeCandidate>> {
    if strikes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "strikes",
            value: 0.0,
            reason: "need at least one candidate strike",
        });
    }
    if !(rho0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho0",
            value: rho0,
            reason: "must be > 0",
        });
    }
    strikes
        .iter()
        .map(|&k| screen_strike(&base.with_strike(k), spot, rho0))
        .collect()
}

fn screen_strike(params: &ModelParams<f64>, spot: f64, rho0: f64) -> Result<StrikeCandidate> {
    let excited = solve_excited(params)?;
    let s0 = params.s0;
    let b1 = excited.b1;
    let mu_cross = mu0_crossing(params, &excited)?;
    let mu_shifted = mu_cross + rho0;
    let shifted = params.with_mu0(mu_shifted);
    let b0_shifted = b0_of_mu0(mu_shifted, params)?;
    let s0_max = s0_max(mu_shifted, params, &excited).ok();
    let b_star = match classify(&shifted, &excited)? {
        Case::IV => Some(solve_b_star(&shifted, &excited, shifted.gamma()?)?.b_star),
        _ => None,
    };

    let mut reasons = Vec::new();
    if s0 <= b1 {
        reasons.push("s0 <= b1".to_string());
    }
    match s0_max {
        Some(m) if s0 >= m => reasons.push("s0 >= s0_max".to_string()),
        None => reasons.push("no s0_max".to_string()),
        _ => {}
    }
    match b_star {
        Some(b) if spot <= b => reasons.push("s <= b*".to_string()),
        None => reasons.push("not case IV".to_string()),
        _ => {}
    }
    if spot >= b0_shifted {
        reasons.push("s >= b0".to_string());
    }
    let small_band = b_star.map(|b| (b - s0) / (spot - s0) < SCALE_RATIO);
    Ok(StrikeCandidate {
        strike: params.strike_k,
        b1,
        mu_cross,
        mu_shifted,
        s0_max,
        b0_shifted,
        b_star,
        feasible: reasons.is_empty(),
        reasons,
        small_band,
    })
}
