//! The pre-hit state `(y, i) = (0, 1)`, defined for `s > s0`.
//!
//! Case map, with `b0` the classical put boundary under `(mu0, sigma0)` and
//! `V = V(s0, 1, 1)`:
//!
//! | case | condition | `V(s, 0, 1)` |
//! |------|-----------|--------------|
//! | IIIa | `b0 > s0`, `V >= (K - b0)(s0/b0)^g-` | `V (s/s0)^g-` |
//! | IIIb | `b0 <= s0`, `V > (K - s0)^+` | `V (s/s0)^g-` |
//! | IIIc | `b0 <= s0 < K`, `V = K - s0` | `V (s/s0)^g-` |
//! | IV   | `b0 > s0`, `V < (K - b0)(s0/b0)^g-` | three branches split at `b*` and `b0` |
//!
//! Powers of `s` are taken relative to `s0` throughout: `e1_s0 = e1* s0^g+`
//! and `e2_s0 = e2* s0^g-`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic::{exit_transforms, gamma_roots, mckean_boundary, CharRoots, ModelParams};
use crate::error::{Error, Result};
use crate::excited::ExcitedSolution;
use crate::scalar::{lit, rel_tol, to_f64, Scalar};
use crate::solver::{bisect, brent};

/// Band, relative to `K`, inside which `V(s0, 1, 1) = K - s0` counts as equality.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Default number of interior points on which case-IV dominance is sampled.
pub const DOMINANCE_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    IIIa,
    IIIb,
    IIIc,
    IV,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::IIIa => "IIIa",
            Case::IIIb => "IIIb",
            Case::IIIc => "IIIc",
            Case::IV => "IV",
        })
    }
}

/// Case-IV data: the left continuation branch on `(s0, b*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandData<T> {
    pub b_star: T,
    pub e1_s0: T,
    pub e2_s0: T,
    /// Tangency roots `(s1, s2)`; absent when `b* = s0`.
    pub tangency: Option<(T, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreRegimeSolution<T> {
    pub case: Case,
    pub b0: T,
    pub b1: T,
    /// `V(s0, 1, 1)`.
    pub v_s0: T,
    pub gamma: CharRoots<T>,
    pub params: ModelParams<T>,
    /// Present exactly in case IV.
    pub band: Option<BandData<T>>,
}

fn same_excited_model<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
) -> Result<()> {
    let e = &excited.params;
    let same = e.mu1 == params.mu1
        && e.sigma1 == params.sigma1
        && e.lambda == params.lambda
        && e.alpha == params.alpha
        && e.strike_k == params.strike_k;
    if same {
        Ok(())
    } else {
        Err(Error::InternalConsistency(
            "excited solution was solved for different (mu1, sigma1, lambda, alpha, K)".into(),
        ))
    }
}

/// `b0(mu0)` for the remaining parameters in `params`.
pub fn b0_of_mu0<T: Scalar>(mu0: T, params: &ModelParams<T>) -> Result<T> {
    let g = gamma_roots(mu0, params.sigma0, params.alpha)?;
    Ok(mckean_boundary(g, params.strike_k))
}

/// The classical-put value at `s0`, `(K - b0)(s0/b0)^g-`, which separates IIIa from IV.
fn mckean_threshold<T: Scalar>(params: &ModelParams<T>, gamma: CharRoots<T>, b0: T) -> T {
    (params.strike_k - b0) * (params.s0 / b0).powf(gamma.neg)
}

fn primal_case<T: Scalar>(params: &ModelParams<T>, gamma: CharRoots<T>, b0: T, v: T) -> Case {
    let (k, s0) = (params.strike_k, params.s0);
    if b0 > s0 {
        if v >= mckean_threshold(params, gamma, b0) {
            Case::IIIa
        } else {
            Case::IV
        }
    } else if s0 < k && (v - (k - s0)).abs() <= rel_tol::<T>(EQUALITY_TOL) * k {
        Case::IIIc
    } else {
        Case::IIIb
    }
}

/// Classification by the boundary positions alone, valid when `b0 <= s0`:
/// IIIb iff `b1 < s0`. Returns `None` when `b0 > s0`.
pub fn classify_reformulated<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
) -> Result<Option<Case>> {
    same_excited_model(params, excited)?;
    let b0 = mckean_boundary(params.gamma()?, params.strike_k);
    if b0 > params.s0 {
        return Ok(None);
    }
    Ok(Some(if excited.b1 < params.s0 {
        Case::IIIb
    } else {
        Case::IIIc
    }))
}

/// Classifies the pre-hit state and cross-checks against [`classify_reformulated`].
///
/// The only tolerated disagreement is a primal IIIc against a reformulated IIIb,
/// which happens when `s0` lies just above `b1` and `V(s0, 1, 1) - (K - s0)` is
/// inside the equality band; the primal answer is returned.
pub fn classify<T: Scalar>(params: &ModelParams<T>, excited: &ExcitedSolution<T>) -> Result<Case> {
    params.validate()?;
    same_excited_model(params, excited)?;
    let gamma = params.gamma()?;
    let b0 = mckean_boundary(gamma, params.strike_k);
    let v = excited.value(params.s0);
    let primal = primal_case(params, gamma, b0, v);
    match classify_reformulated(params, excited)? {
        None => Ok(primal),
        Some(r) if r == primal => Ok(primal),
        Some(Case::IIIb) if primal == Case::IIIc => Ok(primal),
        Some(r) => Err(Error::InternalConsistency(format!(
            "classifiers disagree at mu0 = {}, s0 = {}: primal {primal}, reformulated {r}",
            to_f64(params.mu0),
            to_f64(params.s0)
        ))),
    }
}

/// Normalised coefficients `(e1 s0^g+, e2 s0^g-)` of the function through
/// `(s0, v)` and `(s_tilde, K - s_tilde)`.
pub fn cap_coefficients<T: Scalar>(
    v: T,
    s_tilde: T,
    params: &ModelParams<T>,
    gamma: CharRoots<T>,
) -> (T, T) {
    let s0 = params.s0;
    let d = s_tilde - s0;
    let l = (d / s0).ln_1p();
    let (dm, dp) = ((gamma.neg * l).exp_m1(), (gamma.pos * l).exp_m1());
    let excess = v - (params.strike_k - s0);
    let den = dm - dp;
    ((v * dm + excess + d) / den, -(v * dp + excess + d) / den)
}

/// `v phi1(s, s_tilde) + (K - s_tilde) phi2(s, s_tilde)`: the value of waiting
/// for the first exit from `(s0, s_tilde)`, collecting `v` at `s0` and the gain
/// at `s_tilde`.
pub fn gamma_cap<T: Scalar>(
    s: T,
    s_tilde: T,
    v_s0: T,
    params: &ModelParams<T>,
    gamma: CharRoots<T>,
) -> Result<T> {
    let (phi1, phi2) = exit_transforms(s, s_tilde, gamma, params.s0)?;
    Ok(v_s0 * phi1 + (params.strike_k - s_tilde) * phi2)
}

/// `d/ds gamma_cap(s, s_tilde)` at `s = s_tilde`, written `g(v, s)`.
pub fn g_slope<T: Scalar>(v: T, s: T, params: &ModelParams<T>, gamma: CharRoots<T>) -> Result<T> {
    let s0 = params.s0;
    if !(s > s0) {
        return Err(Error::Domain {
            what: "s",
            value: to_f64(s),
            lo: to_f64(s0),
            hi: f64::INFINITY,
        });
    }
    let (gm, gp) = (gamma.neg, gamma.pos);
    let l = ((s - s0) / s0).ln_1p();
    let em = (gm * l).exp_m1();
    let e = ((gm - gp) * l).exp_m1();
    let excess = v - (params.strike_k - s0);
    let num = (gp - gm) * (v * em + excess + (s - s0)) + (params.strike_k - s) * gm * e;
    Ok(num / (s * e))
}

fn tangency_gap<T: Scalar>(s: T, v: T, params: &ModelParams<T>, gamma: CharRoots<T>) -> T {
    let s0 = params.s0;
    let em = (gamma.neg * ((s - s0) / s0).ln_1p()).exp_m1();
    v * em + (v - (params.strike_k - s0)) + (s - s0)
}

fn tangency_roots_with<T: Scalar>(
    v: T,
    b0: T,
    params: &ModelParams<T>,
    gamma: CharRoots<T>,
) -> Result<(T, T)> {
    let (s0, k) = (params.s0, params.strike_k);
    let xtol = k * T::epsilon() * lit(4.0);
    let f = |s| tangency_gap(s, v, params, gamma);
    let s1 = brent("tangency root s1", f, s0, b0, xtol)?;
    let s2 = brent("tangency root s2", f, b0, k, xtol)?;
    Ok((s1, s2))
}

/// The two solutions `s1 < b0 < s2` in `(s0, K)` of `V(s0, 1, 1)(s/s0)^g- = K - s`.
/// Only defined in case IV.
pub fn tangency_roots<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
    gamma: CharRoots<T>,
) -> Result<(T, T)> {
    same_excited_model(params, excited)?;
    let b0 = mckean_boundary(gamma, params.strike_k);
    tangency_roots_with(excited.value(params.s0), b0, params, gamma)
}

/// Case-IV left branch: `b*` and its coefficients.
pub fn solve_b_star<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
    gamma: CharRoots<T>,
) -> Result<BandData<T>> {
    solve_b_star_on_grid(params, excited, gamma, DOMINANCE_GRID)
}

/// [`solve_b_star`] with a configurable dominance grid.
pub fn solve_b_star_on_grid<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
    gamma: CharRoots<T>,
    grid: usize,
) -> Result<BandData<T>> {
    same_excited_model(params, excited)?;
    let (s0, k) = (params.s0, params.strike_k);
    let b0 = mckean_boundary(gamma, k);
    let v = excited.value(s0);
    if (k - s0 - v).abs() <= rel_tol::<T>(EQUALITY_TOL) * k {
        // value and unit slope fitted at s0 itself
        let e1 = (-s0 - gamma.neg * v) / (gamma.pos - gamma.neg);
        return Ok(BandData {
            b_star: s0,
            e1_s0: e1,
            e2_s0: v - e1,
            tangency: None,
        });
    }
    let (s1, s2) = tangency_roots_with(v, b0, params, gamma)?;
    let nudge = rel_tol::<T>(1e-12);
    let b_star = brent(
        "case-IV boundary b*",
        |b| g_slope(v, b, params, gamma).map_or(T::nan(), |g| g + T::one()),
        s1 * (T::one() + nudge),
        b0 * (T::one() - nudge),
        k * T::epsilon() * lit(4.0),
    )?;
    let (e1_s0, e2_s0) = cap_coefficients(v, b_star, params, gamma);
    let band = BandData {
        b_star,
        e1_s0,
        e2_s0,
        tangency: Some((s1, s2)),
    };
    for i in 1..=grid {
        let s = s0 + (b_star - s0) * lit::<T>(i as f64) / lit::<T>(grid as f64 + 1.0);
        // strict in exact arithmetic; allow rounding noise near b*
        if !(left_branch(&band, s, params, gamma) > k - s - T::tol_floor() * k) {
            return Err(Error::solver(
                "case-IV boundary b*",
                format!(
                    "left branch fails to dominate the gain at s = {}",
                    to_f64(s)
                ),
            ));
        }
    }
    Ok(band)
}

fn left_branch<T: Scalar>(
    band: &BandData<T>,
    s: T,
    params: &ModelParams<T>,
    gamma: CharRoots<T>,
) -> T {
    let x = s / params.s0;
    band.e1_s0 * x.powf(gamma.pos) + band.e2_s0 * x.powf(gamma.neg)
}

fn left_slope<T: Scalar>(
    band: &BandData<T>,
    s: T,
    params: &ModelParams<T>,
    gamma: CharRoots<T>,
) -> T {
    let x = s / params.s0;
    (gamma.pos * band.e1_s0 * x.powf(gamma.pos) + gamma.neg * band.e2_s0 * x.powf(gamma.neg)) / s
}

/// The level of `s0` at which the classification switches from IV (below)
/// to IIIa (above) for drift `mu0`: the root in `[b1, b0(mu0)]` of
/// `V(s0, 1, 1) = (K - b0)(s0/b0)^g-`.
///
/// `V(., 1, 1)` does not depend on `mu0` or `s0`, so one excited solve serves
/// a whole sweep.
pub fn s0_max<T: Scalar>(
    mu0: T,
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
) -> Result<T> {
    same_excited_model(params, excited)?;
    let params = params.with_mu0(mu0);
    let gamma = params.gamma()?;
    let k = params.strike_k;
    let b0 = mckean_boundary(gamma, k);
    let b1 = excited.b1;
    let no_switch = |detail: String| Error::NoSwitchPoint {
        mu0: to_f64(mu0),
        detail,
    };
    if !(b0 > b1) {
        return Err(no_switch(format!(
            "b0 = {} does not exceed b1 = {}",
            to_f64(b0),
            to_f64(b1)
        )));
    }
    let gap = |s0: T| excited.value(s0) - (k - b0) * (s0 / b0).powf(gamma.neg);
    let (lo, hi) = (gap(b1), gap(b0));
    if lo > T::zero() || hi < T::zero() {
        return Err(no_switch(format!(
            "gap has no sign change on [b1, b0]: {} .. {}",
            to_f64(lo),
            to_f64(hi)
        )));
    }
    bisect("s0_max", gap, b1, b0, rel_tol::<T>(1e-8) * k).map_err(|e| no_switch(e.to_string()))
}

/// `mu0` at which `b0(mu0) = b1`, from inverting the quadratic at `g- = -b1/(K - b1)`.
pub fn mu0_crossing<T: Scalar>(params: &ModelParams<T>, excited: &ExcitedSolution<T>) -> Result<T> {
    same_excited_model(params, excited)?;
    let (k, b1) = (params.strike_k, excited.b1);
    let g = -b1 / (k - b1);
    let half_var = params.sigma0 * params.sigma0 / lit(2.0);
    Ok(half_var + (params.alpha - half_var * g * g) / g)
}

/// Classifies and, in case IV, solves for `b*`.
pub fn solve_pre_regime<T: Scalar>(
    params: &ModelParams<T>,
    excited: &ExcitedSolution<T>,
) -> Result<PreRegimeSolution<T>> {
    let case = classify(params, excited)?;
    let gamma = params.gamma()?;
    let band = match case {
        Case::IV => Some(solve_b_star(params, excited, gamma)?),
        _ => None,
    };
    Ok(PreRegimeSolution {
        case,
        b0: mckean_boundary(gamma, params.strike_k),
        b1: excited.b1,
        v_s0: excited.value(params.s0),
        gamma,
        params: *params,
        band,
    })
}

/// `V(s, 0, 1)` for `s > s0`.
pub fn value_pre_regime<T: Scalar>(s: T, sol: &PreRegimeSolution<T>) -> Result<T> {
    sol.value(s)
}

impl<T: Scalar> PreRegimeSolution<T> {
    fn check_domain(&self, s: T) -> Result<()> {
        if s > self.params.s0 {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "s",
                value: to_f64(s),
                lo: to_f64(self.params.s0),
                hi: f64::INFINITY,
            })
        }
    }

    pub fn value(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        let k = self.params.strike_k;
        Ok(match &self.band {
            None => self.v_s0 * (s / self.params.s0).powf(self.gamma.neg),
            Some(band) if s <= band.b_star => left_branch(band, s, &self.params, self.gamma),
            Some(_) if s <= self.b0 => k - s,
            Some(_) => (k - self.b0) * (s / self.b0).powf(self.gamma.neg),
        })
    }

    pub fn slope(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        let k = self.params.strike_k;
        let gm = self.gamma.neg;
        Ok(match &self.band {
            None => gm * self.v_s0 * (s / self.params.s0).powf(gm) / s,
            Some(band) if s <= band.b_star => left_slope(band, s, &self.params, self.gamma),
            Some(_) if s <= self.b0 => -T::one(),
            Some(_) => gm * (k - self.b0) * (s / self.b0).powf(gm) / s,
        })
    }

    pub fn b_star(&self) -> Option<T> {
        self.band.map(|b| b.b_star)
    }

    /// `e1*` in raw form (multiplies `s^g+`).
    pub fn e1_star(&self) -> Option<T> {
        self.band
            .map(|b| b.e1_s0 / self.params.s0.powf(self.gamma.pos))
    }

    /// `e2*` in raw form (multiplies `s^g-`).
    pub fn e2_star(&self) -> Option<T> {
        self.band
            .map(|b| b.e2_s0 / self.params.s0.powf(self.gamma.neg))
    }

    /// Case IV: relative residuals of value matching at `s0`, value matching
    /// and unit slope at `b*`, and the largest dominance shortfall of the left
    /// branch on an `n`-point interior grid of `(s0, b*)` (zero when it dominates).
    pub fn band_residuals(&self, n: usize) -> Option<[T; 4]> {
        let band = self.band?;
        let (p, g) = (&self.params, self.gamma);
        let k = p.strike_k;
        let at_s0 = band.e1_s0 + band.e2_s0;
        let r0 = (at_s0 - self.v_s0).abs() / (k + band.e1_s0.abs() + band.e2_s0.abs());
        let v_b = left_branch(&band, band.b_star, p, g);
        let r1 = (v_b - (k - band.b_star)).abs() / k;
        let r2 = (left_slope(&band, band.b_star, p, g) + T::one()).abs();
        let mut shortfall = T::zero();
        for i in 1..=n {
            let s = p.s0 + (band.b_star - p.s0) * lit::<T>(i as f64) / lit::<T>(n as f64 + 1.0);
            shortfall = shortfall.max((k - s) - left_branch(&band, s, p, g));
        }
        Some([r0, r1, r2, shortfall.max(T::zero()) / k])
    }
}
