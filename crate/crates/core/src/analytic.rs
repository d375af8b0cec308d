//! Shared closed forms: characteristic roots, the classical perpetual put
//! under plain GBM, the particular solutions of the excited-state ODE and
//! the discounted two-sided exit functionals of a GBM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Market and model scalars. Time unit is years throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Drift before the price first reaches `s0`.
    pub mu0: T,
    /// Volatility before the price first reaches `s0`.
    pub sigma0: T,
    /// Drift in the excited state.
    pub mu1: T,
    /// Volatility in the excited state.
    pub sigma1: T,
    /// Rate of the exponential clock that ends the excited state.
    pub lambda: T,
    /// Discount rate.
    pub alpha: T,
    #[serde(rename = "strike_K", alias = "strike_k")]
    pub strike_k: T,
    /// Critical level whose first hit switches the volatility regime.
    pub s0: T,
}

impl<T: Scalar> ModelParams<T> {
    /// The fixed configuration of the worked index-put example: K = 17000,
    /// sigma0 = 20%, mu1 = 0, sigma1 = 35%, alpha = 5%, lambda = 100 / year.
    pub fn worked_example(mu0: T, s0: T) -> Self {
        Self {
            mu0,
            sigma0: lit(0.20),
            mu1: T::zero(),
            sigma1: lit(0.35),
            lambda: lit(100.0),
            alpha: lit(0.05),
            strike_k: lit(17000.0),
            s0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("strike_K", self.strike_k),
            ("s0", self.s0),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: to_f64(v),
                    reason: "must be finite and > 0",
                });
            }
        }
        for (name, v) in [("mu0", self.mu0), ("mu1", self.mu1)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: to_f64(v),
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }

    pub fn with_mu0(self, mu0: T) -> Self {
        Self { mu0, ..self }
    }

    pub fn with_s0(self, s0: T) -> Self {
        Self { s0, ..self }
    }

    pub fn with_strike(self, strike_k: T) -> Self {
        Self { strike_k, ..self }
    }

    /// Characteristic roots of the pre-hit generator (gamma).
    pub fn gamma(&self) -> Result<CharRoots<T>> {
        gamma_roots(self.mu0, self.sigma0, self.alpha)
    }

    /// Characteristic roots of the excited generator killed at `lambda` (beta).
    pub fn beta(&self) -> Result<CharRoots<T>> {
        beta_roots(self.mu1, self.sigma1, self.alpha, self.lambda)
    }

    /// Gain function `(K - s)^+`.
    #[inline]
    pub fn gain(&self, s: T) -> T {
        (self.strike_k - s).max(T::zero())
    }
}

/// The negative and positive root of a characteristic quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharRoots<T> {
    pub neg: T,
    pub pos: T,
}

/// Roots of `a r^2 + b r + c` for `a > 0 > c`, via the cancellation-free
/// form `q = -(b + sgn(b) sqrt(b^2 - 4ac)) / 2`, roots `q / a` and `c / q`.
fn split_quadratic<T: Scalar>(a: T, b: T, c: T) -> CharRoots<T> {
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let disc = (b * b - four * a * c).sqrt();
    let sgn = if b < T::zero() { -T::one() } else { T::one() };
    let q = -(b + sgn * disc) / two;
    let (r1, r2) = (q / a, c / q);
    CharRoots {
        neg: r1.min(r2),
        pos: r1.max(r2),
    }
}

/// Roots of `sigma0^2/2 g^2 + (mu0 - sigma0^2/2) g - alpha = 0`.
pub fn gamma_roots<T: Scalar>(mu0: T, sigma0: T, alpha: T) -> Result<CharRoots<T>> {
    if !(sigma0 > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: to_f64(sigma0),
            reason: "must be > 0",
        });
    }
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: to_f64(alpha),
            reason: "must be > 0",
        });
    }
    let half_var = sigma0 * sigma0 / lit(2.0);
    Ok(split_quadratic(half_var, mu0 - half_var, -alpha))
}

/// Roots of `sigma1^2/2 b^2 + (mu1 - sigma1^2/2) b - (alpha + lambda) = 0`.
pub fn beta_roots<T: Scalar>(mu1: T, sigma1: T, alpha: T, lambda: T) -> Result<CharRoots<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: to_f64(lambda),
            reason: "must be >= 0",
        });
    }
    gamma_roots(mu1, sigma1, alpha + lambda)
}

/// Optimal exercise level of the classical perpetual put,
/// `b0 = -gamma^- K / (1 - gamma^-)`.
pub fn mckean_boundary<T: Scalar>(gamma: CharRoots<T>, strike_k: T) -> T {
    -gamma.neg * strike_k / (T::one() - gamma.neg)
}

/// Value of the classical perpetual put.
pub fn mckean_value<T: Scalar>(s: T, gamma: CharRoots<T>, b0: T, strike_k: T) -> T {
    if s <= b0 {
        strike_k - s
    } else {
        (strike_k - b0) * (s / b0).powf(gamma.neg)
    }
}

/// `E_s[exp(-alpha tau_level)]` for a GBM started at `s >= level`.
pub fn hitting_laplace<T: Scalar>(s: T, level: T, gamma: CharRoots<T>) -> T {
    if s <= level {
        T::one()
    } else {
        (s / level).powf(gamma.neg)
    }
}

/// A particular solution `h` of
/// `mu1 s h' + sigma1^2/2 s^2 h'' + lambda (K - s) - (alpha + lambda) h = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Particular<T> {
    /// `h(s) = -lambda s / (alpha + lambda - mu1) + lambda K / (alpha + lambda)`.
    Linear { slope: T, level: T },
    /// `h(s) = lambda s ln s / (alpha + lambda + sigma1^2/2) + lambda K / (alpha + lambda)`,
    /// used when `alpha + lambda = mu1`.
    Log { coef: T, level: T },
}

impl<T: Scalar> Particular<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let ModelParams {
            mu1,
            sigma1,
            lambda,
            alpha,
            strike_k,
            ..
        } = *params;
        let killed = alpha + lambda;
        let level = lambda * strike_k / killed;
        let gap = killed - mu1;
        if gap.abs() < lit::<T>(1e-9) * killed {
            Particular::Log {
                coef: lambda / (killed + sigma1 * sigma1 / lit(2.0)),
                level,
            }
        } else {
            Particular::Linear {
                slope: -lambda / gap,
                level,
            }
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, Particular::Log { .. })
    }

    pub fn value(&self, s: T) -> T {
        match *self {
            Particular::Linear { slope, level } => slope * s + level,
            Particular::Log { coef, level } => coef * s * s.ln() + level,
        }
    }

    pub fn d1(&self, s: T) -> T {
        match *self {
            Particular::Linear { slope, .. } => slope,
            Particular::Log { coef, .. } => coef * (s.ln() + T::one()),
        }
    }

    pub fn d2(&self, s: T) -> T {
        match *self {
            Particular::Linear { .. } => T::zero(),
            Particular::Log { coef, .. } => coef / s,
        }
    }
}

/// Evaluates the particular solution at `s`, picking the branch from `params`.
pub fn h_particular<T: Scalar>(s: T, params: &ModelParams<T>) -> T {
    Particular::new(params).value(s)
}

/// Discounted two-sided exit functionals of the pre-hit GBM started at `s`:
/// `phi1 = E[exp(-alpha tau) 1{lower first}]`, `phi2 = E[exp(-alpha tau) 1{upper first}]`
/// with `tau` the first exit time from `(s0, s_upper)`.
///
/// Evaluated in the normalised variables `x = s / s0`, `y = s_upper / s0`
/// so that every power stays in `[0, 1]`.
pub fn exit_transforms<T: Scalar>(s: T, s_upper: T, gamma: CharRoots<T>, s0: T) -> Result<(T, T)> {
    if !(s >= s0 && s <= s_upper) {
        return Err(Error::Domain {
            what: "s",
            value: to_f64(s),
            lo: to_f64(s0),
            hi: to_f64(s_upper),
        });
    }
    if s == s0 {
        return Ok((T::one(), T::zero()));
    }
    if s == s_upper {
        return Ok((T::zero(), T::one()));
    }
    let (gm, gp) = (gamma.neg, gamma.pos);
    let x = s / s0;
    let y = s_upper / s0;
    let ratio = x / y;
    let den = T::one() - y.powf(gm - gp);
    let phi1 = (x.powf(gm) - ratio.powf(gp) * y.powf(gm)) / den;
    let phi2 = (ratio.powf(gp) - x.powf(gm) * y.powf(-gp)) / den;
    Ok((phi1, phi2))
}
