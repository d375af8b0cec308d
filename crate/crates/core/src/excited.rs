//! The excited state `(y, i) = (1, 1)`: free boundary `b1` and the
//! piecewise value `V(., 1, 1)`.
//!
//! On `(b1, K]` the value is `c1 s^b+ + c2 s^b- + h(s)` and on `(K, inf)` it
//! is `d2 s^b-`. With `lambda` large the exponents are in the tens or
//! thousands, so the coefficients are stored pre-multiplied by the power of
//! the level they are anchored to:
//!
//! * `c1_k = c1 K^b+`, used as `c1_k (s/K)^b+`
//! * `c2_b = c2 b1^b-`, used as `c2_b (s/b1)^b-`
//! * `d2_k = d2 K^b-`, used as `d2_k (s/K)^b-`
//!
//! For a trial boundary `b` the first three pasting equations are linear in
//! the coefficients and solve in closed form; the remaining smooth-fit
//! equation is a scalar root find in `b`.

use crate::analytic::{CharRoots, ModelParams, Particular};
use crate::error::{Error, Result};
use crate::scalar::{lit, rel_tol, Scalar};
use crate::solver::brent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitedSolution<T> {
    pub params: ModelParams<T>,
    pub beta: CharRoots<T>,
    pub b1: T,
    pub c1_k: T,
    pub c2_b: T,
    pub d2_k: T,
    particular: Particular<T>,
}

/// Coefficients solving the first three pasting equations for a trial boundary `b`.
#[derive(Debug, Clone, Copy)]
struct Trial<T> {
    c1_k: T,
    c2_b: T,
    d2_k: T,
}

struct Reduction<T> {
    strike: T,
    beta: CharRoots<T>,
    h: Particular<T>,
    c1_k: T,
}

impl<T: Scalar> Reduction<T> {
    fn new(params: &ModelParams<T>, beta: CharRoots<T>) -> Self {
        let h = Particular::new(params);
        let k = params.strike_k;
        // value and slope matching at K eliminate d2 and fix c1 independently of b
        let c1_k = (beta.neg * h.value(k) - k * h.d1(k)) / (beta.pos - beta.neg);
        Self {
            strike: k,
            beta,
            h,
            c1_k,
        }
    }

    fn trial(&self, b: T) -> Trial<T> {
        let k = self.strike;
        let c2_b = k - b - self.h.value(b) - self.c1_k * (b / k).powf(self.beta.pos);
        let d2_k = self.c1_k + c2_b * (k / b).powf(self.beta.neg) + self.h.value(k);
        Trial {
            c1_k: self.c1_k,
            c2_b,
            d2_k,
        }
    }

    /// `V_b'(b)` for the trial function fixed by the first three equations.
    fn slope_at_boundary(&self, b: T) -> T {
        let t = self.trial(b);
        (self.beta.pos * t.c1_k * (b / self.strike).powf(self.beta.pos) + self.beta.neg * t.c2_b)
            / b
            + self.h.d1(b)
    }
}

/// Slope at `b` of the trial value whose coefficients solve the first three
/// pasting equations, in closed form (requires `alpha + lambda != mu1`).
///
/// `b1` is the unique `b` in `(0, K)` with `gamma_big(b) = -1`.
pub fn gamma_big<T: Scalar>(b: T, params: &ModelParams<T>, beta: CharRoots<T>) -> Result<T> {
    let ModelParams {
        mu1,
        lambda,
        alpha,
        strike_k: k,
        ..
    } = *params;
    if Particular::new(params).is_log() {
        return Err(Error::UnsupportedBranch(
            "closed-form slope needs alpha + lambda != mu1",
        ));
    }
    let (bm, bp) = (beta.neg, beta.pos);
    let killed = alpha + lambda;
    let gap = killed - mu1;
    let c1_k = lambda * k / (bm - bp) * (bm / gap - bm / killed - T::one() / gap);
    // c1 b^(b+ - 1) == c1_k (b/K)^b+ / b
    Ok(
        c1_k * (b / k).powf(bp) / b * (bp - bm) + alpha * k * bm / (killed * b)
            - ((alpha - mu1) * bm + lambda) / gap,
    )
}

/// Solves the excited-state free-boundary problem.
pub fn solve_excited<T: Scalar>(params: &ModelParams<T>) -> Result<ExcitedSolution<T>> {
    params.validate()?;
    let beta = params.beta()?;
    let red = Reduction::new(params, beta);
    let k = params.strike_k;
    let lo = k * lit(1e-6);
    let hi = k * (T::one() - rel_tol::<T>(1e-9));
    let xtol = k * T::epsilon() * lit(4.0);
    let b1 = brent(
        "excited boundary b1",
        |b| red.slope_at_boundary(b) + T::one(),
        lo,
        hi,
        xtol,
    )?;
    let t = red.trial(b1);
    Ok(ExcitedSolution {
        params: *params,
        beta,
        b1,
        c1_k: t.c1_k,
        c2_b: t.c2_b,
        d2_k: t.d2_k,
        particular: red.h,
    })
}

impl<T: Scalar> ExcitedSolution<T> {
    /// `V(s, 1, 1)`.
    pub fn value(&self, s: T) -> T {
        let k = self.params.strike_k;
        if s <= self.b1 {
            k - s
        } else if s <= k {
            self.c1_k * (s / k).powf(self.beta.pos)
                + self.c2_b * (s / self.b1).powf(self.beta.neg)
                + self.particular.value(s)
        } else {
            self.d2_k * (s / k).powf(self.beta.neg)
        }
    }

    /// `dV(s, 1, 1)/ds`, left branch at the breakpoints.
    pub fn slope(&self, s: T) -> T {
        let k = self.params.strike_k;
        let (bm, bp) = (self.beta.neg, self.beta.pos);
        if s <= self.b1 {
            -T::one()
        } else if s <= k {
            (bp * self.c1_k * (s / k).powf(bp) + bm * self.c2_b * (s / self.b1).powf(bm)) / s
                + self.particular.d1(s)
        } else {
            bm * self.d2_k * (s / k).powf(bm) / s
        }
    }

    /// Same coefficients with the boundary moved to `b1`. Only useful as a
    /// deliberately wrong solution.
    pub fn with_b1(self, b1: T) -> Self {
        Self { b1, ..self }
    }

    pub fn c1(&self) -> T {
        self.c1_k / self.params.strike_k.powf(self.beta.pos)
    }

    pub fn c2(&self) -> T {
        self.c2_b / self.b1.powf(self.beta.neg)
    }

    pub fn d2(&self) -> T {
        self.d2_k / self.params.strike_k.powf(self.beta.neg)
    }

    pub fn particular(&self) -> Particular<T> {
        self.particular
    }

    /// Relative residuals of the four pasting equations (value and slope at
    /// `K`, value and slope at `b1`), each scaled by the magnitude of its terms.
    pub fn residuals(&self) -> [T; 4] {
        let k = self.params.strike_k;
        let b = self.b1;
        let (bm, bp) = (self.beta.neg, self.beta.pos);
        let h = &self.particular;
        let r = (k / b).powf(bm);
        let q = (b / k).powf(bp);
        let rel = |terms: &[T]| {
            let sum = terms.iter().fold(T::zero(), |acc, &t| acc + t);
            let scale = terms.iter().fold(k, |acc, &t| acc + t.abs());
            sum.abs() / scale
        };
        [
            rel(&[self.c1_k, self.c2_b * r, h.value(k), -self.d2_k]),
            rel(&[
                bp * self.c1_k,
                bm * self.c2_b * r,
                k * h.d1(k),
                -bm * self.d2_k,
            ]),
            rel(&[k, -b, -self.c1_k * q, -self.c2_b, -h.value(b)]),
            rel(&[b, bp * self.c1_k * q, bm * self.c2_b, b * h.d1(b)]),
        ]
    }

    pub fn max_residual(&self) -> T {
        self.residuals().into_iter().fold(T::zero(), T::max)
    }
}

/// `V(s, 1, 1)` for a solved excited state.
pub fn value_excited<T: Scalar>(s: T, sol: &ExcitedSolution<T>) -> T {
    sol.value(s)
}

/// A candidate `(c2, x0)` of the toy free-boundary problem with gain data
/// `g(1/2) = 4, g(1) = 1, g'(1/2) = -8, g'(1) = -1` for `X = x exp(sqrt(2) B)`
/// discounted at rate one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyCandidate {
    pub c2: f64,
    pub x0: f64,
    /// `g(x0) - c2 / x0`
    pub value_residual: f64,
    /// `g'(x0) + c2 / x0^2`
    pub slope_residual: f64,
}

/// Shows that value matching plus smooth fit can have more than one solution
/// even for a convex gain: every candidate below solves
/// `g(x0) = c2 / x0`, `g'(x0) = -c2 / x0^2`.
pub fn toy_nonuniqueness_a4() -> Vec<ToyCandidate> {
    // (x, g(x), g'(x)) at the points where the gain is pinned
    const GAIN_DATA: [(f64, f64, f64); 2] = [(1.0, 1.0, -1.0), (0.5, 4.0, -8.0)];
    GAIN_DATA
        .iter()
        .filter_map(|&(x0, g, dg)| {
            let c2 = g * x0;
            let slope_residual = dg + c2 / (x0 * x0);
            (slope_residual.abs() < 1e-12).then_some(ToyCandidate {
                c2,
                x0,
                value_residual: g - c2 / x0,
                slope_residual,
            })
        })
        .collect()
}
