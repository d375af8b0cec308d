//! Bracketed scalar root finding.
//!
//! Both routines require a sign change on the initial bracket and never
//! leave it, so a returned root always lies inside `[a, b]`.

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};

const MAX_ITER: usize = 200;

/// Brent's method: inverse quadratic / secant steps guarded by bisection.
///
/// Terminates when the bracket is narrower than `2 * (xtol + 2 eps |x|)` or
/// the residual is exactly zero.
pub fn brent<T, F>(what: &'static str, mut f: F, a: T, b: T, xtol: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let two = T::one() + T::one();
    let half = two.recip();
    let three = two + T::one();
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::solver(what, "objective is NaN at the bracket ends"));
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::solver(
            what,
            format!(
                "no sign change on [{}, {}]: f(a) = {}, f(b) = {}",
                to_f64(a),
                to_f64(b),
                to_f64(fa),
                to_f64(fb)
            ),
        ));
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * xtol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = three * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol1 {
            b + d
        } else {
            b + tol1 * xm.signum()
        };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::solver(
                what,
                format!("objective is NaN at {}", to_f64(b)),
            ));
        }
    }
    Err(Error::solver(what, "iteration limit reached"))
}

/// Plain bisection down to a bracket width of `xtol`.
pub fn bisect<T, F>(what: &'static str, mut f: F, a: T, b: T, xtol: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let half = (T::one() + T::one()).recip();
    let (mut lo, mut hi) = (a, b);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::solver(
            what,
            format!(
                "no sign change on [{}, {}]: f(a) = {}, f(b) = {}",
                to_f64(a),
                to_f64(b),
                to_f64(flo),
                to_f64(fhi)
            ),
        ));
    }
    let lo_sign = flo.signum();
    for _ in 0..MAX_ITER {
        let mid = half * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(half * (lo + hi))
}
