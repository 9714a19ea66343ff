//! Bracketed scalar root finding (Brent's method) and bracket expansion.

use crate::error::{Result, SwitchError};

const MAX_ITER: usize = 200;
const MAX_EXPANSIONS: usize = 60;

/// Root of `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (a zero at either end is returned directly).
///
/// Brent's method: inverse quadratic / secant steps guarded by bisection.
/// Terminates when the bracket width falls below `1e-14 (1 + |x|)` (or
/// machine resolution) or `f` vanishes, within 200 iterations.
pub fn find_root_bracketed<F>(mut f: F, lo: f64, hi: f64, equation: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let fa = f(lo)?;
    let fb = f(hi)?;
    brent(&mut f, lo, hi, fa, fb, (equation, lo, hi))
}

/// `report` is the equation name and bracket quoted in errors.
fn brent<F>(
    f: &mut F,
    lo: f64,
    hi: f64,
    fa: f64,
    fb: f64,
    report: (&'static str, f64, f64),
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let not_bracketed = || {
        let (equation, lo, hi) = report;
        SwitchError::RootNotBracketed { equation, lo, hi }
    };
    if fa.is_nan() || fb.is_nan() {
        return Err(not_bracketed());
    }
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    if fa.signum() == fb.signum() {
        return Err(not_bracketed());
    }
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, fa, fb);
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-16;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
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
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = f(b)?;
        if fb.is_nan() {
            return Err(not_bracketed());
        }
    }
    Ok(b)
}

/// Root of `f` on the positive half-line, searched in `u = ln x` so that
/// brackets spanning many decades are resolved to relative precision.
pub fn find_root_positive<F>(mut f: F, lo: f64, hi: f64, equation: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo) {
        return Err(SwitchError::RootNotBracketed { equation, lo, hi });
    }
    let fa = f(lo)?;
    let fb = f(hi)?;
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    let mut g = |u: f64| f(u.exp());
    let u = brent(&mut g, lo.ln(), hi.ln(), fa, fb, (equation, lo, hi))?;
    Ok(u.exp().clamp(lo, hi))
}

/// Step factor of the `i`-th bracket expansion: doubling first, then
/// `10⁴` per step so that roots out to `1e±300` are still reachable.
fn growth(i: usize) -> f64 {
    if i < MAX_EXPANSIONS {
        2.0
    } else {
        1e4
    }
}

/// Grows `hi` from `start` until `f(hi)` has the sign opposite to `sign_at_lo`.
pub fn expand_up<F>(mut f: F, sign_at_lo: f64, start: f64, equation: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = start;
    let mut i = 0;
    while hi < 1e300 {
        let v = f(hi)?;
        if v == 0.0 || v.signum() != sign_at_lo.signum() {
            return Ok(hi);
        }
        hi *= growth(i);
        i += 1;
    }
    Err(SwitchError::RootNotBracketed {
        equation,
        lo: start,
        hi,
    })
}

/// Shrinks `lo` from `start` until `f(lo)` has the sign opposite to `sign_at_hi`.
pub fn expand_down<F>(mut f: F, sign_at_hi: f64, start: f64, equation: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut lo = start;
    let mut i = 0;
    while lo > 1e-300 {
        let v = f(lo)?;
        if v == 0.0 || v.signum() != sign_at_hi.signum() {
            return Ok(lo);
        }
        lo /= growth(i);
        i += 1;
    }
    Err(SwitchError::RootNotBracketed {
        equation,
        lo,
        hi: start,
    })
}
