//! Secant iteration safeguarded by bisection.

use thiserror::Error;

pub const MAX_EXPANSIONS: usize = 60;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change in [{a}, {b}] after {MAX_EXPANSIONS} bracket doublings")]
    NoBracket { a: f64, b: f64 },
    #[error("no convergence after {MAX_ITERATIONS} iterations (best x = {x}, f = {f:e})")]
    MaxIterations { x: f64, f: f64 },
    #[error("function returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub f: f64,
    pub iterations: usize,
}

fn eval(f: &mut impl FnMut(f64) -> f64, x: f64) -> Result<f64, RootError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RootError::NonFinite(x))
    }
}

/// Finds x with |f(x)| < tol. The upper end of the bracket is pushed outward
/// (doubling its distance from `a`) until f changes sign.
pub fn solve_scalar(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Root, RootError> {
    let mut fa = eval(&mut f, a)?;
    if fa.abs() < tol {
        return Ok(Root { x: a, f: fa, iterations: 0 });
    }
    let (mut lo, mut hi) = (a, b);
    let mut fb = eval(&mut f, b)?;
    let mut expansions = 0;
    while fa.signum() == fb.signum() && fb.abs() >= tol {
        if expansions == MAX_EXPANSIONS {
            return Err(RootError::NoBracket { a, b: hi });
        }
        lo = hi;
        fa = fb;
        hi = a + 2.0 * (hi - a);
        fb = eval(&mut f, hi)?;
        expansions += 1;
    }
    if fb.abs() < tol {
        return Ok(Root { x: hi, f: fb, iterations: 0 });
    }
    // Invariant: f(lo) and f(hi) have opposite signs.
    let (mut flo, mut fhi) = (fa, fb);
    let (mut x0, mut f0, mut x1, mut f1) = (lo, flo, hi, fhi);
    let mut width_prev = (hi - lo).abs();
    let mut best = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
    for it in 1..=MAX_ITERATIONS {
        let mut x = if f1 != f0 { x1 - f1 * (x1 - x0) / (f1 - f0) } else { f64::NAN };
        let (l, h) = (lo.min(hi), lo.max(hi));
        if !(x > l && x < h) {
            x = 0.5 * (lo + hi);
        }
        let fx = eval(&mut f, x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() < tol {
            return Ok(Root { x, f: fx, iterations: it });
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
        let width = (hi - lo).abs();
        if width <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(Root { x: best.0, f: best.1, iterations: it });
        }
        // Secant steps that fail to halve the bracket fall back to bisection.
        if it % 2 == 0 {
            if width > 0.5 * width_prev {
                x0 = lo;
                f0 = flo;
                x1 = hi;
                f1 = fhi;
                let mid = 0.5 * (lo + hi);
                let fm = eval(&mut f, mid)?;
                if fm.abs() < tol {
                    return Ok(Root { x: mid, f: fm, iterations: it });
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                    fhi = fm;
                }
            }
            width_prev = (hi - lo).abs();
        }
    }
    Err(RootError::MaxIterations { x: best.0, f: best.1 })
}

/// Plain bisection to a bracket width of `xtol`; used as an independent check.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let r = solve_scalar(|x| x - 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r.x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_two() {
        let r = solve_scalar(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.x - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands() {
        let r = solve_scalar(|x| x - 1000.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.x - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn no_root_is_reported() {
        assert!(matches!(
            solve_scalar(|x| x * x + 1.0, 0.0, 1.0, 1e-12),
            Err(RootError::NoBracket { .. })
        ));
    }

    #[test]
    fn flat_tail_still_converges() {
        // Strongly curved function on which pure secant stalls at one end.
        let r = solve_scalar(|x: f64| x.powi(9) - 1e-3, 0.0, 4.0, 1e-14).unwrap();
        assert!((r.x - 1e-3f64.powf(1.0 / 9.0)).abs() < 1e-12);
    }
}
