//! Scalar root finders: Newton kept inside a bracket, and Brent's method.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}]")]
    NoBracket { a: f64, b: f64 },
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("function evaluation failed: {0}")]
    Eval(String),
}

/// Newton's method on `g` with derivative `dg`, falling back to bisection
/// whenever a step leaves the bracket `[a, b]` (which must contain a sign change).
/// Stops when `|g| <= ftol` or the bracket is below `xtol`.
pub fn newton_bracketed<G>(mut g: G, a: f64, b: f64, ftol: f64, xtol: f64) -> Result<f64, RootError>
where
    G: FnMut(f64) -> Result<(f64, f64), String>,
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (glo, _) = g(lo).map_err(RootError::Eval)?;
    let (ghi, _) = g(hi).map_err(RootError::Eval)?;
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(RootError::NoBracket { a: lo, b: hi });
    }
    let lo_sign = glo.signum();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (gx, dx) = g(x).map_err(RootError::Eval)?;
        if gx.abs() <= ftol {
            return Ok(x);
        }
        if gx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
        let step = if dx != 0.0 { x - gx / dx } else { f64::NAN };
        x = if step.is_finite() && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Err(RootError::NoConvergence(200))
}

/// Brent's method for a bracketed root.
pub fn brent<G>(mut g: G, a: f64, b: f64, xtol: f64) -> Result<f64, RootError>
where
    G: FnMut(f64) -> Result<f64, String>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = g(a).map_err(RootError::Eval)?;
    let mut fb = g(b).map_err(RootError::Eval)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket { a, b });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b).map_err(RootError::Eval)?;
    }
    Err(RootError::NoConvergence(300))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt2() {
        let r = newton_bracketed(|x| Ok((x * x - 2.0, 2.0 * x)), 0.0, 3.0, 1e-15, 1e-16).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn newton_survives_flat_derivative() {
        // derivative vanishes at the midpoint start
        let r = newton_bracketed(|x| Ok((x.powi(3) - 0.001, 3.0 * x * x)), -1.0, 1.0, 1e-14, 1e-16).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn brent_cosine() {
        let r = brent(|x| Ok(x.cos()), 1.0, 2.0, 1e-15).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn missing_bracket_is_reported() {
        assert!(matches!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12), Err(RootError::NoBracket { .. })));
    }
}
