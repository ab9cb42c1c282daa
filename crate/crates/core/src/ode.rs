//! Adaptive Dormand–Prince 5(4) integrator over fixed-size states.
//!
//! Steps are controlled in the max norm of `err_i / (atol + rtol * max(|y_i|, |y_new_i|))`,
//! so padding a state with identically-zero components does not change the
//! step sequence. Integration runs forward or backward depending on the sign
//! of `t_end - t0` and lands exactly on `t_end`.

use thiserror::Error;

use crate::expr::EvalError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("right-hand side failed at t = {t}: {source}")]
    Rhs { t: f64, source: EvalError },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude; `f64::INFINITY` for none.
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-12, atol: 1e-14, h_max: f64::INFINITY, h_init: None, max_steps: 10_000_000 }
    }
}

/// An accepted step, handed to the observer.
pub struct Step<'a, const N: usize> {
    pub t: f64,
    pub y: &'a [f64; N],
    pub dy: &'a [f64; N],
}

/// Whether to keep integrating after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` to `t_end`, calling `observe`
/// after every accepted step (including a synthetic first call at `t0`).
///
/// Returns the final time and state; these differ from `t_end` only when the
/// observer stopped the integration.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    mut observe: O,
) -> Result<(f64, [f64; N]), OdeError>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], EvalError>,
    O: FnMut(Step<'_, N>) -> Flow,
{
    let mut eval = |t: f64, y: &[f64; N]| rhs(t, y).map_err(|source| OdeError::Rhs { t, source });
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, &y)?;
    if observe(Step { t, y: &y, dy: &k1 }) == Flow::Stop || t == t_end {
        return Ok((t, y));
    }

    let span = (t_end - t0).abs();
    let mut h = match ctl.h_init {
        Some(h0) => h0.abs(),
        None => {
            // Hairer–Wanner style starting guess
            let mut d0: f64 = 0.0;
            let mut d1: f64 = 0.0;
            for i in 0..N {
                let sc = ctl.atol + ctl.rtol * y[i].abs();
                d0 = d0.max((y[i] / sc).abs());
                d1 = d1.max((k1[i] / sc).abs());
            }
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span).min(ctl.h_max)
        }
    };
    h = h.min(ctl.h_max).max(1e-300);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= ctl.max_steps {
            return Err(OdeError::MaxSteps(ctl.max_steps));
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = dir * h;

        let k2 = eval(t + C2 * hs, &comb(&y, hs, &[(A21, &k1)]))?;
        let k3 = eval(t + C3 * hs, &comb(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = eval(t + C4 * hs, &comb(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = eval(t + C5 * hs, &comb(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = eval(t + hs, &comb(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
        let y_new = comb(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t_end } else { t + hs };
        let k7 = eval(t_new, &y_new)?;

        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            // treat as a hard rejection
            h *= 0.1;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::NonFinite { t });
            }
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            steps += 1;
            t = t_new;
            y = y_new;
            k1 = k7;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            if observe(Step { t, y: &y, dy: &k1 }) == Flow::Stop || last {
                return Ok((t, y));
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(ctl.h_max);
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
        }
        if h < 1e-15 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }
    }
}

/// Flow map convenience: integrate to `t_end` and return the state there.
pub fn flow<const N: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], EvalError>,
{
    integrate(rhs, t0, y0, t_end, ctl, |_| Flow::Continue).map(|(_, y)| y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let ctl = StepControl { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let tp = 2.0 * std::f64::consts::PI;
        let y = flow(|_, y: &[f64; 2]| Ok([y[1], -y[0]]), 0.0, [1.0, 0.0], tp, &ctl).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let ctl = StepControl { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let rhs = |_: f64, y: &[f64; 2]| Ok([y[1], y[0].sin()]);
        let y1 = flow(rhs, 0.0, [0.3, 0.1], 3.0, &ctl).unwrap();
        let y0 = flow(rhs, 3.0, y1, 0.0, &ctl).unwrap();
        assert!((y0[0] - 0.3).abs() < 1e-9 && (y0[1] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn observer_can_stop() {
        let ctl = StepControl::default();
        let (t, _) = integrate(
            |_, y: &[f64; 1]| Ok([y[0]]),
            0.0,
            [1.0],
            10.0,
            &ctl,
            |s| if s.y[0] > 2.0 { Flow::Stop } else { Flow::Continue },
        )
        .unwrap();
        assert!(t < 10.0 && t > 0.69);
    }

    #[test]
    fn exponential_growth_accuracy() {
        let ctl = StepControl { rtol: 1e-12, atol: 1e-16, ..Default::default() };
        let y = flow(|_, y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], 5.0, &ctl).unwrap();
        assert!((y[0] / 5f64.exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rhs_error_propagates() {
        let ctl = StepControl::default();
        let r = flow(
            |t, _: &[f64; 1]| if t > 0.5 { Err(EvalError::Domain("boom")) } else { Ok([1.0]) },
            0.0,
            [0.0],
            1.0,
            &ctl,
        );
        assert!(matches!(r, Err(OdeError::Rhs { .. })));
    }
}
