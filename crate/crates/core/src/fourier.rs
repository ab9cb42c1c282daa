//! Fourier coefficients of `ξ ↦ q(ξ, v)` over `[0, 2π)` and the `C³`-type
//! decay check that feeds the truncation estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;

/// Coefficients below this multiple of the sampled `max |q|` are rounding noise.
const SNAP: f64 = 1e-15;

fn check_periodic(q: &Expression, v: f64) -> Result<()> {
    let a = q.eval(&[0.0, v])?;
    let b = q.eval(&[2.0 * PI, v])?;
    if (a - b).abs() > 1e-10 {
        return Err(Error::Invalid(format!("q(xi, v) is not 2π-periodic in xi at v = {v}: q(0) = {a}, q(2π) = {b}")));
    }
    Ok(())
}

/// Trapezoidal rule with `n` nodes; exact for trigonometric polynomials of degree < n - |k|.
fn trapezoid(q: &Expression, k: i64, v: f64, n: usize) -> Result<(Complex64, f64)> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for j in 0..n {
        let xi = 2.0 * PI * j as f64 / n as f64;
        let val = q.eval(&[xi, v])?;
        scale = scale.max(val.abs());
        // reduce kj mod n so the angle stays small and exactly symmetric in k
        let kj = (k as i128 * j as i128).rem_euclid(n as i128) as f64;
        let ang = -2.0 * PI * kj / n as f64;
        acc += val * Complex64::new(ang.cos(), ang.sin());
    }
    Ok((acc / n as f64, scale))
}

fn snap(c: Complex64, scale: f64) -> Complex64 {
    let tol = SNAP * scale.max(f64::MIN_POSITIVE);
    Complex64::new(if c.re.abs() <= tol { 0.0 } else { c.re }, if c.im.abs() <= tol { 0.0 } else { c.im })
}

/// `q_k(v) = (1/2π) ∫_0^{2π} q(ξ, v) e^{-ikξ} dξ`.
pub fn fourier_coefficient(q: &Expression, k: i64, v: f64) -> Result<Complex64> {
    check_periodic(q, v)?;
    if !q.depends_on("xi") {
        return Ok(if k == 0 { Complex64::new(q.eval(&[0.0, v])?, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    let n = 256usize.max(16 * k.unsigned_abs() as usize);
    let (c, scale) = trapezoid(q, k, v, n)?;
    Ok(snap(c, scale))
}

/// Same as [`fourier_coefficient`] with an explicit node count.
pub fn fourier_coefficient_with_nodes(q: &Expression, k: i64, v: f64, n: usize) -> Result<Complex64> {
    check_periodic(q, v)?;
    let (c, scale) = trapezoid(q, k, v, n)?;
    Ok(snap(c, scale))
}

/// Proxy for `‖q‖_{C³}`: max over a 64-point ξ grid and the probes of
/// `|q| + |∂q| + |∂²q| + |∂³q|` (derivatives in ξ, symbolic).
pub fn m_estimate(q: &Expression, v_probe: &[f64]) -> Result<f64> {
    let d1 = q.differentiate("xi").expect("xi is declared");
    let d2 = d1.differentiate("xi").expect("xi is declared");
    let d3 = d2.differentiate("xi").expect("xi is declared");
    let mut m: f64 = 0.0;
    for &v in v_probe {
        for j in 0..64 {
            // half-offset grid keeps clear of kinks at multiples of π/32
            let xi = 2.0 * PI * (j as f64 + 0.5) / 64.0;
            let mut s = 0.0;
            for e in [q, &d1, &d2, &d3] {
                s += e.eval(&[xi, v])?.abs();
            }
            m = m.max(s);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub k_max: usize,
    /// `max_k sup_v |q_k(v)| (1 + |k|)³`: the constant `C·M` of the bound.
    pub cm_fit: f64,
    /// `sup_v |q_k(v)| (1 + k)³` for `k = 1..=k_max`.
    pub weighted: Vec<f64>,
    pub m_estimate: f64,
    pub bounded: bool,
    pub warning: Option<String>,
}

/// Check that `sup_v |q_k(v)| (1+|k|)³` stays bounded for `1 ≤ |k| ≤ k_max`.
///
/// Boundedness is judged by trend: the weighted magnitudes over the upper
/// half of the k-range may not exceed 1.25 times their maximum over the lower
/// half. A failure only produces a warning.
pub fn decay_check(q: &Expression, v_probe: &[f64], k_max: usize) -> Result<DecayReport> {
    let mut weighted = Vec::with_capacity(k_max);
    let mut q0_scale: f64 = 0.0;
    for &v in v_probe {
        q0_scale = q0_scale.max(fourier_coefficient(q, 0, v)?.norm());
    }
    for k in 1..=k_max as i64 {
        let mut sup: f64 = 0.0;
        for &v in v_probe {
            let c = fourier_coefficient(q, k, v)?.norm().max(fourier_coefficient(q, -k, v)?.norm());
            sup = sup.max(c);
        }
        weighted.push(sup * (1.0 + k as f64).powi(3));
    }
    let cm_fit = weighted.iter().cloned().fold(0.0, f64::max);
    let half = k_max.div_ceil(2).max(1);
    let lower = weighted[..half.min(weighted.len())].iter().cloned().fold(0.0, f64::max);
    let upper = weighted[half.min(weighted.len())..].iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * (1.0 + cm_fit + q0_scale);
    let bounded = upper <= 1.25 * lower + floor;
    let warning = (!bounded).then(|| {
        format!(
            "|q_k|(1+|k|)^3 grows with k (max {upper:.3e} on the upper half vs {lower:.3e} below): \
             q may be rougher than C^3, outside the hypotheses of the asymptotic formula"
        )
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(DecayReport { k_max, cm_fit, weighted, m_estimate: m_estimate(q, v_probe)?, bounded, warning })
}
