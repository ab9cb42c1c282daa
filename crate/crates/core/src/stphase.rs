//! Stationary-phase evaluation of the splitting coefficients.
//!
//! For the phase `φ(t) = k x0(t) + ν t` (`ν = −1` for `cos(t/ε)` forcing,
//! `ν = m·ω` for a quasi-periodic harmonic) the critical points solve
//! `x0'(t*) = −ν/k`, and each contributes
//!
//! ```text
//! v* q_k(v*) exp(i(φ(t*)/ε + σπ/4)) / (|k|^{1/2} |f(x0(t*))|^{1/2}),   σ = sign(k f(x0(t*)))
//! ```
//!
//! to a sum `S`; the coefficients are `√(2π)·(Re S, Im S)`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Forcing, SeparatrixOrbit, SystemSpec};
use crate::error::{Error, Result};
use crate::fourier::{decay_check, fourier_coefficient, DecayReport};
use crate::roots::{brent, newton_bracketed};

/// How the phase at a critical point enters the summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `φ(t*)/ε`: the coefficients depend on ε.
    #[default]
    Resolved,
    /// The ε-free form `k x0(t*) − t*`, with the quasi-periodic sums taken
    /// over the periodic critical sets. Kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpOrigin {
    Interior,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub k: i64,
    pub m: Option<Vec<i32>>,
    /// `x0'(t*)`, equal to `−ν/k`.
    pub target: f64,
    pub t_star: f64,
    pub x_star: f64,
    pub f_star: f64,
    pub sigma: i32,
    pub origin: CpOrigin,
    /// `k x0(t*) + ν t*`
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StphaseOptions {
    /// Fixed truncation order; chosen automatically when absent.
    pub k_max: Option<usize>,
    pub k_cap: usize,
    pub hypothesis_floor: f64,
    pub verdict_floor: f64,
    pub convention: PhaseConvention,
}

impl Default for StphaseOptions {
    fn default() -> Self {
        StphaseOptions {
            k_max: None,
            k_cap: 64,
            hypothesis_floor: 1e-6,
            verdict_floor: 1e-8,
            convention: PhaseConvention::Resolved,
        }
    }
}

/// Zeros of `x0'(t) − target`.
///
/// Interior roots are bracketed between consecutive extrema of `x0'` (zeros
/// of `f(x0(t))`, located on a grid of step `min(0.01, 1/(4|k|))`) and
/// polished by safeguarded Newton; roots beyond the dense range come from
/// the exponential tails in closed form.
pub fn critical_points(orbit: &SeparatrixOrbit, target: f64, k_abs: u64) -> Result<Vec<(f64, CpOrigin)>> {
    if target == 0.0 || !target.is_finite() {
        return Err(Error::Invalid(format!("critical-point target must be non-zero, got {target}")));
    }
    let vmax = orbit.max_speed();
    if (target.abs() - vmax).abs() <= 1e-9 * vmax {
        return Err(Error::Hypothesis(format!(
            "target speed {target} equals max|x0'| = {vmax}: degenerate (tangential) critical point"
        )));
    }
    if target.abs() > vmax {
        return Ok(Vec::new());
    }

    let (t0, t1) = (orbit.t_min(), orbit.t_max());
    let h = 0.01f64.min(0.25 / k_abs.max(1) as f64);
    let n = ((t1 - t0) / h).ceil() as usize;
    let grid = |i: usize| if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 };

    // extrema of x0'
    let mut breaks = vec![t0];
    let mut prev = orbit.eval(t0).a;
    for i in 1..=n {
        let t = grid(i);
        let a = orbit.eval(t).a;
        if a == 0.0 {
            breaks.push(t);
        } else if prev != 0.0 && a.signum() != prev.signum() {
            let tb = brent(|s| Ok(orbit.eval(s).a), grid(i - 1), t, 1e-14)?;
            breaks.push(tb);
        }
        prev = a;
    }
    breaks.push(t1);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut roots: Vec<(f64, CpOrigin)> = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let glo = orbit.eval(lo).v - target;
        let ghi = orbit.eval(hi).v - target;
        if glo == 0.0 {
            roots.push((lo, CpOrigin::Interior));
            continue;
        }
        if glo.signum() == ghi.signum() {
            continue;
        }
        let t = newton_bracketed(
            |s| {
                let p = orbit.eval(s);
                Ok((p.v - target, p.a))
            },
            lo,
            hi,
            1e-13,
            1e-16,
        )?;
        roots.push((t, CpOrigin::Interior));
    }

    // tails: λ c± e^{∓λt} = target
    let (lp, cp) = (orbit.lambda_plus(), orbit.c_plus());
    if cp != 0.0 && target / cp > 0.0 {
        let t = (lp * cp / target).ln() / lp;
        if t > t1 {
            roots.push((t, CpOrigin::Tail));
        }
    }
    let (lm, cm) = (orbit.lambda_minus(), orbit.c_minus());
    if cm != 0.0 && target / cm > 0.0 {
        let t = (target / (lm * cm)).ln() / lm;
        if t < t0 {
            roots.push((t, CpOrigin::Tail));
        }
    }

    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-8);
    Ok(roots)
}

/// Fill in position, field value and signature at a critical point.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    k: i64,
    m: Option<&[i32]>,
    nu: f64,
    t_star: f64,
    origin: CpOrigin,
    hypothesis_floor: f64,
) -> Result<CriticalPoint> {
    let p = orbit.eval(t_star);
    let f_star = sys.f_at(p.x)?;
    if f_star.abs() < hypothesis_floor {
        return Err(Error::Hypothesis(format!(
            "non-degeneracy |f(x0(t*))| > 0 fails: |f| = {:.3e} < {hypothesis_floor:.1e} at t* = {t_star}, k = {k}",
            f_star.abs()
        )));
    }
    Ok(CriticalPoint {
        k,
        m: m.map(|m| m.to_vec()),
        target: -nu / k as f64,
        t_star,
        x_star: p.x,
        f_star,
        sigma: if (k as f64 * f_star) > 0.0 { 1 } else { -1 },
        origin,
        alpha: k as f64 * p.x + nu * t_star,
    })
}

/// Summand of one critical point. `eps = None` evaluates the ε-free phase.
pub fn contribution(cp: &CriticalPoint, q_k: Complex64, eps: Option<f64>) -> Complex64 {
    if q_k == Complex64::new(0.0, 0.0) {
        return q_k;
    }
    let phase = match eps {
        Some(e) => cp.alpha / e,
        None => cp.alpha,
    } + cp.sigma as f64 * FRAC_PI_4;
    let mag = cp.target / ((cp.k.unsigned_abs() as f64).sqrt() * cp.f_star.abs().sqrt());
    q_k * mag * Complex64::from_polar(1.0, phase)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCoefficients {
    pub m: Vec<i32>,
    /// `m·ω`
    pub frequency: f64,
    /// `F_m` as `[re, im]`
    pub forcing: [f64; 2],
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Coefficients {
    Periodic { a: f64, b: f64 },
    QuasiPeriodic { harmonics: Vec<HarmonicCoefficients> },
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingCoefficients {
    pub r: f64,
    /// ε the phases were resolved at; `None` for the ε-free convention.
    pub epsilon: Option<f64>,
    pub convention: PhaseConvention,
    pub coefficients: Coefficients,
    pub k_max_used: usize,
    pub truncation_estimate: f64,
    /// `Σ |summand|` over the retained terms (ε-independent).
    pub envelope: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub decay: DecayReport,
}

/// Amplitude of one frequency `ν > 0` in the leading term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicAmplitude {
    pub nu: f64,
    /// coefficient of `cos(ν t0/ε)`
    pub a: f64,
    /// coefficient of `sin(ν t0/ε)`
    pub b: f64,
    pub amplitude: f64,
}

impl SplittingCoefficients {
    /// `√(𝒜² + ℬ²)`, or the largest per-frequency amplitude.
    pub fn amplitude(&self) -> f64 {
        match &self.coefficients {
            Coefficients::Periodic { a, b } => a.hypot(*b),
            Coefficients::QuasiPeriodic { .. } => {
                self.harmonic_amplitudes().iter().map(|h| h.amplitude).fold(0.0, f64::max)
            }
        }
    }

    /// Leading term written as `Σ_ν a_ν cos(ν t0/ε) + b_ν sin(ν t0/ε)` over `ν > 0`.
    pub fn harmonic_amplitudes(&self) -> Vec<HarmonicAmplitude> {
        match &self.coefficients {
            Coefficients::Periodic { a, b } => {
                vec![HarmonicAmplitude { nu: 1.0, a: *a, b: *b, amplitude: a.hypot(*b) }]
            }
            Coefficients::QuasiPeriodic { harmonics } => {
                let mut out: Vec<HarmonicAmplitude> = Vec::new();
                for h in harmonics.iter().filter(|h| h.frequency < 0.0) {
                    let nu = -h.frequency;
                    let (a, b) = (h.a, h.b);
                    match out.iter_mut().find(|o| (o.nu - nu).abs() <= 1e-12 * nu) {
                        Some(o) => {
                            o.a += 2.0 * a;
                            o.b += 2.0 * b;
                            o.amplitude = o.a.hypot(o.b);
                        }
                        None => out.push(HarmonicAmplitude { nu, a: 2.0 * a, b: 2.0 * b, amplitude: 2.0 * a.hypot(b) }),
                    }
                }
                out.sort_by(|p, q| p.nu.total_cmp(&q.nu));
                out
            }
        }
    }

    /// Leading-order displacement `ε^{r+1/2} (…)` at phase `t0`.
    pub fn predict(&self, eps: f64, t0: f64) -> f64 {
        let scale = eps.powf(self.r + 0.5);
        match &self.coefficients {
            Coefficients::Periodic { a, b } => scale * (a * (t0 / eps).cos() + b * (t0 / eps).sin()),
            Coefficients::QuasiPeriodic { harmonics } => {
                scale
                    * harmonics
                        .iter()
                        .map(|h| {
                            let th = h.frequency * t0 / eps;
                            h.a * th.cos() - h.b * th.sin()
                        })
                        .sum::<f64>()
            }
        }
    }

    /// Splitting criterion: amplitude clears the floor plus the truncation estimate.
    pub fn verdict(&self, verdict_floor: f64) -> bool {
        self.amplitude() > verdict_floor + self.truncation_estimate
    }
}

/// Terms for one `k`: critical points, `q_k(target)` and their summands.
struct KTerm {
    points: Vec<CriticalPoint>,
    sum: Complex64,
    magnitude: f64,
    gamma: f64,
}

fn k_order(k_max: usize) -> Vec<i64> {
    (1..=k_max as i64).flat_map(|k| [-k, k]).collect()
}

/// Sum over `k` for one phase frequency `ν` (`ν = −1` for periodic forcing).
fn sum_for_frequency(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    nu: f64,
    m: Option<&[i32]>,
    ks: &[i64],
    eps: Option<f64>,
    floor: f64,
) -> Result<Vec<KTerm>> {
    ks.par_iter()
        .map(|&k| {
            let target = -nu / k as f64;
            let empty = KTerm { points: Vec::new(), sum: Complex64::new(0.0, 0.0), magnitude: 0.0, gamma: 0.0 };
            if target.abs() > orbit.max_speed() * (1.0 + 1e-9) {
                return Ok(empty);
            }
            let qk = fourier_coefficient(&sys.q, k, target)?;
            if qk == Complex64::new(0.0, 0.0) {
                return Ok(empty);
            }
            let mut term = empty;
            for (t, origin) in critical_points(orbit, target, k.unsigned_abs())? {
                let cp = classify(sys, orbit, k, m, nu, t, origin, floor)?;
                let c = contribution(&cp, qk, eps);
                term.sum += c;
                term.magnitude += c.norm();
                term.gamma = term.gamma.max(1.0 / (k.abs() as f64 * cp.f_star.abs()).sqrt());
                term.points.push(cp);
            }
            Ok(term)
        })
        .collect()
}

fn v_probes(orbit: &SeparatrixOrbit) -> Vec<f64> {
    let vmax = orbit.max_speed();
    (1..=4).flat_map(|j| [-vmax * j as f64 / 4.0, vmax * j as f64 / 4.0]).collect()
}

/// Smallest `K` with `C·M·K^{-7/2} < 1e-3 · envelope(K)`, capped.
fn choose_k(cm: f64, terms: &[KTerm], cap: usize) -> usize {
    let mut env = 0.0;
    for kk in 1..=cap {
        env += terms[2 * (kk - 1)].magnitude + terms[2 * (kk - 1) + 1].magnitude;
        if env > 0.0 && cm * (kk as f64).powf(-3.5) < 1e-3 * env {
            return kk;
        }
    }
    cap
}

/// Coefficients of the leading term for the system's forcing.
///
/// With the resolved convention the result belongs to the given `eps`;
/// with the printed convention `eps` is ignored.
pub fn splitting_coefficients(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    eps: f64,
    opts: &StphaseOptions,
) -> Result<SplittingCoefficients> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("epsilon must be positive, got {eps}")));
    }
    let eps_used = match opts.convention {
        PhaseConvention::Resolved => Some(eps),
        PhaseConvention::Printed => None,
    };
    let cap = opts.k_max.unwrap_or(opts.k_cap).max(1);
    let decay = decay_check(&sys.q, &v_probes(orbit), cap)?;
    let ks = k_order(cap);

    // (m, ν, F_m) per forcing harmonic; the periodic case is one term with ν = −1
    let mut channels: Vec<(Option<Vec<i32>>, f64, Complex64)> = Vec::new();
    match &sys.forcing {
        Forcing::Periodic => channels.push((None, -1.0, Complex64::new(1.0, 0.0))),
        Forcing::QuasiPeriodic { omega, harmonics } => {
            for h in harmonics {
                channels.push((Some(h.m.clone()), h.frequency(omega), h.f));
            }
        }
    }
    let printed_qp = opts.convention == PhaseConvention::Printed && channels[0].0.is_some();

    let mut per_channel = Vec::with_capacity(channels.len());
    for (m, nu, _) in &channels {
        let nu_eff = if printed_qp { -1.0 } else { *nu };
        per_channel.push(sum_for_frequency(sys, orbit, nu_eff, m.as_deref(), &ks, eps_used, opts.hypothesis_floor)?);
    }

    let k_used = match opts.k_max {
        Some(k) => k,
        None => {
            // pool magnitudes over channels, weighted by |F_m|
            let pooled: Vec<KTerm> = (0..ks.len())
                .map(|i| KTerm {
                    points: Vec::new(),
                    sum: Complex64::new(0.0, 0.0),
                    magnitude: channels.iter().zip(&per_channel).map(|((_, _, f), t)| f.norm() * t[i].magnitude).sum(),
                    gamma: 0.0,
                })
                .collect();
            choose_k(decay.cm_fit, &pooled, cap)
        }
    };
    let n_terms = 2 * k_used;

    let mut cps = Vec::new();
    let mut envelope = 0.0;
    let mut n_cp = 2usize;
    let mut gamma = orbit.lambda_minus().min(orbit.lambda_plus()).powf(-0.5);
    let mut sums = Vec::with_capacity(channels.len());
    for ((_, _, f), terms) in channels.iter().zip(&per_channel) {
        let mut s = Complex64::new(0.0, 0.0);
        for t in &terms[..n_terms] {
            s += t.sum;
            envelope += f.norm() * t.magnitude;
            n_cp = n_cp.max(t.points.len());
            gamma = gamma.max(t.gamma);
            cps.extend(t.points.iter().cloned());
        }
        sums.push(f * s);
    }
    let root2pi = (2.0 * PI).sqrt();
    let coefficients = match &sys.forcing {
        Forcing::Periodic => Coefficients::Periodic { a: root2pi * sums[0].re, b: root2pi * sums[0].im },
        Forcing::QuasiPeriodic { omega, harmonics } => Coefficients::QuasiPeriodic {
            harmonics: harmonics
                .iter()
                .zip(&sums)
                .map(|(h, s)| HarmonicCoefficients {
                    m: h.m.clone(),
                    frequency: h.frequency(omega),
                    forcing: [h.f.re, h.f.im],
                    a: root2pi * s.re,
                    b: root2pi * s.im,
                })
                .collect(),
        },
    };
    let nu_max = channels.iter().map(|c| c.1.abs()).fold(1.0, f64::max);
    let truncation_estimate =
        root2pi * sys.forcing.sup_norm() * nu_max * decay.cm_fit * n_cp as f64 * gamma * 2.0 * (k_used as f64).powi(-3)
            / 3.0;

    Ok(SplittingCoefficients {
        r: sys.r,
        epsilon: eps_used,
        convention: opts.convention,
        coefficients,
        k_max_used: k_used,
        truncation_estimate,
        envelope,
        critical_points: cps,
        decay,
    })
}
