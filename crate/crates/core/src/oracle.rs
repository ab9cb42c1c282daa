//! Brute-force references for the asymptotic coefficients: resolved
//! quadrature of the Melnikov integral, the true manifold displacement from
//! the stroboscopic map, and log-log scaling fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Forcing, SeparatrixOrbit, SystemSpec};
use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::ode::{self, Flow, StepControl};
use crate::quad::gauss_legendre;
use crate::roots::brent;

/// Panels summed sequentially inside one parallel work unit.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelnikovOptions {
    /// Tail cut: `λ|c|·‖q‖·e^{−λT} ≤ tail_tol · ε^{r+1/2}` on each side.
    pub tail_tol: f64,
    /// Panels are at most `ε / (panel_divisor · max(1, max|ν|))` wide.
    pub panel_divisor: f64,
    pub nodes: usize,
    /// Recompute with halved panels and compare.
    pub check_refinement: bool,
    /// Largest accepted change under halving, relative to the amplitude scale.
    pub refine_tol: f64,
    pub n_t0: usize,
}

impl Default for MelnikovOptions {
    fn default() -> Self {
        MelnikovOptions {
            tail_tol: 1e-4,
            panel_divisor: 8.0,
            nodes: 16,
            check_refinement: true,
            refine_tol: 1e-4,
            n_t0: 16,
        }
    }
}

/// Least-squares coefficients of `a cos(ν t0/ε) + b sin(ν t0/ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedHarmonic {
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub amplitude: f64,
    /// `atan2(b, a)`
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub epsilon: f64,
    pub t0_samples: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted: Vec<FittedHarmonic>,
    /// RMS of the fit residual.
    pub residual: f64,
    /// Relative change under panel halving (0 when not checked).
    pub refinement_delta: f64,
    /// Integration window `[−T₋, T₊]`.
    pub window: [f64; 2],
    pub panels: usize,
}

impl OracleResult {
    pub fn amplitude(&self) -> f64 {
        self.fitted.iter().map(|h| h.amplitude).fold(0.0, f64::max)
    }
}

/// Signed phase frequencies `ν` with their forcing weights.
fn channels(forcing: &Forcing) -> Vec<(f64, Complex64)> {
    match forcing {
        Forcing::Periodic => vec![(1.0, Complex64::new(0.5, 0.0)), (-1.0, Complex64::new(0.5, 0.0))],
        Forcing::QuasiPeriodic { omega, harmonics } => harmonics.iter().map(|h| (h.frequency(omega), h.f)).collect(),
    }
}

fn q_sup(sys: &SystemSpec, vmax: f64) -> Result<f64> {
    let mut s: f64 = 0.0;
    for i in 0..=8 {
        let v = vmax * (i as f64 / 4.0 - 1.0);
        for j in 0..64 {
            let xi = 2.0 * PI * (j as f64 + 0.5) / 64.0;
            s = s.max(sys.q_at(xi, v)?.abs());
        }
    }
    Ok(s)
}

/// Integration window and panel layout shared by all evaluations at one ε.
struct Layout {
    lo: f64,
    hi: f64,
    panels: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl Layout {
    fn new(sys: &SystemSpec, orbit: &SeparatrixOrbit, eps: f64, nu_max: f64, opts: &MelnikovOptions) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.1) {
            return Err(Error::Invalid(format!("Melnikov oracle needs 0 < epsilon <= 0.1, got {eps}")));
        }
        if opts.nodes < 12 || !(opts.panel_divisor >= 8.0) {
            return Err(Error::Invalid("quadrature needs >= 12 nodes and panels <= epsilon/8".into()));
        }
        let qs = q_sup(sys, orbit.max_speed())?;
        let target = opts.tail_tol * eps.powf(sys.r + 0.5);
        let cut = |lambda: f64, c: f64| {
            let num = lambda * c.abs() * qs;
            if num <= target {
                1.0
            } else {
                ((num / target).ln() / lambda).max(1.0)
            }
        };
        let lo = -cut(orbit.lambda_minus(), orbit.c_minus());
        let hi = cut(orbit.lambda_plus(), orbit.c_plus());
        let width = eps / (opts.panel_divisor * nu_max.max(1.0));
        let panels = ((hi - lo) / width).ceil() as usize;
        let (nodes, weights) = gauss_legendre(opts.nodes);
        Ok(Layout { lo, hi, panels, nodes, weights, scale: eps.sqrt() * qs * orbit.max_speed() })
    }

    fn refined(&self) -> Layout {
        Layout { panels: 2 * self.panels, nodes: self.nodes.clone(), weights: self.weights.clone(), ..*self }
    }

    /// `Σ_panels Σ_nodes w g(t)`, blocked so the summation order is fixed.
    fn sum<const N: usize, G>(&self, g: G) -> Result<[Complex64; N]>
    where
        G: Fn(f64) -> Result<[Complex64; N], EvalError> + Sync,
    {
        let h = (self.hi - self.lo) / self.panels as f64;
        let blocks = self.panels.div_ceil(BLOCK);
        let partial: Vec<[Complex64; N]> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = [Complex64::new(0.0, 0.0); N];
                for p in b * BLOCK..((b + 1) * BLOCK).min(self.panels) {
                    let mid = self.lo + (p as f64 + 0.5) * h;
                    for (x, w) in self.nodes.iter().zip(&self.weights) {
                        let val = g(mid + 0.5 * h * x)?;
                        for (a, v) in acc.iter_mut().zip(val) {
                            *a += 0.5 * h * w * v;
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_, EvalError>>()?;
        let mut total = [Complex64::new(0.0, 0.0); N];
        for p in partial {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        Ok(total)
    }
}

fn integrand(sys: &SystemSpec, orbit: &SeparatrixOrbit, eps: f64, t: f64) -> Result<f64, EvalError> {
    let p = orbit.eval(t);
    Ok(p.v * sys.q.eval(&[p.x / eps, p.v])?)
}

/// `ℳ(t0) = ε^r ∫ x0'(t) q(x0(t)/ε, x0'(t)) forcing((t + t0)/ε) dt`.
pub fn melnikov_direct(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    eps: f64,
    t0: f64,
    opts: &MelnikovOptions,
) -> Result<f64> {
    let nu_max = channels(&sys.forcing).iter().map(|c| c.0.abs()).fold(1.0, f64::max);
    let layout = Layout::new(sys, orbit, eps, nu_max, opts)?;
    let run = |l: &Layout| -> Result<f64> {
        let [s] = l.sum(|t| {
            let h = integrand(sys, orbit, eps, t)?;
            Ok([Complex64::new(h * sys.forcing.eval((t + t0) / eps), 0.0)])
        })?;
        Ok(s.re)
    };
    let value = run(&layout)?;
    if opts.check_refinement {
        let fine = run(&layout.refined())?;
        let delta = (fine - value).abs() / value.abs().max(layout.scale);
        if delta > opts.refine_tol {
            return Err(Error::Numerical(format!(
                "Melnikov quadrature not converged: panel halving changes the result by {delta:.2e} (relative)"
            )));
        }
    }
    Ok(eps.powf(sys.r) * value)
}

/// `∫ x0' q(x0/ε, x0') e^{iνt/ε} dt` for every forcing channel.
fn transforms(sys: &SystemSpec, orbit: &SeparatrixOrbit, eps: f64, nus: &[f64], l: &Layout) -> Result<Vec<Complex64>> {
    // channels come in ± pairs; integrate the distinct |ν| once and conjugate
    let mut pos: Vec<f64> = nus.iter().map(|n| n.abs()).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    let mut out_pos = Vec::with_capacity(pos.len());
    for &nu in &pos {
        let [s] = l.sum(|t| {
            let h = integrand(sys, orbit, eps, t)?;
            Ok([h * Complex64::from_polar(1.0, nu * t / eps)])
        })?;
        out_pos.push(s);
    }
    Ok(nus
        .iter()
        .map(|n| {
            let i = pos.iter().position(|p| *p == n.abs()).expect("frequency listed");
            if *n >= 0.0 {
                out_pos[i]
            } else {
                out_pos[i].conj()
            }
        })
        .collect())
}

/// Least squares of `values` on `cos(ν t0/ε), sin(ν t0/ε)` per frequency.
pub fn fit_harmonics(eps: f64, t0: &[f64], values: &[f64], nus: &[f64]) -> Result<(Vec<FittedHarmonic>, f64)> {
    let n = t0.len();
    let m = 2 * nus.len();
    if n < m {
        return Err(Error::Invalid(format!("{n} samples cannot determine {m} coefficients")));
    }
    let a = DMatrix::from_fn(n, m, |i, j| {
        let th = nus[j / 2] * t0[i] / eps;
        if j % 2 == 0 {
            th.cos()
        } else {
            th.sin()
        }
    });
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Numerical(format!(
            "rank-deficient harmonic fit (singular values {smin:.2e}..{smax:.2e}): resonant frequencies"
        )));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let r = &a * &x - &b;
    let residual = (r.norm_squared() / n as f64).sqrt();
    let fitted = nus
        .iter()
        .enumerate()
        .map(|(i, &nu)| {
            let (ca, cb) = (x[2 * i], x[2 * i + 1]);
            FittedHarmonic { nu, a: ca, b: cb, amplitude: ca.hypot(cb), phase: cb.atan2(ca) }
        })
        .collect();
    Ok((fitted, residual))
}

/// Sample `ℳ(t0)` uniformly over one period of the slowest forcing frequency
/// and fit each frequency's amplitude and phase.
pub fn melnikov_scan(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    eps: f64,
    opts: &MelnikovOptions,
) -> Result<OracleResult> {
    let freqs = sys.forcing.frequencies();
    if opts.n_t0 < 8 * freqs.len() {
        return Err(Error::Invalid(format!(
            "need at least 8 t0 samples per harmonic ({} harmonics), got {}",
            freqs.len(),
            opts.n_t0
        )));
    }
    let chans = channels(&sys.forcing);
    let nus: Vec<f64> = chans.iter().map(|c| c.0).collect();
    let nu_max = nus.iter().map(|n| n.abs()).fold(1.0, f64::max);
    let layout = Layout::new(sys, orbit, eps, nu_max, opts)?;
    let transform = transforms(sys, orbit, eps, &nus, &layout)?;

    let mut refinement_delta = 0.0;
    if opts.check_refinement {
        let fine = transforms(sys, orbit, eps, &nus, &layout.refined())?;
        for (c, f) in transform.iter().zip(&fine) {
            let d = (c - f).norm() / c.norm().max(layout.scale);
            refinement_delta = f64::max(refinement_delta, d);
        }
        if refinement_delta > opts.refine_tol {
            return Err(Error::Numerical(format!(
                "Melnikov quadrature not converged: panel halving changes the result by {refinement_delta:.2e} (relative)"
            )));
        }
    }

    let span = 2.0 * PI * eps / freqs[0];
    let scale = eps.powf(sys.r);
    let t0: Vec<f64> = (0..opts.n_t0).map(|i| span * i as f64 / opts.n_t0 as f64).collect();
    let values: Vec<f64> = t0
        .iter()
        .map(|&s| {
            scale
                * chans
                    .iter()
                    .zip(&transform)
                    .map(|((nu, f), i)| (f * Complex64::from_polar(1.0, nu * s / eps) * i).re)
                    .sum::<f64>()
        })
        .collect();
    let (fitted, residual) = fit_harmonics(eps, &t0, &values, &freqs)?;
    Ok(OracleResult {
        epsilon: eps,
        t0_samples: t0,
        values,
        fitted,
        residual,
        refinement_delta,
        window: [layout.lo, layout.hi],
        panels: layout.panels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplacementOptions {
    pub rtol: f64,
    pub atol: f64,
    pub fd_step: f64,
    pub seed_offset: f64,
    pub fixed_point_tol: f64,
    pub crossing_tol: f64,
    /// Feasible `[ε_min, ε_max]`.
    pub window: [f64; 2],
    /// Manifolds leaving `|x − x_mid| > box_x` or `|v| > box_v` are an error.
    pub box_x: f64,
    pub box_v: f64,
}

impl Default for DisplacementOptions {
    fn default() -> Self {
        DisplacementOptions {
            rtol: 1e-13,
            atol: 1e-16,
            fd_step: 1e-7,
            seed_offset: 1e-7,
            fixed_point_tol: 1e-11,
            crossing_tol: 1e-10,
            window: [5e-3, 5e-2],
            box_x: 20.0,
            box_v: 20.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DisplacementResult {
    pub epsilon: f64,
    pub t0: f64,
    pub d_value: f64,
    /// `Z = z0(0)`
    pub section_point: [f64; 2],
    /// unit vector along `(−f(x0(0)), x0'(0))`
    pub section_direction: [f64; 2],
    pub alpha: f64,
    /// Fixed points of the period map near the two ends of the connection.
    pub fixed_point: [f64; 2],
    pub fixed_point_stable: [f64; 2],
    pub newton_residual: f64,
    pub unstable_crossing: [f64; 2],
    pub stable_crossing: [f64; 2],
    /// Distance of the reported crossings from the section.
    pub crossing_residual: f64,
    /// Same, for the trajectories found by root finding before the final
    /// slide along the manifold.
    pub root_residual: f64,
}

struct Perturbed<'a> {
    sys: &'a SystemSpec,
    eps: f64,
    amp: f64,
    ctl: StepControl,
}

impl Perturbed<'_> {
    fn rhs(&self, t: f64, y: &[f64; 2]) -> Result<[f64; 2], EvalError> {
        let f = self.sys.f.eval(&[y[0]])?;
        let q = self.sys.q.eval(&[y[0] / self.eps, y[1]])?;
        Ok([y[1], f + self.amp * q * self.sys.forcing.eval(t / self.eps)])
    }

    fn flow(&self, t0: f64, z: [f64; 2], t1: f64) -> Result<[f64; 2]> {
        Ok(ode::flow(|t, y| self.rhs(t, y), t0, z, t1, &self.ctl)?)
    }

    /// Flow that fails once the state leaves the box around the connection.
    /// The state is carried as the deviation from `base` so that the tiny
    /// seed offsets keep full relative precision.
    #[allow(clippy::too_many_arguments)]
    fn flow_boxed(
        &self,
        t0: f64,
        base: [f64; 2],
        dz: [f64; 2],
        t1: f64,
        mid: f64,
        bx: f64,
        bv: f64,
    ) -> Result<[f64; 2]> {
        let mut escaped = false;
        let rhs = |t: f64, w: &[f64; 2]| self.rhs(t, &[base[0] + w[0], base[1] + w[1]]);
        let (t, w) = ode::integrate(rhs, t0, dz, t1, &self.ctl, |s| {
            if (base[0] + s.y[0] - mid).abs() > bx || (base[1] + s.y[1]).abs() > bv {
                escaped = true;
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        if escaped {
            return Err(Error::Numerical(format!(
                "manifold left the bounding box at t = {t} before reaching the section"
            )));
        }
        Ok([base[0] + w[0], base[1] + w[1]])
    }

    /// Fixed point of the period map `t0 → t0 + T` by Newton with a
    /// central-difference Jacobian. Returns the point, `DP` there and the residual.
    fn fixed_point(&self, t0: f64, guess: [f64; 2], h: f64, tol: f64) -> Result<([f64; 2], Matrix2<f64>, f64)> {
        let period = 2.0 * PI * self.eps;
        let p = |z: [f64; 2]| self.flow(t0, z, t0 + period);
        let jac = |z: [f64; 2]| -> Result<Matrix2<f64>> {
            let mut j = Matrix2::zeros();
            for c in 0..2 {
                let (mut a, mut b) = (z, z);
                a[c] += h;
                b[c] -= h;
                let (pa, pb) = (p(a)?, p(b)?);
                for r in 0..2 {
                    j[(r, c)] = (pa[r] - pb[r]) / (2.0 * h);
                }
            }
            Ok(j)
        };
        let mut z = guess;
        let mut res = f64::INFINITY;
        for _ in 0..30 {
            let pz = p(z)?;
            let r = Vector2::new(pz[0] - z[0], pz[1] - z[1]);
            res = r.amax();
            if res <= tol {
                return Ok((z, jac(z)?, res));
            }
            let j = jac(z)? - Matrix2::identity();
            let dz =
                j.lu().solve(&(-r)).ok_or_else(|| Error::Numerical("singular Jacobian in period-map Newton".into()))?;
            z = [z[0] + dz[0], z[1] + dz[1]];
            if !(z[0].is_finite() && z[1].is_finite()) {
                break;
            }
        }
        Err(Error::Numerical(format!("period-map fixed point did not converge (|P(z) - z| = {res:.2e} > {tol:.0e})")))
    }
}

/// Eigenvector of a 2×2 matrix for the real eigenvalue `mu`, unit length.
fn eigvec(j: &Matrix2<f64>, mu: f64) -> [f64; 2] {
    let a = [j[(0, 1)], mu - j[(0, 0)]];
    let b = [mu - j[(1, 1)], j[(1, 0)]];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn eigen(j: &Matrix2<f64>) -> Result<(f64, f64)> {
    let tr = j.trace();
    let det = j.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc <= 0.0 {
        return Err(Error::Numerical("period map fixed point is not hyperbolic".into()));
    }
    let s = disc.sqrt();
    let (hi, lo) = (tr / 2.0 + s, tr / 2.0 - s);
    if !(hi > 1.0 && lo.abs() < 1.0) {
        return Err(Error::Numerical(format!("period map eigenvalues {lo}, {hi} are not a saddle pair")));
    }
    Ok((hi, lo))
}

/// True displacement `𝒟(t0) = α n̂·(Z_u − Z_s)` between the first
/// crossings of the perturbed unstable and stable manifolds with the section
/// through `Z = z0(0)` along `(−f(x0(0)), x0'(0))`.
pub fn displacement_direct(
    sys: &SystemSpec,
    orbit: &SeparatrixOrbit,
    eps: f64,
    t0: f64,
    opts: &DisplacementOptions,
) -> Result<DisplacementResult> {
    if sys.forcing != Forcing::Periodic {
        return Err(Error::Invalid("the displacement oracle needs periodic forcing".into()));
    }
    if !(eps >= opts.window[0] && eps <= opts.window[1]) {
        return Err(Error::Invalid(format!(
            "epsilon = {eps} outside the feasible window [{}, {}] of the displacement oracle",
            opts.window[0], opts.window[1]
        )));
    }
    let pert = Perturbed {
        sys,
        eps,
        amp: eps.powf(sys.r),
        ctl: StepControl { rtol: opts.rtol, atol: opts.atol, h_max: eps, ..StepControl::default() },
    };
    let period = 2.0 * PI * eps;

    let z0 = orbit.eval(0.0);
    let f0 = sys.f_at(z0.x)?;
    let alpha = z0.v.hypot(f0);
    let normal = [-f0 / alpha, z0.v / alpha];
    let tangent = [z0.v / alpha, f0 / alpha];
    let tcoord = |z: [f64; 2]| tangent[0] * (z[0] - z0.x) + tangent[1] * (z[1] - z0.v);
    let mid = 0.5 * (orbit.x_limit_minus() + orbit.x_limit_plus());

    let (pu, ju, res_u) = pert.fixed_point(t0, [orbit.x_limit_minus(), 0.0], opts.fd_step, opts.fixed_point_tol)?;
    let (ps, js, res_s) = pert.fixed_point(t0, [orbit.x_limit_plus(), 0.0], opts.fd_step, opts.fixed_point_tol)?;
    let (mu_u, _) = eigen(&ju)?;
    let (_, mu_s) = eigen(&js)?;

    // orient eigenvectors toward the connection
    let mut eu = eigvec(&ju, mu_u);
    if eu[0] * orbit.c_minus() < 0.0 {
        eu = [-eu[0], -eu[1]];
    }
    let mut es = eigvec(&js, mu_s);
    if es[0] * orbit.c_plus() > 0.0 {
        es = [-es[0], -es[1]];
    }

    // one side of the section: seed δ along e, flow n periods to t0
    let shoot = |p: [f64; 2], e: [f64; 2], lambda: f64, c: f64, ratio: f64, forward: bool| -> Result<([f64; 2], f64)> {
        let reach = c.abs() * (1.0 + lambda * lambda).sqrt();
        let n = ((reach / opts.seed_offset).ln() / (lambda * period)).ceil().max(1.0);
        let t_start = if forward { t0 - n * period } else { t0 + n * period };
        let nominal = reach * (-lambda * n * period).exp();
        let g = |d: f64| -> Result<f64, String> {
            pert.flow_boxed(t_start, p, [d * e[0], d * e[1]], t0, mid, opts.box_x, opts.box_v)
                .map(tcoord)
                .map_err(|e| e.to_string())
        };
        let (mut a, mut b) = (nominal / ratio.sqrt(), nominal * ratio.sqrt());
        let mut ga = g(a).map_err(Error::Numerical)?;
        let mut gb = g(b).map_err(Error::Numerical)?;
        for _ in 0..4 {
            if ga * gb <= 0.0 {
                break;
            }
            a /= ratio.sqrt();
            b *= ratio.sqrt();
            ga = g(a).map_err(Error::Numerical)?;
            gb = g(b).map_err(Error::Numerical)?;
        }
        if ga * gb > 0.0 {
            return Err(Error::Numerical("manifold does not cross the section transversally".into()));
        }
        let d = brent(g, a, b, 1e-15 * nominal)?;
        let at = |d: f64| pert.flow_boxed(t_start, p, [d * e[0], d * e[1]], t0, mid, opts.box_x, opts.box_v);
        let z = at(d)?;
        // slide along the manifold slice onto the section; the slice tangent
        // comes from a neighbouring seed, the error is quadratic in the offset
        let z2 = at(d * 1.001)?;
        let tan = [z2[0] - z[0], z2[1] - z[1]];
        let along = tangent[0] * tan[0] + tangent[1] * tan[1];
        if along.abs() < 1e-3 * tan[0].hypot(tan[1]) {
            return Err(Error::Numerical("manifold is tangent to the section".into()));
        }
        let raw = tcoord(z);
        let s = raw / along;
        Ok(([z[0] - s * tan[0], z[1] - s * tan[1]], raw.abs()))
    };

    let (zu, raw_u) = shoot(pu, eu, orbit.lambda_minus(), orbit.c_minus(), mu_u, true)?;
    let (zs, raw_s) = shoot(ps, es, orbit.lambda_plus(), orbit.c_plus(), 1.0 / mu_s, false)?;
    let root_residual = raw_u.max(raw_s);
    let crossing_residual = tcoord(zu).abs().max(tcoord(zs).abs());
    if crossing_residual > opts.crossing_tol || root_residual > 1e4 * opts.crossing_tol {
        return Err(Error::Numerical(format!(
            "section crossing located only to {:.2e}",
            crossing_residual.max(root_residual)
        )));
    }
    let d_value = alpha * (normal[0] * (zu[0] - zs[0]) + normal[1] * (zu[1] - zs[1]));
    Ok(DisplacementResult {
        epsilon: eps,
        t0,
        d_value,
        section_point: [z0.x, z0.v],
        section_direction: normal,
        alpha,
        fixed_point: pu,
        fixed_point_stable: ps,
        newton_residual: res_u.max(res_s),
        unstable_crossing: zu,
        stable_crossing: zs,
        crossing_residual,
        root_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// `log(amplitude) − (intercept + slope·log ε)` per point.
    pub residuals: Vec<f64>,
}

/// Least-squares line through `(log ε, log amplitude)`.
pub fn epsilon_scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!("scaling fit needs >= 3 epsilons, got {}", points.len())));
    }
    let (emin, emax) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    if !(emax >= 4.0 * emin) {
        return Err(Error::Invalid(format!("epsilons must span a factor >= 4 (got {emin}..{emax})")));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Invalid(format!("non-positive point {p:?} in scaling fit")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    Ok(ScalingFit { slope, intercept, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{compute_separatrix, find_saddle, Branch, OrbitOptions};

    fn pendulum(q: &str, r: f64) -> (SystemSpec, SeparatrixOrbit) {
        let sys = SystemSpec::new("sin(x)", q, r, Forcing::Periodic).unwrap();
        let eq = find_saddle(&sys, 0.1).unwrap();
        let o = compute_separatrix(&sys, &eq, Branch::Plus, &OrbitOptions::default()).unwrap();
        (sys, o)
    }

    #[test]
    fn synthetic_fit_is_exact() {
        let eps = 0.01;
        let t0: Vec<f64> = (0..16).map(|i| 2.0 * PI * eps * i as f64 / 16.0).collect();
        let vals: Vec<f64> = t0.iter().map(|t| 0.3 * (t / eps).cos() - 1.7 * (t / eps).sin()).collect();
        let (h, res) = fit_harmonics(eps, &t0, &vals, &[1.0]).unwrap();
        assert!((h[0].a - 0.3).abs() < 1e-13 && (h[0].b + 1.7).abs() < 1e-13);
        assert!(res < 1e-13);
        assert!(fit_harmonics(eps, &t0, &vals, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn scaling_fit_recovers_power() {
        let pts: Vec<(f64, f64)> = [0.02f64, 0.01, 0.005, 0.0025].iter().map(|&e| (e, 7.0 * e.powf(3.1))).collect();
        let fit = epsilon_scaling_fit(&pts).unwrap();
        assert!((fit.slope - 3.1).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
        assert!(epsilon_scaling_fit(&pts[..2]).is_err());
        assert!(epsilon_scaling_fit(&[(0.01, 1.0), (0.012, 1.0), (0.014, 1.0)]).is_err());
    }

    #[test]
    fn scan_matches_direct_and_has_zero_mean() {
        let (sys, o) = pendulum("2*sin(xi)", 2.6);
        let eps = 0.02;
        let opts = MelnikovOptions::default();
        let scan = melnikov_scan(&sys, &o, eps, &opts).unwrap();
        assert!(scan.refinement_delta < 1e-6);
        let fast = MelnikovOptions { check_refinement: false, ..opts };
        for i in [0, 5] {
            let m = melnikov_direct(&sys, &o, eps, scan.t0_samples[i], &fast).unwrap();
            assert!((m - scan.values[i]).abs() <= 1e-9 * scan.amplitude(), "{m} vs {}", scan.values[i]);
        }
        let mean = scan.values.iter().sum::<f64>() / scan.values.len() as f64;
        assert!(mean.abs() <= 1e-12 * scan.amplitude());
        assert!(scan.residual <= 1e-10 * scan.amplitude());
    }

    #[test]
    fn unperturbed_displacement_vanishes() {
        let (sys, o) = pendulum("0*xi", 3.0);
        let d = displacement_direct(&sys, &o, 0.05, 0.0, &DisplacementOptions::default()).unwrap();
        assert!(d.d_value.abs() < 1e-10, "{}", d.d_value);
        assert!(d.newton_residual <= 1e-11);
    }

    #[test]
    fn displacement_is_period_in_t0() {
        let (sys, o) = pendulum("2*sin(xi)", 3.0);
        let eps = 0.05;
        let opts = DisplacementOptions::default();
        let a = displacement_direct(&sys, &o, eps, 0.1, &opts).unwrap();
        let b = displacement_direct(&sys, &o, eps, 0.1 + 2.0 * PI * eps, &opts).unwrap();
        assert!((a.d_value - b.d_value).abs() <= 1e-12, "{} {}", a.d_value, b.d_value);
        let m = melnikov_direct(&sys, &o, eps, 0.1, &MelnikovOptions::default()).unwrap();
        assert!((a.d_value - m).abs() < 0.1 * m.abs().max(eps.powf(3.5)), "{} vs {m}", a.d_value);
    }

    #[test]
    fn displacement_rejects_small_epsilon() {
        let (sys, o) = pendulum("2*sin(xi)", 3.0);
        assert!(displacement_direct(&sys, &o, 1e-3, 0.0, &DisplacementOptions::default()).is_err());
    }
}
