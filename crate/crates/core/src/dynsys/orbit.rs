use serde::{Deserialize, Serialize};

use super::hermite::{quintic, Jet};
use super::{find_saddle, Equilibrium, SystemSpec};
use crate::error::{Error, Result};
use crate::ode::{integrate, Flow, StepControl};
use crate::quad::gauss_legendre;
use crate::roots::brent;

/// Which half of the unstable eigendirection to launch along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// How `t = 0` is placed on the connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOrigin {
    /// Maximum of `|x'|`, used when `x'` keeps one sign.
    MaxSpeed,
    /// Zero of `x'`, used for loops that turn around.
    TurningPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitOptions {
    /// Launch offset along the unit unstable eigenvector.
    pub delta: f64,
    /// Integration stops once within this distance of the arrival saddle.
    pub stop_radius: f64,
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Bounding box half-width around the launch saddle.
    pub bound: f64,
    pub time_budget: f64,
    pub energy_tol: f64,
    /// Speed below which the fitted tail takes over.
    pub speed_floor: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            delta: 1e-8,
            stop_radius: 1e-6,
            rtol: 1e-12,
            atol: 1e-14,
            h_max: 0.02,
            bound: 1e3,
            time_budget: 500.0,
            energy_tol: 1e-9,
            speed_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPoint {
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// Saddle connection `x0(t)` with dense output and exponential tails
/// `x0 ≈ x_limit_minus + c_minus e^{λt}` (t → −∞),
/// `x0 ≈ x_limit_plus − c_plus e^{−λt}` (t → +∞).
#[derive(Debug, Clone)]
pub struct SeparatrixOrbit {
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    j: Vec<f64>,
    lambda_minus: f64,
    lambda_plus: f64,
    c_minus: f64,
    c_plus: f64,
    x_limit_minus: f64,
    x_limit_plus: f64,
    origin: TimeOrigin,
    energy_drift: f64,
    tail_residual: [f64; 2],
    max_speed: f64,
}

/// Result of the exponential tail fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub c_plus: f64,
    pub c_minus: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

const TAIL_HI: f64 = 1e-4;
const TAIL_LO: f64 = 1e-10;
const TAIL_STEP: f64 = 0.05;

impl SeparatrixOrbit {
    pub fn lambda(&self) -> f64 {
        self.lambda_minus
    }
    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }
    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }
    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }
    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }
    pub fn x_limit_minus(&self) -> f64 {
        self.x_limit_minus
    }
    pub fn x_limit_plus(&self) -> f64 {
        self.x_limit_plus
    }
    pub fn time_origin(&self) -> TimeOrigin {
        self.origin
    }
    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }
    pub fn tail_residuals(&self) -> [f64; 2] {
        self.tail_residual
    }
    /// `max |x0'|`
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }
    /// Start of the dense range; the fitted tail is used before it.
    pub fn t_min(&self) -> f64 {
        self.t[0]
    }
    /// End of the dense range; the fitted tail is used after it.
    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }
    /// Sample times of the dense representation.
    pub fn times(&self) -> &[f64] {
        &self.t
    }
    /// Stored samples `(t, x, v)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.t.len()).map(|i| (self.t[i], self.x[i], self.v[i]))
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `(x0, x0', x0'')` at time `t`; the fitted tails are used outside the dense range.
    pub fn eval(&self, t: f64) -> OrbitPoint {
        let n = self.t.len();
        if t < self.t[0] {
            let e = (self.lambda_minus * t).exp();
            let l = self.lambda_minus;
            return OrbitPoint {
                x: self.x_limit_minus + self.c_minus * e,
                v: l * self.c_minus * e,
                a: l * l * self.c_minus * e,
            };
        }
        if t > self.t[n - 1] {
            let e = (-self.lambda_plus * t).exp();
            let l = self.lambda_plus;
            return OrbitPoint {
                x: self.x_limit_plus - self.c_plus * e,
                v: l * self.c_plus * e,
                a: -l * l * self.c_plus * e,
            };
        }
        let i = match self.t.partition_point(|&s| s <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (x, _) = quintic(
            Jet { p: self.x[i], d1: self.v[i], d2: self.a[i] },
            Jet { p: self.x[i + 1], d1: self.v[i + 1], d2: self.a[i + 1] },
            h,
            s,
        );
        let (v, a) = quintic(
            Jet { p: self.v[i], d1: self.a[i], d2: self.j[i] },
            Jet { p: self.v[i + 1], d1: self.a[i + 1], d2: self.j[i + 1] },
            h,
            s,
        );
        OrbitPoint { x, v, a }
    }

    /// The same curve with the time origin moved forward by `s`:
    /// the new orbit satisfies `x̃(t) = x(t + s)`.
    pub fn shifted_time(&self, s: f64) -> SeparatrixOrbit {
        let mut o = self.clone();
        for t in &mut o.t {
            *t -= s;
        }
        o.c_plus *= (-self.lambda_plus * s).exp();
        o.c_minus *= (self.lambda_minus * s).exp();
        o
    }

    /// The same curve translated in position by `d`.
    pub fn shifted_position(&self, d: f64) -> SeparatrixOrbit {
        let mut o = self.clone();
        for x in &mut o.x {
            *x += d;
        }
        o.x_limit_minus += d;
        o.x_limit_plus += d;
        o
    }
}

/// Raw samples with the derivative data needed by the quintic interpolants.
#[derive(Debug, Clone, Default)]
struct Samples {
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    j: Vec<f64>,
}

impl Samples {
    fn push(&mut self, sys: &SystemSpec, t: f64, x: f64, v: f64) -> Result<()> {
        self.t.push(t);
        self.x.push(x);
        self.v.push(v);
        self.a.push(sys.f_at(x)?);
        self.j.push(sys.df_at(x)? * v);
        Ok(())
    }

    /// Interpolate inside the sample range (times ascending or descending).
    fn dense(&self, t: f64) -> OrbitPoint {
        let n = self.t.len();
        let asc = self.t[n - 1] >= self.t[0];
        let k = if asc { self.t.partition_point(|&s| s <= t) } else { self.t.partition_point(|&s| s >= t) };
        let i = k.clamp(1, n - 1) - 1;
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (x, _) = quintic(
            Jet { p: self.x[i], d1: self.v[i], d2: self.a[i] },
            Jet { p: self.x[i + 1], d1: self.v[i + 1], d2: self.a[i + 1] },
            h,
            s,
        );
        let (v, a) = quintic(
            Jet { p: self.v[i], d1: self.a[i], d2: self.j[i] },
            Jet { p: self.v[i + 1], d1: self.a[i + 1], d2: self.j[i + 1] },
            h,
            s,
        );
        OrbitPoint { x, v, a }
    }
}

enum Event {
    /// `x'` changes sign
    Turn,
    /// `f(x)` changes sign near the given position
    Extremum(f64),
}

/// Integrate from `y0` (forward or backward in time) and record samples,
/// stopping after `stop` says so or on leaving the box.
fn shoot(
    sys: &SystemSpec,
    y0: [f64; 2],
    backward: bool,
    opts: &OrbitOptions,
    center: f64,
    mut stop: impl FnMut(&Samples) -> Result<bool>,
) -> Result<Samples> {
    let ctl = StepControl { rtol: opts.rtol, atol: opts.atol, h_max: opts.h_max, h_init: None, max_steps: 50_000_000 };
    let t_end = if backward { -opts.time_budget } else { opts.time_budget };
    let mut out = Samples::default();
    let mut failure: Option<Error> = None;
    let mut escaped = false;
    let mut done = false;
    integrate(
        |_, y: &[f64; 2]| Ok([y[1], sys.f.eval(&[y[0]])?]),
        0.0,
        y0,
        t_end,
        &ctl,
        |step| {
            let (x, v) = (step.y[0], step.y[1]);
            if let Err(e) = out.push(sys, step.t, x, v) {
                failure = Some(e);
                return Flow::Stop;
            }
            if (x - center).abs() > opts.bound || v.abs() > opts.bound {
                escaped = true;
                return Flow::Stop;
            }
            match stop(&out) {
                Ok(true) => {
                    done = true;
                    Flow::Stop
                }
                Ok(false) => Flow::Continue,
                Err(e) => {
                    failure = Some(e);
                    Flow::Stop
                }
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    if escaped {
        return Err(Error::Numerical(format!(
            "orbit left the bounding box |x - x_e|, |v| <= {} (no saddle connection)",
            opts.bound
        )));
    }
    if !done {
        return Err(Error::Numerical(format!("no return to a saddle within the time budget {}", opts.time_budget)));
    }
    Ok(out)
}

fn event_value(ev: &Event, p: &OrbitPoint) -> f64 {
    match ev {
        Event::Turn => p.v,
        Event::Extremum(_) => p.a,
    }
}

/// Time of the event inside the last sample interval.
fn locate_event(s: &Samples, ev: &Event) -> Result<f64> {
    let n = s.t.len();
    let (lo, hi) = (s.t[n - 2], s.t[n - 1]);
    Ok(brent(|t| Ok(event_value(ev, &s.dense(t))), lo, hi, 1e-15)?)
}

fn event_crossed(s: &Samples, ev: &Event, sign0: f64) -> bool {
    let n = s.t.len();
    if n < 2 {
        return false;
    }
    match ev {
        Event::Turn => s.v[n - 1] * sign0 <= 0.0,
        Event::Extremum(xo) => {
            let (x1, x2) = (s.x[n - 2], s.x[n - 1]);
            s.a[n - 1].signum() != s.a[n - 2].signum() && x1.min(x2) - 1e-6 <= *xo && *xo <= x1.max(x2) + 1e-6
        }
    }
}

/// Integrate the connection leaving `eq` along `branch` of its unstable manifold.
///
/// The unstable half is shot forward from the launch saddle and the stable
/// half backward from the arrival saddle; the halves are joined at the time
/// origin, so neither passes close to a saddle against the flow.
pub fn compute_separatrix(
    sys: &SystemSpec,
    eq: &Equilibrium,
    branch: Branch,
    opts: &OrbitOptions,
) -> Result<SeparatrixOrbit> {
    let lam = eq.lambda;
    let s = branch.sign();
    let norm = (1.0 + lam * lam).sqrt();
    let y0 = [eq.x_e + s * opts.delta / norm, s * lam * opts.delta / norm];

    // discovery run: find the arrival saddle and the time-origin event
    let mut departed = false;
    let mut arrival = None;
    let disc = shoot(sys, y0, false, opts, eq.x_e, |smp| {
        let n = smp.t.len();
        let (x, v, fx) = (smp.x[n - 1], smp.v[n - 1], smp.a[n - 1]);
        if !departed {
            departed = (x - eq.x_e).hypot(v) > 1e-2;
            return Ok(false);
        }
        if v.abs() + fx.abs() < 1e-3 {
            if let Some(z) = locate_saddle(sys, x)? {
                if (x - z).hypot(v) <= 1e-3 {
                    arrival = Some(z);
                    return Ok(true);
                }
            }
        }
        Ok(false)
    })?;
    let x_arr = arrival.expect("shoot returns only after arrival");
    let arrival_eq = find_saddle(sys, x_arr)?;
    let shift = arrival_eq.x_e - eq.x_e;
    let heteroclinic = shift.abs() > 1e-8;
    if heteroclinic && !is_period_of(sys, eq.x_e, shift)? {
        return Err(Error::Hypothesis(format!(
            "the connection joins distinct saddles x = {} and x = {} that are not related by a period of f",
            eq.x_e, arrival_eq.x_e
        )));
    }
    let x_lim_plus = if heteroclinic { arrival_eq.x_e } else { eq.x_e };
    let lam_p = arrival_eq.lambda;

    // time-origin event on the discovery run
    let (origin, ev) = match disc.v.iter().position(|w| w * s < 0.0) {
        Some(_) => (TimeOrigin::TurningPoint, Event::Turn),
        None => {
            let k = (0..disc.v.len()).max_by(|&p, &q| disc.v[p].abs().total_cmp(&disc.v[q].abs())).unwrap();
            (TimeOrigin::MaxSpeed, Event::Extremum(disc.x[k]))
        }
    };
    let fwd = shoot(sys, y0, false, opts, eq.x_e, |smp| Ok(event_crossed(smp, &ev, s)))?;
    let t_o = locate_event(&fwd, &ev)?;
    let glue = fwd.dense(t_o);
    let ev = match ev {
        Event::Extremum(_) => Event::Extremum(glue.x),
        e => e,
    };

    // stable half, shot backward from the arrival saddle
    let (xl, vl) = (*disc.x.last().unwrap(), *disc.v.last().unwrap());
    let side = ((xl - x_lim_plus) - vl / lam_p).signum();
    let norm_p = (1.0 + lam_p * lam_p).sqrt();
    let y1 = [x_lim_plus + side * opts.delta / norm_p, -side * lam_p * opts.delta / norm_p];
    let bwd = shoot(sys, y1, true, opts, eq.x_e, |smp| Ok(event_crossed(smp, &ev, y1[1].signum())))?;
    let tau_o = locate_event(&bwd, &ev)?;

    // assemble on a common clock with the event at t = 0
    let mut out = Samples::default();
    {
        let u0 = y0[0] - eq.x_e;
        let v0 = y0[1];
        let tau_end = (0.5 * opts.speed_floor / v0.abs()).ln() / lam;
        let n = (tau_end.abs() / TAIL_STEP).ceil() as usize;
        for k in (1..=n).rev() {
            let tau = -(k as f64) * TAIL_STEP;
            let e = (lam * tau).exp();
            out.push(sys, tau - t_o, eq.x_e + u0 * e, v0 * e)?;
        }
    }
    for i in 0..fwd.t.len() {
        if fwd.t[i] < t_o - 1e-9 {
            out.push(sys, fwd.t[i] - t_o, fwd.x[i], fwd.v[i])?;
        }
    }
    out.push(sys, 0.0, glue.x, glue.v)?;
    for i in (0..bwd.t.len()).rev() {
        if bwd.t[i] > tau_o + 1e-9 {
            out.push(sys, bwd.t[i] - tau_o, bwd.x[i], bwd.v[i])?;
        }
    }
    {
        let t_last = -tau_o;
        let u0 = y1[0] - x_lim_plus;
        let v0 = y1[1];
        let tau_end = (v0.abs() / (0.5 * opts.speed_floor)).ln() / lam_p;
        let n = (tau_end / TAIL_STEP).ceil().max(1.0) as usize;
        for k in 1..=n {
            let tau = k as f64 * TAIL_STEP;
            let e = (-lam_p * tau).exp();
            out.push(sys, t_last + tau, x_lim_plus + u0 * e, v0 * e)?;
        }
    }

    let mut orbit = SeparatrixOrbit {
        t: out.t,
        x: out.x,
        v: out.v,
        a: out.a,
        j: out.j,
        lambda_minus: lam,
        lambda_plus: lam_p,
        c_minus: 0.0,
        c_plus: 0.0,
        x_limit_minus: eq.x_e,
        x_limit_plus: x_lim_plus,
        origin,
        energy_drift: 0.0,
        tail_residual: [0.0; 2],
        max_speed: 0.0,
    };
    orbit.max_speed = speed_maximum(&orbit);

    orbit.energy_drift = energy_drift(sys, &orbit)?;
    if orbit.energy_drift > opts.energy_tol {
        return Err(Error::Numerical(format!(
            "energy drift {:.3e} exceeds tolerance {:.1e}",
            orbit.energy_drift, opts.energy_tol
        )));
    }

    let fit = fit_tail_constants(&orbit)?;
    orbit.c_plus = fit.c_plus;
    orbit.c_minus = fit.c_minus;
    orbit.tail_residual = [fit.residual_minus, fit.residual_plus];

    trim_to_speed_floor(&mut orbit, opts.speed_floor);
    Ok(orbit)
}

/// `max |x0'|`, refined at zeros of `f(x0(t))` next to the largest sample.
fn speed_maximum(orbit: &SeparatrixOrbit) -> f64 {
    let n = orbit.t.len();
    let k = (0..n).max_by(|&p, &q| orbit.v[p].abs().total_cmp(&orbit.v[q].abs())).unwrap();
    let mut best = orbit.v[k].abs();
    for (lo, hi) in [(k.saturating_sub(1), k), (k, (k + 1).min(n - 1))] {
        if lo == hi {
            continue;
        }
        if let Ok(tm) = brent(|tt| Ok(orbit.eval(tt).a), orbit.t[lo], orbit.t[hi], 1e-15) {
            best = best.max(orbit.eval(tm).v.abs());
        }
    }
    best
}

/// Newton from `x` toward a nearby zero of `f`; `Some` only for a saddle.
fn locate_saddle(sys: &SystemSpec, x: f64) -> Result<Option<f64>> {
    let mut z = x;
    for _ in 0..30 {
        let fz = sys.f_at(z)?;
        let dz = sys.df_at(z)?;
        if dz <= 0.0 {
            return Ok(None);
        }
        let step = fz / dz;
        z -= step;
        if step.abs() <= 1e-15 * (1.0 + z.abs()) {
            break;
        }
    }
    if sys.f_at(z)?.abs() > 1e-12 || (z - x).abs() > 1e-2 || sys.df_at(z)? <= 0.0 {
        return Ok(None);
    }
    Ok(Some(z))
}

fn is_period_of(sys: &SystemSpec, x0: f64, p: f64) -> Result<bool> {
    for i in 0..32 {
        let x = x0 + p * (i as f64 + 0.37) / 32.0;
        let (a, b) = (sys.f_at(x)?, sys.f_at(x + p)?);
        if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `max |E(t) − E(t_0)| / (1 + |E(t_0)|)` with `E = v²/2 + V(x)`, `V' = −f`.
fn energy_drift(sys: &SystemSpec, orbit: &SeparatrixOrbit) -> Result<f64> {
    let (gx, gw) = gauss_legendre(8);
    let mut pot = 0.0;
    let e0 = 0.5 * orbit.v[0] * orbit.v[0];
    let mut worst: f64 = 0.0;
    for i in 1..orbit.t.len() {
        let (lo, hi) = (orbit.x[i - 1], orbit.x[i]);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut s = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            s += w * sys.f_at(mid + half * x)?;
        }
        pot -= half * s;
        let e = 0.5 * orbit.v[i] * orbit.v[i] + pot;
        worst = worst.max((e - e0).abs());
    }
    Ok(worst / (1.0 + e0.abs()))
}

fn trim_to_speed_floor(orbit: &mut SeparatrixOrbit, floor: f64) {
    let n = orbit.t.len();
    let first = (0..n).find(|&i| orbit.v[i].abs() > floor).unwrap_or(0).saturating_sub(1);
    let last = (0..n).rev().find(|&i| orbit.v[i].abs() > floor).map_or(n - 1, |i| (i + 1).min(n - 1));
    let keep = first..=last;
    orbit.t = orbit.t[keep.clone()].to_vec();
    orbit.x = orbit.x[keep.clone()].to_vec();
    orbit.v = orbit.v[keep.clone()].to_vec();
    orbit.a = orbit.a[keep.clone()].to_vec();
    orbit.j = orbit.j[keep].to_vec();
}

/// Least-squares fit of `ln|x0'| = ln(λ|c±|) ∓ λ t` on the tail windows
/// where `1e-10 <= |x0'| <= 1e-4`, with the slope fixed by `λ`.
pub fn fit_tail_constants(orbit: &SeparatrixOrbit) -> Result<TailFit> {
    let n = orbit.t.len();
    let v = &orbit.v;
    if v[0].abs() > TAIL_LO || v[n - 1].abs() > TAIL_LO {
        return Err(Error::Numerical("orbit samples do not reach |x'| <= 1e-10 at both ends".into()));
    }
    // plus side: from the end back to the first sample above the window
    let hi_plus = (0..n)
        .rev()
        .find(|&i| v[i].abs() >= TAIL_HI)
        .ok_or_else(|| Error::Numerical("orbit never reaches the tail window".into()))?;
    let lo_plus = (hi_plus..n).find(|&i| v[i].abs() <= TAIL_LO).unwrap();
    let hi_minus = (0..n).find(|&i| v[i].abs() >= TAIL_HI).unwrap();
    let lo_minus = (0..=hi_minus).rev().find(|&i| v[i].abs() <= TAIL_LO).unwrap();

    let fit = |ta: f64, tb: f64, slope: f64| -> (f64, f64, f64) {
        let m = 400;
        let mut ys = Vec::with_capacity(m);
        let mut sign = 0.0;
        for i in 0..m {
            let tt = ta + (tb - ta) * (i as f64 + 0.5) / m as f64;
            let vv = orbit.eval(tt).v;
            sign = vv.signum();
            ys.push(vv.abs().ln() - slope * tt);
        }
        let mean = ys.iter().sum::<f64>() / m as f64;
        let rms = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        (mean, rms, sign)
    };
    let lp = orbit.lambda_plus;
    let lm = orbit.lambda_minus;
    let (mp, rp, sp) = fit(orbit.t[hi_plus + 1], orbit.t[lo_plus - 1], -lp);
    let (mm, rm, sm) = fit(orbit.t[lo_minus + 1], orbit.t[hi_minus - 1], lm);
    let out =
        TailFit { c_plus: sp * mp.exp() / lp, c_minus: sm * mm.exp() / lm, residual_plus: rp, residual_minus: rm };
    if rp > 1e-3 || rm > 1e-3 {
        return Err(Error::Numerical(format!(
            "tail is not exponential with rate λ: fit residuals {rm:.2e} / {rp:.2e}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::Forcing;
    use std::f64::consts::PI;

    fn pendulum_orbit() -> SeparatrixOrbit {
        let sys = SystemSpec::new("sin(x)", "2*sin(xi)", 2.6, Forcing::Periodic).unwrap();
        let eq = find_saddle(&sys, 0.1).unwrap();
        compute_separatrix(&sys, &eq, Branch::Plus, &OrbitOptions::default()).unwrap()
    }

    #[test]
    fn pendulum_matches_closed_form() {
        let o = pendulum_orbit();
        assert_eq!(o.time_origin(), TimeOrigin::MaxSpeed);
        let p = o.eval(0.0);
        assert!((p.x - PI).abs() < 1e-9, "{}", p.x);
        assert!((p.v - 2.0).abs() < 1e-9);
        assert!(p.a.abs() < 1e-8);
        for i in -60..=60 {
            let t = i as f64 * 0.25;
            let p = o.eval(t);
            assert!((p.x - 4.0 * t.exp().atan()).abs() < 1e-8, "t = {t}");
            assert!((p.v - 2.0 / t.cosh()).abs() < 1e-8, "t = {t}");
        }
        assert_eq!(o.x_limit_minus(), 0.0);
        assert!((o.x_limit_plus() - 2.0 * PI).abs() < 1e-12);
        assert!((o.c_plus() / 4.0 - 1.0).abs() < 1e-4);
        assert!((o.c_minus() / 4.0 - 1.0).abs() < 1e-4);
        assert!((o.max_speed() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tail_formula_beyond_dense_range() {
        let o = pendulum_orbit();
        let p = o.eval(40.0);
        assert!((p.v / (4.0 * (-40f64).exp()) - 1.0).abs() < 1e-4);
        assert!(o.t_max() < 40.0);
        assert!(o.eval(o.t_max()).v.abs() <= 1.01e-12);
    }

    #[test]
    fn minus_branch_mirrors_plus() {
        let sys = SystemSpec::new("sin(x)", "2*sin(xi)", 2.6, Forcing::Periodic).unwrap();
        let eq = find_saddle(&sys, 0.1).unwrap();
        let o = compute_separatrix(&sys, &eq, Branch::Minus, &OrbitOptions::default()).unwrap();
        assert!((o.x_limit_plus() + 2.0 * PI).abs() < 1e-12);
        assert!((o.c_plus() + 4.0).abs() < 4e-4);
        assert!((o.eval(0.0).v + 2.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_loop_turns_around() {
        let sys = SystemSpec::new("x - x^2", "sin(xi)", 2.6, Forcing::Periodic).unwrap();
        let eq = find_saddle(&sys, -0.1).unwrap();
        let o = compute_separatrix(&sys, &eq, Branch::Plus, &OrbitOptions::default()).unwrap();
        assert_eq!(o.time_origin(), TimeOrigin::TurningPoint);
        // turning point at x = 3/2, speed maximum 1/sqrt(3) at x = 1
        assert!((o.eval(0.0).x - 1.5).abs() < 1e-9);
        assert!((o.max_speed() - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!((o.c_plus() + o.c_minus()).abs() < 1e-4 * o.c_minus().abs());
        assert!(o.energy_drift() < 1e-9);
        // closed form: x0 = 3/2 sech²(t/2), c = 6
        for i in -40..=40 {
            let t = i as f64 * 0.5;
            let exact = 1.5 / (0.5 * t).cosh().powi(2);
            assert!((o.eval(t).x - exact).abs() < 1e-8, "t = {t}");
        }
        assert!((o.c_minus() - 6.0).abs() < 6e-4);
    }

    #[test]
    fn shifts_rebase_tails() {
        let o = pendulum_orbit();
        let s = o.shifted_time(0.7);
        for t in [-30.0, -1.0, 0.3, 25.0] {
            assert!((s.eval(t).x - o.eval(t + 0.7).x).abs() < 1e-12);
        }
        let p = o.shifted_position(2.0 * PI);
        assert!((p.eval(0.0).x - 3.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn no_connection_is_reported() {
        // x'' = x has a saddle at 0 but no connection
        let sys = SystemSpec::new("x", "sin(xi)", 2.6, Forcing::Periodic).unwrap();
        let eq = find_saddle(&sys, 0.3).unwrap();
        let err = compute_separatrix(&sys, &eq, Branch::Plus, &OrbitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }
}
