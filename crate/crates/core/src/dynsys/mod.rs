//! Unperturbed one-degree-of-freedom system `x'' = f(x)`, its perturbation
//! profile, and the saddle connection used as the base curve.

mod hermite;
mod orbit;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{parse, Expression};

pub use orbit::{
    compute_separatrix, fit_tail_constants, Branch, OrbitOptions, OrbitPoint, SeparatrixOrbit, TimeOrigin,
};

/// One term `F_m exp(i m·θ)` of a quasi-periodic forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub m: Vec<i32>,
    pub f: Complex64,
}

impl Harmonic {
    pub fn new(m: Vec<i32>, f: Complex64) -> Self {
        Harmonic { m, f }
    }

    /// `m·ω`
    pub fn frequency(&self, omega: &[f64]) -> f64 {
        self.m.iter().zip(omega).map(|(&mi, w)| mi as f64 * w).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// `cos(t/ε)`
    Periodic,
    /// `Σ F_m exp(i m·ω t/ε)`
    QuasiPeriodic { omega: Vec<f64>, harmonics: Vec<Harmonic> },
}

impl Forcing {
    /// Value of the forcing at fast phase `s = t/ε`.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Forcing::Periodic => s.cos(),
            Forcing::QuasiPeriodic { omega, harmonics } => {
                harmonics.iter().map(|h| (h.f * Complex64::from_polar(1.0, h.frequency(omega) * s)).re).sum()
            }
        }
    }

    /// Distinct positive frequencies present in the forcing, ascending.
    pub fn frequencies(&self) -> Vec<f64> {
        match self {
            Forcing::Periodic => vec![1.0],
            Forcing::QuasiPeriodic { omega, harmonics } => {
                let mut nu: Vec<f64> = harmonics.iter().map(|h| h.frequency(omega).abs()).collect();
                nu.sort_by(f64::total_cmp);
                nu.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
                nu
            }
        }
    }

    /// Largest bound `Σ|F_m|` on the forcing.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Forcing::Periodic => 1.0,
            Forcing::QuasiPeriodic { harmonics, .. } => harmonics.iter().map(|h| h.f.norm()).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let Forcing::QuasiPeriodic { omega, harmonics } = self else {
            return Ok(());
        };
        if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("frequency vector must be non-empty and finite".into()));
        }
        if harmonics.is_empty() {
            return Err(Error::Invalid("quasi-periodic forcing needs at least one harmonic".into()));
        }
        for h in harmonics {
            if h.m.len() != omega.len() {
                return Err(Error::Invalid(format!(
                    "harmonic {:?} has {} components, frequency vector has {}",
                    h.m,
                    h.m.len(),
                    omega.len()
                )));
            }
            if h.m.iter().all(|&c| c == 0) {
                return Err(Error::Invalid("the zero harmonic is not allowed (forcing must have zero mean)".into()));
            }
            let neg: Vec<i32> = h.m.iter().map(|c| -c).collect();
            match harmonics.iter().find(|g| g.m == neg) {
                Some(g) if (g.f - h.f.conj()).norm() <= 1e-14 * (1.0 + h.f.norm()) => {}
                Some(_) => {
                    return Err(Error::Invalid(format!(
                        "coefficient of {:?} is not the conjugate of that of {:?}",
                        neg, h.m
                    )))
                }
                None => {
                    return Err(Error::Invalid(format!("harmonic {:?} lacks its conjugate partner {:?}", h.m, neg)))
                }
            }
        }
        for (i, h) in harmonics.iter().enumerate() {
            if h.frequency(omega).abs() <= 1e-9 {
                return Err(Error::Invalid(format!("resonant harmonic {:?}: m·ω = 0", h.m)));
            }
            for g in &harmonics[i + 1..] {
                if g.m == h.m {
                    return Err(Error::Invalid(format!("harmonic {:?} listed twice", h.m)));
                }
                if (h.frequency(omega) - g.frequency(omega)).abs() <= 1e-9 {
                    return Err(Error::Invalid(format!("harmonics {:?} and {:?} are resonant", h.m, g.m)));
                }
            }
        }
        Ok(())
    }
}

/// `x'' = f(x) + ε^r q(x/ε, x') · forcing(t/ε)`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub f: Expression,
    pub df: Expression,
    pub q: Expression,
    pub r: f64,
    pub forcing: Forcing,
}

impl SystemSpec {
    /// Build from source strings; `f` is in `x`, `q` in `xi` and `v`.
    pub fn new(f: &str, q: &str, r: f64, forcing: Forcing) -> Result<Self> {
        let fe = parse(f, &["x"]).map_err(|source| Error::Parse { what: "f".into(), source })?;
        let qe = parse(q, &["xi", "v"]).map_err(|source| Error::Parse { what: "q".into(), source })?;
        Self::from_expressions(fe, qe, r, forcing)
    }

    pub fn from_expressions(f: Expression, q: Expression, r: f64, forcing: Forcing) -> Result<Self> {
        if f.variables() != ["x"] {
            return Err(Error::Invalid("f must be declared over the single variable x".into()));
        }
        if q.variables() != ["xi", "v"] {
            return Err(Error::Invalid("q must be declared over (xi, v)".into()));
        }
        if !(r > 2.5) || !r.is_finite() {
            return Err(Error::Hypothesis(format!("perturbation exponent r = {r} must exceed 5/2")));
        }
        forcing.validate()?;
        let df = f.differentiate("x").expect("x is declared");
        Ok(SystemSpec { f, df, q, r, forcing })
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::from_expressions(self.f.clone(), self.q.clone(), r, self.forcing.clone())
    }

    pub fn with_q(&self, q: &str) -> Result<Self> {
        let qe = parse(q, &["xi", "v"]).map_err(|source| Error::Parse { what: "q".into(), source })?;
        Self::from_expressions(self.f.clone(), qe, self.r, self.forcing.clone())
    }

    pub fn f_at(&self, x: f64) -> Result<f64> {
        Ok(self.f.eval(&[x])?)
    }

    pub fn df_at(&self, x: f64) -> Result<f64> {
        Ok(self.df.eval(&[x])?)
    }

    pub fn q_at(&self, xi: f64, v: f64) -> Result<f64> {
        Ok(self.q.eval(&[xi, v])?)
    }
}

/// Hyperbolic equilibrium of `x'' = f(x)`, eigenvalues `±lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x_e: f64,
    pub lambda: f64,
}

/// Newton on `f(x) = 0` from `guess`, then the saddle test `f'(x_e) > 0`.
pub fn find_saddle(sys: &SystemSpec, guess: f64) -> Result<Equilibrium> {
    let mut x = guess;
    let mut converged = false;
    for _ in 0..50 {
        let fx = sys.f_at(x)?;
        let dfx = sys.df_at(x)?;
        if dfx == 0.0 || !dfx.is_finite() {
            break;
        }
        let dx = fx / dfx;
        x -= dx;
        if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
            converged = true;
            break;
        }
    }
    let fx = sys.f_at(x)?;
    if !x.is_finite() || (!converged && fx.abs() > 1e-12) || fx.abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "Newton for f(x) = 0 from x = {guess} did not converge within 50 iterations"
        )));
    }
    let dfx = sys.df_at(x)?;
    if dfx <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "equilibrium x = {x} is not hyperbolic: f'(x) = {dfx} <= 0 (not a saddle)"
        )));
    }
    Ok(Equilibrium { x_e: x, lambda: dfx.sqrt() })
}
