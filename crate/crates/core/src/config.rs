//! JSON run configuration, `key=value` overrides, and resolution into a
//! system plus its separatrix.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{self, ReferenceValue, DEFAULT_R};
use crate::dynsys::{
    compute_separatrix, find_saddle, Branch, Forcing, Harmonic, OrbitOptions, SeparatrixOrbit, SystemSpec,
};
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::oracle::{DisplacementOptions, MelnikovOptions};
use crate::stphase::StphaseOptions;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Catalog entry used as the base; `f` and `q` override its fields.
    pub example: Option<String>,
    pub f: Option<String>,
    pub q: Option<String>,
    pub saddle_guess: Option<f64>,
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub m: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    Periodic,
    QuasiPeriodic { omega: Vec<f64>, harmonics: Vec<HarmonicConfig> },
}

impl ForcingConfig {
    fn build(&self) -> Forcing {
        match self {
            ForcingConfig::Periodic => Forcing::Periodic,
            ForcingConfig::QuasiPeriodic { omega, harmonics } => Forcing::QuasiPeriodic {
                omega: omega.clone(),
                harmonics: harmonics.iter().map(|h| Harmonic::new(h.m.clone(), Complex64::new(h.re, h.im))).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub orbit: OrbitOptions,
    pub stphase: StphaseOptions,
    pub melnikov: MelnikovOptions,
    pub displacement: DisplacementOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Also run the displacement oracle and report `|𝒟 − ℳ|`.
    pub displacement: bool,
    /// Phases `t0` per ε at which `|𝒟 − ℳ|` is maximized.
    pub t0_samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { displacement: false, t0_samples: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Analyze,
    Scan,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemConfig,
    pub r: Option<f64>,
    pub forcing: Option<ForcingConfig>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Fixed truncation order for the k-sums.
    pub k_max: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub commands: Vec<CommandName>,
    pub output_dir: Option<PathBuf>,
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-3]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_value(load_value(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilons must not be empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 0.1)) {
            return Err(Error::Config(format!("epsilon {e} outside (0, 0.1]")));
        }
        if self.system.example.is_none() && (self.system.f.is_none() || self.system.q.is_none()) {
            return Err(Error::Config("system needs either `example` or both `f` and `q`".into()));
        }
        if self.k_max == Some(0) {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        let root = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(apply_overrides(root, sets)?)
    }

    pub fn stphase_options(&self) -> StphaseOptions {
        let mut o = self.tolerances.stphase;
        if self.k_max.is_some() {
            o.k_max = self.k_max;
        }
        o
    }
}

/// Read a configuration file as raw JSON, before schema validation.
pub fn load_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: malformed JSON: {e}", path.display())))
}

/// Apply `key=value` overrides to a raw configuration. Values are read as
/// JSON when possible and as strings otherwise; keys are dotted paths, with
/// the shortcuts `f`, `q`, `example`, `saddle_guess`, `branch`, `epsilon`, `out`.
pub fn apply_overrides(mut root: Value, sets: &[String]) -> Result<Value> {
    for s in sets {
        let (key, raw) =
            s.split_once('=').ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
        let key = key.trim();
        let mut value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let path: Vec<&str> = match key {
            "f" | "q" | "example" | "saddle_guess" | "branch" => vec!["system", key],
            "epsilon" => {
                value = Value::Array(vec![value]);
                vec!["epsilons"]
            }
            "out" => vec!["output_dir"],
            k => k.split('.').collect(),
        };
        set_path(&mut root, &path, value)?;
    }
    Ok(root)
}

fn set_path(root: &mut Value, path: &[&str], value: Value) -> Result<()> {
    let mut cur = root;
    for (i, key) in path.iter().enumerate() {
        let map = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set")
            }
            _ => return Err(Error::Config(format!("cannot set `{}`: parent is not an object", path.join(".")))),
        };
        if i + 1 == path.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        cur = map.entry(key.to_string()).or_insert(Value::Null);
    }
    Err(Error::Config("empty override key".into()))
}

/// A configured system together with its unperturbed connection.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: Option<String>,
    pub system: SystemSpec,
    pub orbit: SeparatrixOrbit,
    pub references: Vec<ReferenceValue>,
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let r = cfg.r.unwrap_or(DEFAULT_R);
    let (mut sys, mut guess, mut branch, references) = match &cfg.system.example {
        Some(name) => {
            let e = catalog::by_name(name, r)?;
            (e.system, e.saddle_guess, e.branch, e.references)
        }
        None => {
            let f = cfg.system.f.as_deref().expect("validated");
            let q = cfg.system.q.as_deref().expect("validated");
            (SystemSpec::new(f, q, r, Forcing::Periodic)?, 0.0, Branch::Plus, Vec::new())
        }
    };
    if cfg.system.example.is_some() {
        if let Some(f) = &cfg.system.f {
            let fe = parse(f, &["x"]).map_err(|source| Error::Parse { what: "f".into(), source })?;
            sys = SystemSpec::from_expressions(fe, sys.q.clone(), r, sys.forcing.clone())?;
        }
        if let Some(q) = &cfg.system.q {
            sys = sys.with_q(q)?;
        }
    }
    if let Some(fc) = &cfg.forcing {
        sys = SystemSpec::from_expressions(sys.f.clone(), sys.q.clone(), r, fc.build())?;
    }
    // overridden f or q invalidates catalog reference numbers
    let references =
        if cfg.system.f.is_none() && cfg.system.q.is_none() && cfg.forcing.is_none() { references } else { Vec::new() };
    if let Some(g) = cfg.system.saddle_guess {
        guess = g;
    }
    if let Some(b) = cfg.system.branch {
        branch = b;
    }
    let eq = find_saddle(&sys, guess)?;
    let orbit = compute_separatrix(&sys, &eq, branch, &cfg.tolerances.orbit)?;
    Ok(Resolved { name: cfg.system.example.clone(), system: sys, orbit, references })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json(r#"{"system": {"example": "cubic"}, "colour": 1}"#).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let err = RunConfig::from_json(r#"{"system": {"example": "cubic"}, "tolerances": {"orbit": {"dleta": 1}}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("dleta"));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = RunConfig::from_json("{\"system\": {\"example\": \"cubic\"},\n  \"r\": }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn overrides_and_shortcuts() {
        let base = RunConfig::from_json(r#"{"system": {"example": "pendulum-em"}}"#).unwrap();
        let cfg = base
            .with_overrides(&[
                "q=cos(v)".into(),
                "epsilon=0.01".into(),
                "tolerances.melnikov.n_t0=24".into(),
                "k_max=3".into(),
            ])
            .unwrap();
        assert_eq!(cfg.system.q.as_deref(), Some("cos(v)"));
        assert_eq!(cfg.epsilons, vec![0.01]);
        assert_eq!(cfg.tolerances.melnikov.n_t0, 24);
        assert_eq!(cfg.stphase_options().k_max, Some(3));
        assert!(base.with_overrides(&["nonsense=1".into()]).is_err());
        assert!(base.with_overrides(&["noequals".into()]).is_err());
    }

    #[test]
    fn resolves_custom_and_catalog_systems() {
        let cfg = RunConfig::from_json(r#"{"system": {"f": "x - x^2", "q": "sin(xi)"}, "r": 3}"#).unwrap();
        let res = resolve(&cfg).unwrap();
        assert!((res.orbit.max_speed() - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        let cfg = RunConfig::from_json(r#"{"system": {"example": "pendulum-qp"}}"#).unwrap();
        assert!(matches!(resolve(&cfg).unwrap().system.forcing, Forcing::QuasiPeriodic { .. }));
        let cfg = RunConfig::from_json(r#"{"system": {"example": "nope"}}"#).unwrap();
        assert_eq!(resolve(&cfg).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn hypothesis_errors_keep_their_code() {
        let cfg = RunConfig::from_json(r#"{"system": {"example": "pendulum-em"}, "r": 2.4}"#).unwrap();
        assert_eq!(resolve(&cfg).unwrap_err().exit_code(), 2);
    }
}
