//! Command-line front end: `analyze`, `scan`, `oracle` and `run`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{apply_overrides, load_value, resolve, CommandName, Resolved, RunConfig};
use crate::dynsys::Forcing;
use crate::error::{Error, Result};
use crate::oracle::{displacement_direct, epsilon_scaling_fit, melnikov_direct, melnikov_scan, ScalingFit};
use crate::stphase::{splitting_coefficients, CpOrigin, CriticalPoint, SplittingCoefficients};

#[derive(Debug, Parser)]
#[command(name = "sepsplit", version, about = "Separatrix splitting under rapidly oscillating perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Catalog system: pendulum-em, pendulum-qp or cubic.
    #[arg(long, global = true)]
    pub example: Option<String>,
    /// Override a configuration value, e.g. `q=cos(v)` or `tolerances.melnikov.n_t0=32`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Separatrix, critical points and splitting coefficients.
    Analyze,
    /// Sweep ε and fit the scaling exponents.
    Scan,
    /// Direct quadrature of the Melnikov integral over one forcing period.
    Oracle,
    /// Run the commands listed in the configuration.
    Run,
}

/// Assemble the effective configuration from file, flags and overrides.
pub fn build_config(args: &CommonArgs) -> Result<RunConfig> {
    let root = match &args.config {
        Some(p) => load_value(p)?,
        None if args.example.is_some() || !args.set.is_empty() => json!({}),
        None => return Err(Error::Config("give --config or --example".into())),
    };
    let mut sets = Vec::new();
    if let Some(e) = &args.example {
        sets.push(format!("example={e}"));
    }
    sets.extend(args.set.iter().cloned());
    if let Some(out) = &args.out {
        sets.push(format!("out={}", serde_json::Value::String(out.display().to_string())));
    }
    RunConfig::from_value(apply_overrides(root, &sets)?)
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("sepsplit-out"))
}

/// Entry point shared by the binary and the tests.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = build_config(&cli.common)?;
    let commands = match cli.command {
        Command::Analyze => vec![CommandName::Analyze],
        Command::Scan => vec![CommandName::Scan],
        Command::Oracle => vec![CommandName::Oracle],
        Command::Run => {
            if cfg.commands.is_empty() {
                return Err(Error::Config("`run` needs a non-empty `commands` list".into()));
            }
            cfg.commands.clone()
        }
    };
    if commands.contains(&CommandName::Scan) {
        check_scan_epsilons(&cfg)?;
    }
    let resolved = resolve(&cfg)?;
    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for c in commands {
        match c {
            CommandName::Analyze => cmd_analyze(&cfg, &resolved, &dir)?,
            CommandName::Scan => cmd_scan(&cfg, &resolved, &dir)?,
            CommandName::Oracle => cmd_oracle(&cfg, &resolved, &dir)?,
        }
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    text.push('\n');
    write(dir, name, &text)
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn system_summary(res: &Resolved, cfg: &RunConfig) -> serde_json::Value {
    let forcing = match &res.system.forcing {
        Forcing::Periodic => json!({"type": "periodic"}),
        Forcing::QuasiPeriodic { omega, harmonics } => json!({
            "type": "quasi_periodic",
            "omega": omega,
            "harmonics": harmonics.iter().map(|h| json!({"m": h.m, "re": h.f.re, "im": h.f.im})).collect::<Vec<_>>(),
        }),
    };
    json!({
        "example": res.name,
        "f": res.system.f.to_string(),
        "q": res.system.q.to_string(),
        "r": res.system.r,
        "forcing": forcing,
        "saddle": [res.orbit.x_limit_minus(), res.orbit.x_limit_plus()],
        "lambda": [res.orbit.lambda_minus(), res.orbit.lambda_plus()],
        "tail_constants": [res.orbit.c_minus(), res.orbit.c_plus()],
        "time_origin": res.orbit.time_origin(),
        "max_speed": res.orbit.max_speed(),
        "energy_drift": res.orbit.energy_drift(),
        "tolerances": cfg.tolerances,
        "k_max_override": cfg.k_max,
    })
}

fn coefficient_report(c: &SplittingCoefficients, eps: f64, floor: f64) -> serde_json::Value {
    let r = c.r;
    json!({
        "epsilon": eps,
        "convention": c.convention,
        "coefficients": c.coefficients,
        "harmonic_amplitudes": c.harmonic_amplitudes(),
        "amplitude": c.amplitude(),
        "leading": "eps^(r+1/2) * sum over nu of (a_nu cos(nu t0/eps) + b_nu sin(nu t0/eps))",
        "leading_amplitude": c.amplitude() * eps.powf(r + 0.5),
        "error_order": [r + 1.0, 2.0 * r - 2.0],
        "truncation_estimate": c.truncation_estimate,
        "k_max_used": c.k_max_used,
        "envelope": c.envelope,
        "critical_point_count": c.critical_points.len(),
        "splitting_verdict": c.verdict(floor),
        "verdict_floor": floor,
        "decay": c.decay,
    })
}

fn critical_points_csv(cps: &[CriticalPoint]) -> String {
    let mut s = String::from("k,m,t_star,x_star,f_star,sigma,origin\n");
    for cp in cps {
        let m =
            cp.m.as_ref().map(|m| m.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")).unwrap_or_default();
        let origin = match cp.origin {
            CpOrigin::Interior => "interior",
            CpOrigin::Tail => "tail",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            cp.k,
            m,
            num(cp.t_star),
            num(cp.x_star),
            num(cp.f_star),
            cp.sigma,
            origin
        );
    }
    s
}

pub fn cmd_analyze(cfg: &RunConfig, res: &Resolved, dir: &Path) -> Result<()> {
    let mut orbit_csv = String::from("t,x,v\n");
    for (t, x, v) in res.orbit.samples() {
        let _ = writeln!(orbit_csv, "{},{},{}", num(t), num(x), num(v));
    }
    write(dir, "orbit.csv", &orbit_csv)?;

    let opts = cfg.stphase_options();
    let mut results = Vec::new();
    let mut first_cps = None;
    for &eps in &cfg.epsilons {
        let c = splitting_coefficients(&res.system, &res.orbit, eps, &opts)?;
        if let Some(w) = &c.decay.warning {
            log::warn!("{w}");
        }
        results.push(coefficient_report(&c, eps, opts.verdict_floor));
        first_cps.get_or_insert(c.critical_points);
    }
    write(dir, "critical_points.csv", &critical_points_csv(&first_cps.unwrap_or_default()))?;
    write_json(
        dir,
        "coefficients.json",
        &json!({
            "system": system_summary(res, cfg),
            "references": res.references,
            "results": results,
        }),
    )
}

fn check_scan_epsilons(cfg: &RunConfig) -> Result<()> {
    let n = cfg.epsilons.len();
    let lo = cfg.epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cfg.epsilons.iter().cloned().fold(0.0, f64::max);
    if n < 3 || hi < 4.0 * lo {
        return Err(Error::Config(format!(
            "scan needs at least 3 epsilons spanning a factor >= 4 (got {n} in [{lo}, {hi}])"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ScanRow {
    epsilon: f64,
    oracle_amplitude: f64,
    predicted_amplitude: f64,
    dm_difference: Option<f64>,
}

fn fit_or_none(points: &[(f64, f64)]) -> Option<ScalingFit> {
    epsilon_scaling_fit(points).ok()
}

pub fn cmd_scan(cfg: &RunConfig, res: &Resolved, dir: &Path) -> Result<()> {
    check_scan_epsilons(cfg)?;
    let mel = cfg.tolerances.melnikov;
    let opts = cfg.stphase_options();
    let r = res.system.r;
    let mut rows = Vec::new();
    for &eps in &cfg.epsilons {
        let oracle = melnikov_scan(&res.system, &res.orbit, eps, &mel)?;
        let c = splitting_coefficients(&res.system, &res.orbit, eps, &opts)?;
        let dm = if cfg.scan.displacement && res.system.forcing == Forcing::Periodic {
            let w = cfg.tolerances.displacement.window;
            if eps >= w[0] && eps <= w[1] {
                let n = cfg.scan.t0_samples.max(1);
                let mut worst: f64 = 0.0;
                for j in 0..n {
                    let t0 = 2.0 * PI * eps * j as f64 / n as f64;
                    let d = displacement_direct(&res.system, &res.orbit, eps, t0, &cfg.tolerances.displacement)?;
                    let m = melnikov_direct(&res.system, &res.orbit, eps, t0, &mel)?;
                    worst = worst.max((d.d_value - m).abs());
                }
                Some(worst)
            } else {
                log::warn!("epsilon {eps} outside the displacement window {w:?}; skipped");
                None
            }
        } else {
            None
        };
        rows.push(ScanRow {
            epsilon: eps,
            oracle_amplitude: oracle.amplitude(),
            predicted_amplitude: c.amplitude() * eps.powf(r + 0.5),
            dm_difference: dm,
        });
    }

    let mut csv = String::from("epsilon,oracle_amplitude,predicted_amplitude,dm_difference\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(row.epsilon),
            num(row.oracle_amplitude),
            num(row.predicted_amplitude),
            row.dm_difference.map(num).unwrap_or_default()
        );
    }
    write(dir, "scan.csv", &csv)?;

    let pts = |f: &dyn Fn(&ScanRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|row| f(row).map(|v| (row.epsilon, v))).collect()
    };
    let oracle_fit = fit_or_none(&pts(&|row| Some(row.oracle_amplitude)));
    let predicted_fit = fit_or_none(&pts(&|row| Some(row.predicted_amplitude)));
    let dm_fit = fit_or_none(&pts(&|row| row.dm_difference));
    write_json(
        dir,
        "scaling.json",
        &json!({
            "system": system_summary(res, cfg),
            "amplitude_slope": {
                "oracle": oracle_fit,
                "predicted": predicted_fit,
                "target": r + 0.5,
                "within_0.05": oracle_fit.as_ref().map(|f| (f.slope - (r + 0.5)).abs() <= 0.05),
            },
            "difference_slope": {
                "fit": dm_fit,
                "target": 2.0 * r - 2.0,
                "minimum": 2.0 * r - 2.0 - 0.4,
                "meets_minimum": dm_fit.as_ref().map(|f| f.slope >= 2.0 * r - 2.4),
            },
            "rows": rows,
        }),
    )
}

pub fn cmd_oracle(cfg: &RunConfig, res: &Resolved, dir: &Path) -> Result<()> {
    let mel = cfg.tolerances.melnikov;
    let opts = cfg.stphase_options();
    let r = res.system.r;
    let mut csv = String::from("epsilon,t0,melnikov\n");
    let mut runs = Vec::new();
    for &eps in &cfg.epsilons {
        let o = melnikov_scan(&res.system, &res.orbit, eps, &mel)?;
        for (t, v) in o.t0_samples.iter().zip(&o.values) {
            let _ = writeln!(csv, "{},{},{}", num(eps), num(*t), num(*v));
        }
        let c = splitting_coefficients(&res.system, &res.orbit, eps, &opts)?;
        let scale = eps.powf(r + 0.5);
        let comparison: Vec<_> = c
            .harmonic_amplitudes()
            .iter()
            .map(|h| {
                let fitted = o.fitted.iter().find(|f| (f.nu - h.nu).abs() <= 1e-12 * h.nu);
                json!({
                    "nu": h.nu,
                    "predicted_amplitude": h.amplitude * scale,
                    "oracle_amplitude": fitted.map(|f| f.amplitude),
                    "ratio": fitted.map(|f| f.amplitude / (h.amplitude * scale)),
                })
            })
            .collect();
        runs.push(json!({
            "epsilon": eps,
            "fitted": o.fitted,
            "residual": o.residual,
            "refinement_delta": o.refinement_delta,
            "window": o.window,
            "panels": o.panels,
            "comparison": comparison,
        }));
    }
    write(dir, "oracle.csv", &csv)?;
    write_json(
        dir,
        "oracle.json",
        &json!({
            "system": system_summary(res, cfg),
            "references": res.references,
            "runs": runs,
        }),
    )
}
