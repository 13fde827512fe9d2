//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then `--config` file,
//! then flags), writes its outputs plus a `config.toml` echo into the output
//! directory, and maps failures onto exit codes: 0 success, 2 usage or
//! validation, 3 vanishing infimum, 4 numerical failure.

mod config;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Format, ParamSection, RunConfig};

use crate::error::{Error, Result};
use crate::minimize::{
    alpha0_bisect, estimate_d1, estimate_rho_hat, global_minimize, local_minimize, MinimizeResult,
};
use crate::params::{classify_regime, gn_exponents, liouville_certificate, ProblemParams};
use crate::radial::Spacing;
use crate::scaling::ThresholdReport;
use crate::shoot::{find_ground_state, shoot, ShootResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VANISHING: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParams(_) | Error::Regime(_) | Error::Parse(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlap", version, about = "Normalized solutions of the (2,q)-Laplacian equation")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct ParamArgs {
    #[arg(long = "N")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "m")]
    pub mass: Option<f64>,
}

impl ParamArgs {
    fn section(&self) -> ParamSection {
        ParamSection { dim: self.dim, q: self.q, p: self.p, alpha: self.alpha, mass: self.mass }
    }
}

#[derive(Debug, Default, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol_grad: Option<f64>,
    /// Grid nodes.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// `uniform` or `geometric:<ratio>`.
    #[arg(long)]
    pub spacing: Option<Spacing>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent table, regime and zero-mass Liouville certificate.
    Regime(ParamArgs),
    /// Global or local constrained minimization.
    Minimize {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Minimize over `K > rho/2` instead of the whole sphere.
        #[arg(long)]
        local: bool,
        /// Kinetic floor for `--local`; estimated when omitted.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Threshold strength from the `d(m)` formula and by bisection.
    Alpha0 {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Report the formula value only.
        #[arg(long)]
        no_bisect: bool,
    },
    /// One trajectory, or with `--ground-state` the decaying solution at `lambda`.
    Shoot {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        tol_step: Option<f64>,
        #[arg(long)]
        ground_state: bool,
    },
    /// Decaying solution at `lambda = 0` with its tail fit.
    ZeroMass(ParamArgs),
    /// Sweep `m` or `alpha` and tabulate global minima.
    Scan {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum)]
        vary: Sweep,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Geometric instead of linear spacing of the swept values.
        #[arg(long)]
        log: bool,
    },
    /// Run the property suite.
    Verify {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    M,
    Alpha,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_threads();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("QLAP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn apply_solver(cfg: &mut RunConfig, s: &SolverArgs) -> Result<()> {
    let m = &mut cfg.minimize;
    m.restarts = s.restarts.unwrap_or(m.restarts);
    m.seed = s.seed.unwrap_or(m.seed);
    m.max_iter = s.max_iter.unwrap_or(m.max_iter);
    m.tol_grad = s.tol_grad.unwrap_or(m.tol_grad);
    m.grid.n = s.n.unwrap_or(m.grid.n);
    m.grid.r_max = s.r_max.or(m.grid.r_max);
    m.grid.spacing = s.spacing.unwrap_or(m.grid.spacing);
    m.validate()
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = base_config(&cli)?;
    log::info!(
        "run started at {} s since epoch",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    );
    match cli.command {
        Command::Regime(args) => {
            cfg.params.overlay(&args.section());
            cmd_regime(&cfg)
        }
        Command::Minimize { params, solver, local, rho } => {
            cfg.params.overlay(&params.section());
            apply_solver(&mut cfg, &solver)?;
            cmd_minimize(&cfg, local, rho)
        }
        Command::Alpha0 { params, solver, no_bisect } => {
            cfg.params.overlay(&params.section());
            apply_solver(&mut cfg, &solver)?;
            cmd_alpha0(&cfg, !no_bisect)
        }
        Command::Shoot { params, lambda, u0, r_max, tol_step, ground_state } => {
            cfg.params.overlay(&params.section());
            let s = &mut cfg.shoot;
            s.lambda = lambda.unwrap_or(s.lambda);
            s.u0 = u0.unwrap_or(s.u0);
            s.r_max = r_max.unwrap_or(s.r_max);
            s.tol_step = tol_step.unwrap_or(s.tol_step);
            cfg.ground_state.tol_step = tol_step.unwrap_or(cfg.ground_state.tol_step);
            s.validate()?;
            cmd_shoot(&cfg, ground_state)
        }
        Command::ZeroMass(args) => {
            cfg.params.overlay(&args.section());
            cmd_zero_mass(&cfg)
        }
        Command::Scan { params, solver, vary, from, to, steps, log } => {
            cfg.params.overlay(&params.section());
            apply_solver(&mut cfg, &solver)?;
            cmd_scan(&cfg, vary, from, to, steps, log)
        }
        Command::Verify { quick } => cmd_verify(&cfg, quick),
    }
}

/// Writes `value` as `<stem>.json`, or as flattened `key,value` rows in
/// `<stem>.csv`.
pub fn emit(dir: &Path, stem: &str, value: &impl Serialize, format: Format) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let value = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    match format {
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Parse(e.to_string()))?;
            std::fs::write(&path, text + "\n")?;
            Ok(path)
        }
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "key,value")?;
            for (k, v) in rows {
                writeln!(out, "{k},{v}")?;
            }
            out.flush()?;
            Ok(path)
        }
    }
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, rows);
            }
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn print_json(value: &Value) {
    // a closed pipe on stdout is not an error for the run itself
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).unwrap_or_default());
}

pub fn cmd_regime(cfg: &RunConfig) -> Result<i32> {
    // alpha and m do not enter the exponent table
    let params = cfg.params.resolve(Some(1.0), Some(1.0))?;
    let report = json!({
        "params": { "N": params.dim, "q": params.q, "p": params.p },
        "exponents": gn_exponents(&params)?,
        "regime": classify_regime(&params),
        "liouville": liouville_certificate(params.dim, params.p, params.q),
    });
    print_json(&report);
    Ok(EXIT_OK)
}

fn minimize_outputs(cfg: &RunConfig, params: &ProblemParams, res: &MinimizeResult) -> Result<Value> {
    let record = json!({
        "params": params,
        "result": res.record(),
        "report": res.report,
    });
    emit(&cfg.output_dir, "minimize", &record, cfg.format)?;
    let mut csv = BufWriter::new(File::create(cfg.output_dir.join("profile.csv"))?);
    res.u.write_csv(&mut csv)?;
    csv.flush()?;
    Ok(record)
}

pub fn cmd_minimize(cfg: &RunConfig, local: bool, rho: Option<f64>) -> Result<i32> {
    let params = cfg.params.resolve(None, None)?;
    cfg.write_echo()?;
    let res = if local {
        let rho = match rho {
            Some(r) => r,
            None => estimate_rho_hat(&params, 200, cfg.minimize.seed)?.rho_hat,
        };
        local_minimize(&params, rho, &cfg.minimize)?
    } else {
        global_minimize(&params, &cfg.minimize)?
    };
    let record = minimize_outputs(cfg, &params, &res)?;
    print_json(&record);
    Ok(if res.vanishing {
        EXIT_VANISHING
    } else if !res.converged {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

pub fn cmd_alpha0(cfg: &RunConfig, bisect: bool) -> Result<i32> {
    let params = cfg.params.resolve(Some(1.0), None)?;
    params.require_intermediate()?;
    cfg.write_echo()?;
    let d1 = estimate_d1(&params, &cfg.minimize)?;
    let b = if bisect { Some(alpha0_bisect(&params, &cfg.minimize)?) } else { None };
    let report = ThresholdReport::new(d1, b, &params)?;
    let record = json!({ "params": params, "threshold": report });
    emit(&cfg.output_dir, "alpha0", &record, cfg.format)?;
    print_json(&record);
    Ok(EXIT_OK)
}

fn shoot_outputs(cfg: &RunConfig, stem: &str, res: &ShootResult, extra: Value) -> Result<Value> {
    let mut record = json!({ "params": res.params, "result": res.record() });
    if let (Value::Object(map), Value::Object(more)) = (&mut record, extra) {
        map.extend(more);
    }
    emit(&cfg.output_dir, stem, &record, cfg.format)?;
    let mut csv = BufWriter::new(File::create(cfg.output_dir.join("trajectory.csv"))?);
    res.profile.write_csv(&mut csv)?;
    csv.flush()?;
    Ok(record)
}

pub fn cmd_shoot(cfg: &RunConfig, ground_state: bool) -> Result<i32> {
    let params = cfg.params.resolve(Some(1.0), Some(1.0))?;
    cfg.write_echo()?;
    let record = if ground_state {
        let gs = find_ground_state(&params, cfg.shoot.lambda, &cfg.ground_state)?;
        let extra = json!({ "bracket": gs.bracket, "extra_corridors": gs.extra_corridors });
        shoot_outputs(cfg, "shoot", &gs.result, extra)?
    } else {
        let res = shoot(&cfg.shoot, &params)?;
        shoot_outputs(cfg, "shoot", &res, json!({}))?
    };
    print_json(&record);
    Ok(EXIT_OK)
}

pub fn cmd_zero_mass(cfg: &RunConfig) -> Result<i32> {
    let params = cfg.params.resolve(Some(1.0), Some(1.0))?;
    cfg.write_echo()?;
    let regime = classify_regime(&params);
    let certificate = liouville_certificate(params.dim, params.p, params.q);
    match find_ground_state(&params, 0.0, &cfg.ground_state) {
        Ok(gs) => {
            let extra = json!({
                "found": true,
                "zero_mass_eligible": regime.zero_mass_eligible,
                "liouville": certificate,
                "bracket": gs.bracket,
                "extra_corridors": gs.extra_corridors,
            });
            let record = shoot_outputs(cfg, "zero_mass", &gs.result, extra)?;
            print_json(&record);
            Ok(EXIT_OK)
        }
        Err(Error::NoGroundState(msg)) => {
            let record = json!({
                "params": params,
                "found": false,
                "reason": msg,
                "zero_mass_eligible": regime.zero_mass_eligible,
                "liouville": certificate,
            });
            emit(&cfg.output_dir, "zero_mass", &record, cfg.format)?;
            print_json(&record);
            // consistent with an analytic nonexistence certificate
            Ok(if certificate.is_certified() { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, Serialize)]
struct ScanRow {
    value: f64,
    energy: Option<f64>,
    lambda: Option<f64>,
    grad_tangent_norm: Option<f64>,
    converged: Option<bool>,
    vanishing: Option<bool>,
    status: String,
}

fn sweep_values(from: f64, to: f64, steps: usize, log: bool) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Error::InvalidParams("scan needs finite bounds and steps >= 1".into()));
    }
    if log && !(from > 0.0 && to > 0.0) {
        return Err(Error::InvalidParams("log scan needs positive bounds".into()));
    }
    Ok((0..steps)
        .map(|k| {
            let t = if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
            if log {
                from * (to / from).powf(t)
            } else {
                from + (to - from) * t
            }
        })
        .collect())
}

pub fn cmd_scan(cfg: &RunConfig, vary: Sweep, from: f64, to: f64, steps: usize, log: bool) -> Result<i32> {
    let values = sweep_values(from, to, steps, log)?;
    let base = match vary {
        Sweep::M => cfg.params.resolve(None, Some(from))?,
        Sweep::Alpha => cfg.params.resolve(Some(from), None)?,
    };
    cfg.write_echo()?;
    let rows: Vec<ScanRow> = values
        .par_iter()
        .map(|&v| {
            let params = match vary {
                Sweep::M => base.with_mass(v),
                Sweep::Alpha => base.with_alpha(v),
            };
            match global_minimize(&params, &cfg.minimize) {
                Ok(r) => ScanRow {
                    value: v,
                    energy: Some(r.energy),
                    lambda: Some(r.lambda),
                    grad_tangent_norm: Some(r.grad_tangent_norm),
                    converged: Some(r.converged),
                    vanishing: Some(r.vanishing),
                    status: "ok".into(),
                },
                Err(e) => ScanRow {
                    value: v,
                    energy: None,
                    lambda: None,
                    grad_tangent_norm: None,
                    converged: None,
                    vanishing: None,
                    status: format!("error: {e}").replace(',', ";"),
                },
            }
        })
        .collect();
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = BufWriter::new(File::create(cfg.output_dir.join("scan.csv"))?);
    let col = match vary {
        Sweep::M => "m",
        Sweep::Alpha => "alpha",
    };
    writeln!(out, "{col},e,lambda,grad_tangent_norm,converged,vanishing,status")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    let optb = |x: Option<bool>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &rows {
        writeln!(
            out,
            "{:?},{},{},{},{},{},{}",
            r.value,
            opt(r.energy),
            opt(r.lambda),
            opt(r.grad_tangent_norm),
            optb(r.converged),
            optb(r.vanishing),
            r.status
        )?;
    }
    out.flush()?;
    let failures = rows.iter().filter(|r| r.energy.is_none()).count();
    let energies: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.energy.map(|e| (r.value, e))).collect();
    let slack = 2.0 * cfg.minimize.tol_neg(base.mass.max(to).max(from));
    let nonincreasing = (vary == Sweep::M)
        .then(|| energies.windows(2).all(|w| w[1].0 < w[0].0 || w[1].1 <= w[0].1 + slack));
    let summary = json!({
        "vary": vary,
        "rows": rows.len(),
        "failures": failures,
        "nonincreasing": nonincreasing,
    });
    emit(&cfg.output_dir, "scan", &summary, cfg.format)?;
    print_json(&summary);
    Ok(if failures == 0 { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_verify(cfg: &RunConfig, quick: bool) -> Result<i32> {
    cfg.write_echo()?;
    let checks = verify::run_suite(quick);
    for c in &checks {
        let _ = writeln!(
            std::io::stdout().lock(),
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    emit(&cfg.output_dir, "verify", &checks, cfg.format)?;
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_NUMERICAL })
}
