//! The `cocycle-lab` command line.
//!
//! Every subcommand reads a [`RunConfig`] from `--config` and `--set`
//! overrides, writes a comment header with the version and the full config
//! echo, and then its table. Exit codes follow [`Error::exit_code`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::cocycle::{Family, QpCocycle};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{run_induction_trace, run_lemma_suite, SUITES};
use crate::spectral::{
    dirichlet_eigenvalues, finite_le, finite_le_many, fit_ldt_delta, hull_grid, ids_average, ldt_default_params,
    ldt_deviation_measure, le_refined, positivity_scan, scan_csv, thouless_le,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "cocycle-lab", version, about = "Quasiperiodic SL(2,R) cocycle experiments")]
pub struct Cli {
    /// Worker threads.
    #[arg(long, global = true, env = "COCYCLE_LAB_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value config file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `-s lambda=1000`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output file; defaults to the `output` key, then stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-scale Lyapunov exponents: E,n,L_n[,L_refined].
    Le {
        #[command(flatten)]
        common: Common,
        /// Add L_refined = 2 L_n - L_(n/2).
        #[arg(long)]
        refine: bool,
    },
    /// Integrated density of states by Sturm counts: E,n,N_n.
    Ids {
        #[command(flatten)]
        common: Common,
    },
    /// Positivity scan over the spectrum hull.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Multiscale induction traces as JSON lines.
    Induct {
        #[command(flatten)]
        common: Common,
    },
    /// Large-deviation measures as JSON lines.
    Ldt {
        #[command(flatten)]
        common: Common,
    },
    /// Run lemma suites (`list` shows the registry; no ids runs all).
    Lemmas {
        #[command(flatten)]
        common: Common,
        ids: Vec<String>,
    },
    /// Szegő cocycle exponents against -(1/2)(1 - epsilon) log(1 - lambda).
    Szego {
        #[command(flatten)]
        common: Common,
    },
    /// Thouless-formula exponent against the transfer-matrix exponent.
    Thouless {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Le { common, .. }
            | Command::Ids { common }
            | Command::Scan { common }
            | Command::Induct { common }
            | Command::Ldt { common }
            | Command::Lemmas { common, .. }
            | Command::Szego { common }
            | Command::Thouless { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Le { .. } => "le",
            Command::Ids { .. } => "ids",
            Command::Scan { .. } => "scan",
            Command::Induct { .. } => "induct",
            Command::Ldt { .. } => "ldt",
            Command::Lemmas { .. } => "lemmas",
            Command::Szego { .. } => "szego",
            Command::Thouless { .. } => "thouless",
        }
    }
}

/// A finished command: its table and exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
    /// One-line summary for stderr.
    pub note: Option<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome { code: 0, body, note: None }
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for a in &common.set {
        cfg.assign(a)?;
    }
    if let Some(o) = &common.output {
        cfg.output = Some(o.display().to_string());
    }
    Ok(cfg)
}

pub fn header(command: &str, cfg: &RunConfig) -> String {
    format!("# cocycle-lab {VERSION} {command}\n{}", cfg.echo())
}

fn schrodinger(cfg: &RunConfig, e: f64) -> Result<QpCocycle> {
    Ok(QpCocycle::schrodinger(cfg.alpha_value()?, e, cfg.require_lambda()?, cfg.potential()?))
}

fn cmd_le(cfg: &RunConfig, refine: bool) -> Result<Outcome> {
    cfg.require_lambda()?;
    let es = cfg.energies()?;
    if refine && cfg.n < 16 {
        return Err(Error::Config(format!("key `n` = {} is below 16, too small for --refine", cfg.n)));
    }
    let mut out = String::from(if refine { "E,n,L_n,L_refined\n" } else { "E,n,L_n\n" });
    for e in es {
        let c = schrodinger(cfg, e)?;
        if refine {
            let v = finite_le_many(&c, &[cfg.n / 2, cfg.n], cfg.x_grid)?;
            let _ = writeln!(out, "{},{},{},{}", num(e), cfg.n, num(v[1]), num(2.0 * v[1] - v[0]));
        } else {
            let l = finite_le(&c, cfg.n, cfg.x_grid)?;
            let _ = writeln!(out, "{},{},{}", num(e), cfg.n, num(l));
        }
    }
    Ok(Outcome::ok(out))
}

fn cmd_ids(cfg: &RunConfig) -> Result<Outcome> {
    cfg.require_lambda()?;
    let mut out = String::from("E,n,N_n\n");
    for e in cfg.energies()? {
        let c = schrodinger(cfg, e)?;
        let ids = ids_average(&c, e, cfg.n as usize, cfg.phases)?;
        let _ = writeln!(out, "{},{},{}", num(e), cfg.n, num(ids));
    }
    Ok(Outcome::ok(out))
}

fn cmd_scan(cfg: &RunConfig) -> Result<Outcome> {
    let lambda = cfg.require_lambda()?;
    let v = cfg.potential()?;
    let es = match (cfg.e, cfg.e_range) {
        (None, None) => hull_grid(&v, lambda, cfg.points),
        _ => cfg.energies()?,
    };
    let scan = positivity_scan(&v, lambda, cfg.alpha_value()?, &es, cfg.n, cfg.x_grid)?;
    let note = format!("min L_refined/log lambda = {} at E = {}", num(scan.min_ratio), num(scan.argmin));
    Ok(Outcome { code: 0, body: scan_csv(&scan, lambda.ln()), note: Some(note) })
}

fn cmd_induct(cfg: &RunConfig) -> Result<Outcome> {
    let mut body = String::new();
    let mut code = 0;
    let mut notes = Vec::new();
    for t in cfg.parameters()? {
        let (trace, run) = run_induction_trace(&cfg.trace(t)?, cfg.depth)?;
        body.push_str(&trace);
        if let Some(e) = &run.stopped {
            code = code.max(e.exit_code());
            notes.push(format!("t = {t}: {e}"));
        }
    }
    Ok(Outcome { code, body, note: (!notes.is_empty()).then(|| notes.join("; ")) })
}

fn cmd_ldt(cfg: &RunConfig) -> Result<Outcome> {
    let lambda = cfg.require_lambda()?;
    let e = cfg.e.ok_or_else(|| Error::Config("missing required key `e`".into()))?;
    let c = schrodinger(cfg, e)?;
    let log_lambda = lambda.ln();
    let (d0, s0) = ldt_default_params(cfg.tau, cfg.schedule_c, cfg.epsilon, log_lambda);
    let params = (cfg.delta.unwrap_or(d0), cfg.sigma.unwrap_or(s0));
    let eps_log = cfg.eps_log.unwrap_or(0.05 * log_lambda);
    let l_ref = le_refined(&c, cfg.l_ref, cfg.x_grid)?;
    let mut reports = Vec::new();
    let mut body = String::new();
    for &i in &cfg.i_values {
        let r = ldt_deviation_measure(&c, i, eps_log, cfg.x_grid, l_ref, params)?;
        body.push_str(&serde_json::to_string(&r).expect("reports serialize"));
        body.push('\n');
        reports.push(r);
    }
    let fit = json!({ "l_ref": l_ref, "delta_fit": fit_ldt_delta(&reports, params.1), "sigma": params.1 });
    body.push_str(&fit.to_string());
    body.push('\n');
    Ok(Outcome::ok(body))
}

fn cmd_lemmas(cfg: &RunConfig, ids: &[String]) -> Result<Outcome> {
    if ids.first().map(String::as_str) == Some("list") {
        let mut body = String::new();
        for s in SUITES {
            body.push_str(&serde_json::to_string(s).expect("registry serializes"));
            body.push('\n');
        }
        return Ok(Outcome::ok(body));
    }
    let ids: Vec<&str> = if ids.is_empty() { SUITES.iter().map(|s| s.id).collect() } else { ids.iter().map(String::as_str).collect() };
    let suite = cfg.suite();
    let mut body = String::new();
    let mut failed = Vec::new();
    for id in ids {
        let r = run_lemma_suite(id, &suite)?;
        if !r.passed {
            failed.push(id.to_string());
        }
        body.push_str(&r.json_line());
        body.push('\n');
    }
    let note = (!failed.is_empty()).then(|| format!("failed: {}", failed.join(", ")));
    Ok(Outcome { code: 0, body, note })
}

fn cmd_szego(cfg: &RunConfig) -> Result<Outcome> {
    let lambda = cfg.require_lambda()?;
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Config(format!("key `lambda` = {lambda} must lie in [0, 1) for the Szegő family")));
    }
    let alpha = cfg.alpha_value()?;
    let theta = cfg.potential()?;
    let bound = -0.5 * (1.0 - cfg.epsilon) * (1.0 - lambda).ln();
    let mut out = String::from("t,n,L_n,bound\n");
    for t in cfg.parameters()? {
        let c = QpCocycle::new(alpha, Family::Szego { lambda, k: cfg.k, t }, theta.clone());
        let l = finite_le(&c, cfg.n, cfg.x_grid)?;
        let _ = writeln!(out, "{},{},{},{}", num(t), cfg.n, num(l), num(bound));
    }
    Ok(Outcome::ok(out))
}

fn cmd_thouless(cfg: &RunConfig) -> Result<Outcome> {
    cfg.require_lambda()?;
    let es = cfg.energies()?;
    let eigs = dirichlet_eigenvalues(&schrodinger(cfg, 0.0)?, cfg.n as usize, cfg.x)?;
    let mut out = String::from("E,n,L_thouless,L_n,rel_diff\n");
    for e in es {
        let lt = thouless_le(&eigs, e)?;
        let ln = finite_le(&schrodinger(cfg, e)?, cfg.n, cfg.x_grid)?;
        let _ = writeln!(out, "{},{},{},{},{}", num(e), cfg.n, num(lt), num(ln), num((lt - ln).abs() / ln));
    }
    Ok(Outcome::ok(out))
}

/// Runs a parsed command without touching stdout.
pub fn execute(command: &Command) -> Result<(RunConfig, Outcome)> {
    let cfg = load_config(command.common())?;
    let outcome = match command {
        Command::Le { refine, .. } => cmd_le(&cfg, *refine),
        Command::Ids { .. } => cmd_ids(&cfg),
        Command::Scan { .. } => cmd_scan(&cfg),
        Command::Induct { .. } => cmd_induct(&cfg),
        Command::Ldt { .. } => cmd_ldt(&cfg),
        Command::Lemmas { ids, .. } => cmd_lemmas(&cfg, ids),
        Command::Szego { .. } => cmd_szego(&cfg),
        Command::Thouless { .. } => cmd_thouless(&cfg),
    }?;
    Ok((cfg, outcome))
}

/// `(exit code, stdout, stderr)` for an argument list.
pub fn run_captured<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 { (0, text, String::new()) } else { (code, String::new(), text) };
        }
    };
    if let Some(j) = cli.jobs {
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let (cfg, outcome) = match execute(&cli.command) {
        Ok(r) => r,
        Err(e) => return (e.exit_code(), String::new(), format!("error: {e}\n")),
    };
    let text = format!("{}{}", header(cli.command.name(), &cfg), outcome.body);
    let mut err = outcome.note.map(|n| format!("{n}\n")).unwrap_or_default();
    match &cfg.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                let e = Error::Io(format!("{path}: {e}"));
                err.push_str(&format!("error: {e}\n"));
                return (e.exit_code(), String::new(), err);
            }
            (outcome.code, String::new(), err)
        }
        None => (outcome.code, text, err),
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let (code, out, err) = run_captured(std::env::args_os());
    print!("{out}");
    eprint!("{err}");
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        run_captured(std::iter::once("cocycle-lab").chain(args.iter().copied()))
    }

    #[test]
    fn missing_lambda_is_a_config_error() {
        let (code, out, err) = run(&["le", "-s", "e=3"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("`lambda`"), "{err}");
    }

    #[test]
    fn free_constant_matrix_row() {
        let (code, out, _) = run(&["le", "-s", "lambda=0", "-s", "e=3", "-s", "n=10000", "-s", "x_grid=16"]);
        assert_eq!(code, 0);
        let row = out.lines().last().unwrap();
        let l: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((l - 1.5f64.acosh()).abs() < 1e-3, "{row}");
    }

    #[test]
    fn refine_adds_a_column() {
        let (_, out, _) = run(&["le", "--refine", "-s", "lambda=10", "-s", "e=1", "-s", "n=64", "-s", "x_grid=8"]);
        let lines: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], "E,n,L_n,L_refined");
        assert_eq!(lines[1].split(',').count(), 4);
    }

    #[test]
    fn header_echoes_config_and_version() {
        let (_, out, _) = run(&["ids", "-s", "lambda=5", "-s", "e_range=-1:1:3", "-s", "n=50"]);
        assert!(out.starts_with(&format!("# cocycle-lab {VERSION} ids\n")));
        assert!(out.contains("# lambda = 5.0\n"));
        let mut back = RunConfig::default();
        let echo: String = out.lines().skip(1).filter_map(|l| l.strip_prefix("# ")).map(|l| format!("{l}\n")).collect();
        back.apply_text(&echo).unwrap();
        assert_eq!(back.e_range.unwrap().count, 3);
    }

    #[test]
    fn outputs_are_idempotent() {
        let args = ["lemmas", "avalanche", "-s", "trials=20"];
        assert_eq!(run(&args), run(&args));
    }

    #[test]
    fn lemmas_list_and_unknown() {
        let (code, out, _) = run(&["lemmas", "list"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), SUITES.len());
        assert_eq!(run(&["lemmas", "nope"]).0, 2);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(run(&["frobnicate"]).0, 2);
        // the free truncation of size 3 has eigenvalues 0, ±√2
        let (code, _, err) = run(&["thouless", "-s", "lambda=0", "-s", "e=0", "-s", "n=3"]);
        assert_eq!(code, 3, "{err}");
        let (code, _, err) = run(&["induct", "-s", "lambda=1000", "-s", "t=0", "-s", "depth=1", "-s", "return_cap=2"]);
        assert_eq!(code, 4, "{err}");
    }
}
