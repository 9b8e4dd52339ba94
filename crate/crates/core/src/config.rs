//! Flat `key = value` run configuration shared by every subcommand.
//!
//! A config file holds one assignment per line; `#` starts a comment.
//! Overrides use the same syntax and are applied after the file. The echo
//! at the head of each output lists every key as `# key = value`; with the
//! `# ` prefix stripped it is a config file that reproduces the run.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::cocycle::Potential;
use crate::error::{Error, Result};
use crate::harness::{SuiteConfig, TraceConfig};
use crate::induction::{InductionConfig, Margins};

/// `lo:hi:count`, `count` evenly spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64).collect()
    }
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad range `{s}`, expected lo:hi:count"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, count] = parts[..] else { return Err(bad()) };
        let r = Range {
            lo: lo.parse().map_err(|_| bad())?,
            hi: hi.parse().map_err(|_| bad())?,
            count: count.parse().map_err(|_| bad())?,
        };
        if r.count == 0 || !(r.lo <= r.hi) {
            return Err(bad());
        }
        Ok(r)
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}:{:?}:{}", self.lo, self.hi, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub potential: String,
    /// `golden`, `silver`, `p/q` or a decimal.
    pub alpha: String,
    pub lambda: Option<f64>,
    pub e: Option<f64>,
    pub e_range: Option<Range>,
    /// Hull grid size when no energies are given.
    pub points: usize,
    pub t: Option<f64>,
    pub t_range: Option<Range>,
    /// Transfer length, truncation size, or scan scale.
    pub n: u64,
    pub x_grid: usize,
    /// Phases the IDS is averaged over.
    pub phases: usize,
    /// Phase of the single truncation used by `thouless`.
    pub x: f64,
    pub depth: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub r_start: f64,
    pub n_start: Option<usize>,
    pub schedule_c: f64,
    pub c_margin: f64,
    pub curvature: f64,
    pub window: usize,
    pub arc_grid: usize,
    pub drift_constant: f64,
    pub return_cap: Option<u64>,
    pub uh_floor: f64,
    pub seed: u64,
    pub trials: Option<usize>,
    /// Comma-separated scales of the deviation measure.
    pub i_values: Vec<u64>,
    /// Defaults to `0.05·log λ`.
    pub eps_log: Option<f64>,
    /// Refinement scale of the reference exponent.
    pub l_ref: u64,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    /// Szegő frequency shift.
    pub k: i64,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ind = InductionConfig::default();
        let suite = SuiteConfig::default();
        RunConfig {
            potential: "cos".into(),
            alpha: "golden".into(),
            lambda: None,
            e: None,
            e_range: None,
            points: 200,
            t: None,
            t_range: None,
            n: 10_000,
            x_grid: 2048,
            phases: 16,
            x: 0.0,
            depth: 3,
            tau: ind.tau,
            epsilon: ind.epsilon,
            eta: suite.eta,
            r_start: ind.r_start,
            n_start: None,
            schedule_c: ind.schedule_c,
            c_margin: ind.margins.c_margin,
            curvature: ind.margins.curvature,
            window: ind.margins.window,
            arc_grid: ind.grid,
            drift_constant: ind.drift_constant,
            return_cap: None,
            uh_floor: ind.uh_floor,
            seed: suite.seed,
            trials: None,
            i_values: vec![100, 1000, 10_000],
            eps_log: None,
            l_ref: 256,
            delta: None,
            sigma: None,
            k: 0,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for key `{key}`")))
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn opt<T: std::fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), |x| format!("{x:?}"))
}

impl RunConfig {
    /// Assigns one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let key = key.trim();
        match key {
            "potential" => self.potential = v.into(),
            "alpha" => self.alpha = v.into(),
            "lambda" => self.lambda = parse_opt(key, v)?,
            "e" => self.e = parse_opt(key, v)?,
            "e_range" => self.e_range = parse_opt(key, v)?,
            "points" => self.points = parse(key, v)?,
            "t" => self.t = parse_opt(key, v)?,
            "t_range" => self.t_range = parse_opt(key, v)?,
            "n" => self.n = parse(key, v)?,
            "x_grid" => self.x_grid = parse(key, v)?,
            "phases" => self.phases = parse(key, v)?,
            "x" => self.x = parse(key, v)?,
            "depth" => self.depth = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "eta" => self.eta = parse(key, v)?,
            "r_start" => self.r_start = parse(key, v)?,
            "n_start" => self.n_start = parse_opt(key, v)?,
            "schedule_c" => self.schedule_c = parse(key, v)?,
            "c_margin" => self.c_margin = parse(key, v)?,
            "curvature" => self.curvature = parse(key, v)?,
            "window" => self.window = parse(key, v)?,
            "arc_grid" => self.arc_grid = parse(key, v)?,
            "drift_constant" => self.drift_constant = parse(key, v)?,
            "return_cap" => self.return_cap = parse_opt(key, v)?,
            "uh_floor" => self.uh_floor = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "trials" => self.trials = parse_opt(key, v)?,
            "i_values" => {
                self.i_values = v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?;
            }
            "eps_log" => self.eps_log = parse_opt(key, v)?,
            "l_ref" => self.l_ref = parse(key, v)?,
            "delta" => self.delta = parse_opt(key, v)?,
            "sigma" => self.sigma = parse_opt(key, v)?,
            "k" => self.k = parse(key, v)?,
            "output" => self.output = if v == "none" { None } else { Some(v.into()) },
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` assignment.
    pub fn assign(&mut self, line: &str) -> Result<()> {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{line}`")))?;
        self.set(k, v)
    }

    /// Applies every assignment in `text`, skipping blanks and `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                self.assign(line)?;
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut c = RunConfig::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("potential", self.potential.clone()),
            ("alpha", self.alpha.clone()),
            ("lambda", opt(&self.lambda)),
            ("e", opt(&self.e)),
            ("e_range", self.e_range.map_or("none".into(), |r| r.to_string())),
            ("points", self.points.to_string()),
            ("t", opt(&self.t)),
            ("t_range", self.t_range.map_or("none".into(), |r| r.to_string())),
            ("n", self.n.to_string()),
            ("x_grid", self.x_grid.to_string()),
            ("phases", self.phases.to_string()),
            ("x", format!("{:?}", self.x)),
            ("depth", self.depth.to_string()),
            ("tau", format!("{:?}", self.tau)),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("eta", format!("{:?}", self.eta)),
            ("r_start", format!("{:?}", self.r_start)),
            ("n_start", opt(&self.n_start)),
            ("schedule_c", format!("{:?}", self.schedule_c)),
            ("c_margin", format!("{:?}", self.c_margin)),
            ("curvature", format!("{:?}", self.curvature)),
            ("window", self.window.to_string()),
            ("arc_grid", self.arc_grid.to_string()),
            ("drift_constant", format!("{:?}", self.drift_constant)),
            ("return_cap", opt(&self.return_cap)),
            ("uh_floor", format!("{:?}", self.uh_floor)),
            ("seed", self.seed.to_string()),
            ("trials", opt(&self.trials)),
            ("i_values", self.i_values.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
            ("eps_log", opt(&self.eps_log)),
            ("l_ref", self.l_ref.to_string()),
            ("delta", opt(&self.delta)),
            ("sigma", opt(&self.sigma)),
            ("k", self.k.to_string()),
            ("output", self.output.clone().unwrap_or_else(|| "none".into())),
        ]
    }

    /// The config as `# key = value` lines.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }

    pub fn require_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::Config("missing required key `lambda`".into()))
    }

    pub fn require_t(&self) -> Result<f64> {
        self.t.ok_or_else(|| Error::Config("missing required key `t`".into()))
    }

    pub fn alpha_value(&self) -> Result<f64> {
        Ok(Frequency::parse(&self.alpha)?.value)
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::by_name(&self.potential)
    }

    /// `e`, else `e_range`; an error naming both keys if neither is set.
    pub fn energies(&self) -> Result<Vec<f64>> {
        match (self.e, self.e_range) {
            (Some(e), None) => Ok(vec![e]),
            (None, Some(r)) => Ok(r.points()),
            (Some(_), Some(_)) => Err(Error::Config("keys `e` and `e_range` are exclusive".into())),
            (None, None) => Err(Error::Config("missing required key `e` or `e_range`".into())),
        }
    }

    pub fn parameters(&self) -> Result<Vec<f64>> {
        match (self.t, self.t_range) {
            (Some(t), None) => Ok(vec![t]),
            (None, Some(r)) => Ok(r.points()),
            (Some(_), Some(_)) => Err(Error::Config("keys `t` and `t_range` are exclusive".into())),
            (None, None) => Err(Error::Config("missing required key `t` or `t_range`".into())),
        }
    }

    pub fn induction(&self) -> InductionConfig {
        InductionConfig {
            tau: self.tau,
            n_start: self.n_start,
            r_start: self.r_start,
            margins: Margins { c_margin: self.c_margin, curvature: self.curvature, window: self.window },
            schedule_c: self.schedule_c,
            epsilon: self.epsilon,
            grid: self.arc_grid,
            drift_constant: self.drift_constant,
            return_cap: self.return_cap,
            uh_floor: self.uh_floor,
        }
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig { seed: self.seed, trials: self.trials, x_grid: self.x_grid, eta: self.eta }
    }

    pub fn trace(&self, t: f64) -> Result<TraceConfig> {
        Ok(TraceConfig {
            alpha: self.alpha_value()?,
            lambda: self.require_lambda()?,
            t,
            potential: self.potential.clone(),
            induction: self.induction(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_reads_back() {
        let mut c = RunConfig::default();
        c.apply_text("lambda = 1000\ne_range = -2:2:5 # grid\nalpha = 3/8\ni_values = 10, 20\nreturn_cap = 77").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.echo().replace("# ", "")).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.energies().unwrap(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn errors_name_the_key() {
        let c = RunConfig::default();
        assert!(c.require_lambda().unwrap_err().to_string().contains("`lambda`"));
        let mut c = RunConfig::default();
        assert!(c.assign("lamda = 3").unwrap_err().to_string().contains("`lamda`"));
        assert!(c.assign("n = -4").unwrap_err().to_string().contains("`n`"));
        assert!(c.assign("e_range = 1:0:3").is_err());
    }
}
