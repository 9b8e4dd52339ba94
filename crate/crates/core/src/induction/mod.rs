//! Multiscale induction on the reduced cocycle.
//!
//! Level `i` holds arcs `I_{i,j}` of radius `1/(2ⁱ q_{N+i−1}^{2τ})` around
//! the critical points `C_i`, the return times `r_i^±` into them, and the
//! gap curve `g_{i+1} = s_{r⁺} − u_{r⁻}` sampled on each arc. The zeros (or
//! minima) of `g_{i+1}` are the next critical points `C_{i+1}`.

mod classify;
mod evaluator;
mod schedule;

use std::f64::consts::PI;


use serde::{Deserialize, Serialize};
use serde_json::json;

pub use classify::{
    classify, classify_composed, golden_min, min_gap_floor, type3_bifurcation, zero_crossings, Bifurcation,
    ClassTag, FunctionClass, GapFloor, Margins, Winding, Witness,
};
pub use evaluator::{GapEvaluator, GapPoint, Split};
pub use schedule::{lambda_schedule, schedule_logs, LambdaSchedule};

use crate::arithmetic::{
    cf_expand, circle_dist, default_return_cap, diophantine_report, first_return_interval, max_reliable_depth,
    resonance_scan, CircleInterval, ContinuedFraction,
};
use crate::cocycle::{Family, QpCocycle};
use crate::directions::{adaptive_sample_by, GapCurve};
use crate::error::{Error, Result};
use crate::sl2::{dist_to_zero, wrap_half};

/// Size of numerical noise assumed on gap values; sets the resolution
/// floor of critical points.
pub const GAP_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionConfig {
    pub tau: f64,
    /// Starting index `N`; by default the first with `q_N^{−2τ} < r_start/10`.
    pub n_start: Option<usize>,
    pub r_start: f64,
    pub margins: Margins,
    /// Constant of the coupling schedule.
    pub schedule_c: f64,
    /// Positivity slack of the schedule floor.
    pub epsilon: f64,
    /// Base samples per arc.
    pub grid: usize,
    /// Multiple of the drift bound that is tolerated.
    pub drift_constant: f64,
    pub return_cap: Option<u64>,
    /// Smallest minimum of `|g|` accepted as evidence of hyperbolicity.
    pub uh_floor: f64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig {
            tau: 2.5,
            n_start: None,
            r_start: 0.05,
            margins: Margins::default(),
            schedule_c: 0.3,
            epsilon: 0.1,
            grid: 65,
            drift_constant: 1.0,
            return_cap: None,
            uh_floor: 1e-10,
        }
    }
}

/// Data shared by every level of one run.
#[derive(Debug)]
pub struct RunContext {
    pub cf: ContinuedFraction,
    pub n: usize,
    pub gamma_hat: f64,
    pub schedule: LambdaSchedule,
    pub config: InductionConfig,
    pub t: f64,
    pub lambda: f64,
}

impl RunContext {
    /// `q_{N+i−1}` for level `i`.
    pub fn q_for_level(&self, level: usize) -> Result<u64> {
        let idx = self.n + level - 1;
        self.cf.q.get(idx).copied().ok_or(Error::PrecisionExhausted { requested: idx, reliable: self.cf.depth() })
    }

    pub fn radius_for_level(&self, level: usize) -> Result<f64> {
        let q = self.q_for_level(level)? as f64;
        Ok(1.0 / (2f64.powi(level as i32) * q.powf(2.0 * self.config.tau)))
    }
}

/// One arc `I_{i,j}` and what was measured on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcReport {
    pub interval: CircleInterval,
    /// Critical points of the previous level inside this arc.
    pub sources: Vec<f64>,
    /// The critical points found on this arc.
    pub criticals: Vec<f64>,
    /// Localization accuracy of each entry of `criticals`.
    pub resolution: Vec<f64>,
    /// The extra zero produced by a resonance step.
    pub extra: Option<f64>,
    /// Resonance length and side used for this arc.
    pub split: Option<(u64, char)>,
    pub class: FunctionClass,
    pub gap_min: f64,
    pub drift: f64,
    pub drift_bound: f64,
    pub drift_resolution: f64,
    /// `min (1/r)·log‖A_{±r}(x)‖` over the samples.
    pub rate_plus: f64,
    pub rate_minus: f64,
    pub samples: usize,
    pub unresolved_steps: usize,
    #[serde(skip)]
    pub curve: GapCurve,
}

#[derive(Debug, Clone, Serialize)]
pub struct InductionState {
    pub level: usize,
    pub n: usize,
    pub q: u64,
    pub radius: f64,
    pub arcs: Vec<ArcReport>,
    pub r_plus: u64,
    pub r_minus: u64,
    /// Resonance found at this level.
    pub resonance_k: Option<i64>,
    /// Resonance whose split is in use, possibly inherited.
    pub active_k: Option<i64>,
    pub class: ClassTag,
    /// `log λ_{N+i}`.
    pub lambda_floor: f64,
    pub gap_min: f64,
    pub uh_threshold: f64,
    pub uh_stop: bool,
    pub norm_floor_ok: bool,
    pub drift_ok: bool,
    /// Largest `|c_j ± kα − c′|` over arcs carrying an extra zero.
    pub orbit_relation: Option<f64>,
    #[serde(skip)]
    pub ctx: std::sync::Arc<RunContext>,
}

impl InductionState {
    /// `C_i`.
    pub fn criticals(&self) -> Vec<f64> {
        self.arcs.iter().flat_map(|a| a.sources.iter().copied()).collect()
    }

    /// `C_{i+1}`.
    pub fn next_criticals(&self) -> Vec<f64> {
        self.arcs.iter().flat_map(|a| a.criticals.iter().copied()).collect()
    }

    pub fn intervals(&self) -> Vec<CircleInterval> {
        self.arcs.iter().map(|a| a.interval).collect()
    }

    pub fn drift_max(&self) -> f64 {
        self.arcs.iter().map(|a| a.drift).fold(0.0, f64::max)
    }

    /// The trace record.
    pub fn json_line(&self) -> String {
        let v = json!({
            "level": self.level,
            "intervals": self.arcs.iter().map(|a| [a.interval.center, a.interval.radius]).collect::<Vec<_>>(),
            "criticals": self.criticals(),
            "next_criticals": self.next_criticals(),
            "extras": self.arcs.iter().map(|a| a.extra).collect::<Vec<_>>(),
            "returns": [self.r_plus, self.r_minus],
            "k": self.resonance_k,
            "active_k": self.active_k,
            "class": self.class,
            "arc_classes": self.arcs.iter().map(|a| a.class.tag).collect::<Vec<_>>(),
            "lambda_floor_log": self.lambda_floor,
            "gap_min": self.gap_min,
            "uh_stop": self.uh_stop,
            "norm_floor_ok": self.norm_floor_ok,
            "drift_ok": self.drift_ok,
            "drift_max": self.drift_max(),
        });
        v.to_string()
    }
}

/// `𝒥 = [inf v − 2/λ, sup v + 2/λ]`.
pub fn parameter_range(c: &QpCocycle) -> (f64, f64) {
    let lambda = match c.family {
        Family::Reduced { lambda, .. } | Family::Conjugated { lambda, .. } | Family::Schrodinger { lambda, .. } => lambda,
        _ => f64::INFINITY,
    };
    let (lo, hi) = c.potential.range();
    (lo - 2.0 / lambda, hi + 2.0 / lambda)
}

/// Builds the run context and checks the starting preconditions.
pub fn prepare(c: &QpCocycle, config: &InductionConfig) -> Result<RunContext> {
    let Family::Reduced { t, lambda } = c.family else {
        return Err(Error::Config("the induction runs on the reduced family".into()));
    };
    if lambda < 10.0 {
        return Err(Error::LambdaTooSmall { lambda, min: 10.0 });
    }
    if c.potential.extrema().is_none() {
        return Err(Error::MissingExtrema);
    }
    let (lo, hi) = parameter_range(c);
    if !(lo..=hi).contains(&t) {
        return Err(Error::ParameterOutsideRange { t, lo, hi });
    }
    let depth = max_reliable_depth(c.alpha).min(40);
    let cf = cf_expand(c.alpha, depth)?;
    let tau = config.tau;
    let limit = config.r_start / 10.0;
    let n = match config.n_start {
        Some(n) => {
            let q = *cf.q.get(n).ok_or(Error::PrecisionExhausted { requested: n, reliable: cf.depth() })?;
            let scale = (q as f64).powf(-2.0 * tau);
            if scale >= limit {
                return Err(Error::ScaleTooCoarse { scale, limit });
            }
            n
        }
        None => cf
            .first_index_below(tau, limit)
            .ok_or(Error::PrecisionExhausted { requested: cf.depth() + 1, reliable: cf.depth() })?,
    };
    let gamma_hat = diophantine_report(&cf, tau).map(|d| d.gamma_hat).unwrap_or(1.0).max(1e-6);
    let avail = cf.q.len() - n - 1;
    let schedule = schedule_logs(lambda.ln(), &cf.q[n..], config.schedule_c, avail)?;
    Ok(RunContext { cf, n, gamma_hat, schedule, config: config.clone(), t, lambda })
}

/// The starting critical points: solutions of `v(x) = t`, or the nearest
/// extremum when there are none.
pub fn starting_criticals(c: &QpCocycle, t: f64) -> Vec<f64> {
    let v = &c.potential;
    let n = 4096;
    let h = |x: f64| v.value(x) - t;
    let mut roots = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        let (mut fa, fb) = (h(a), h(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = h(m);
            if fm * fa > 0.0 {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if roots.is_empty() {
        let [z0, z1] = v.extrema().unwrap_or([0.0, 0.5]);
        let pick = if (v.value(z0) - t).abs() <= (v.value(z1) - t).abs() { z0 } else { z1 };
        return vec![pick];
    }
    // first the root where g₁ = atan(t − v) increases
    roots.sort_by_key(|&x| v.jet(x).dv >= 0.0);
    roots
}

/// Level 1: arcs around `v = t`, returns after `q_N − 1`, and `g₂`.
pub fn starting_step(c: &QpCocycle, config: &InductionConfig) -> Result<InductionState> {
    let ctx = std::sync::Arc::new(prepare(c, config)?);
    let sources = starting_criticals(c, ctx.t);
    let res = vec![4.0 * f64::EPSILON; sources.len()];
    build_level(c, ctx.clone(), 1, &sources, &res, None, (1, ctx.lambda.ln()))
}

/// Level `i → i+1`.
pub fn iterate_step(state: &InductionState, c: &QpCocycle) -> Result<InductionState> {
    if state.uh_stop {
        return Ok(state.clone());
    }
    if state.class == ClassTag::Unclassified {
        let clause = state
            .arcs
            .iter()
            .find_map(|a| a.class.witness.violated.clone())
            .unwrap_or_else(|| "unclassified".into());
        return Err(Error::ClassificationLost { level: state.level, clause });
    }
    let sources = state.next_criticals();
    let res: Vec<f64> = state.arcs.iter().flat_map(|a| a.resolution.iter().copied()).collect();
    let prev = (state.r_plus.min(state.r_minus), state.lambda_floor);
    build_level(c, state.ctx.clone(), state.level + 1, &sources, &res, state.active_k, prev)
}

/// Outcome of a multi-level run.
#[derive(Debug, Clone)]
pub struct InductionRun {
    pub states: Vec<InductionState>,
    /// Why the run ended before the requested depth, if it did.
    pub stopped: Option<Error>,
}

impl InductionRun {
    pub fn trace(&self) -> String {
        self.states.iter().map(|s| s.json_line() + "\n").collect()
    }

    pub fn any_type_three(&self) -> bool {
        self.states.iter().any(|s| s.class == ClassTag::TypeIII)
    }

    pub fn uh_stop(&self) -> bool {
        self.states.last().is_some_and(|s| s.uh_stop)
    }
}

/// The starting step followed by up to `steps` iterations; stops early on
/// a hyperbolicity signal or an error, keeping every state produced.
pub fn run_induction(c: &QpCocycle, config: &InductionConfig, steps: usize) -> Result<InductionRun> {
    let mut states = vec![starting_step(c, config)?];
    let mut stopped = None;
    for _ in 0..steps {
        let last = states.last().unwrap();
        if last.uh_stop {
            break;
        }
        match iterate_step(last, c) {
            Ok(s) => states.push(s),
            Err(e) => {
                stopped = Some(e);
                break;
            }
        }
    }
    Ok(InductionRun { states, stopped })
}

fn group_sources(sources: &[f64], res: &[f64], radius: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (&s, &r) in sources.iter().zip(res) {
        match groups.iter_mut().find(|g| g.0.iter().any(|&x| circle_dist(x, s) < 2.0 * radius)) {
            Some(g) => {
                g.0.push(s);
                g.1.push(r);
            }
            None => groups.push((vec![s], vec![r])),
        }
    }
    groups
}

fn arc_center(points: &[f64]) -> f64 {
    let base = points[0];
    let mean = points.iter().map(|&p| crate::arithmetic::circle_diff(p, base)).sum::<f64>() / points.len() as f64;
    (base + mean).rem_euclid(1.0)
}

#[allow(clippy::too_many_arguments)]
fn build_level(
    c: &QpCocycle,
    ctx: std::sync::Arc<RunContext>,
    level: usize,
    sources: &[f64],
    source_res: &[f64],
    inherited_k: Option<i64>,
    prev: (u64, f64),
) -> Result<InductionState> {
    let cfg = &ctx.config;
    let q = ctx.q_for_level(level)?;
    let radius = ctx.radius_for_level(level)?;
    if radius < 1e3 * f64::EPSILON {
        return Err(Error::PrecisionExhausted { requested: ctx.n + level - 1, reliable: ctx.cf.depth() });
    }
    let groups = group_sources(sources, source_res, radius);
    let intervals: Vec<CircleInterval> =
        groups.iter().map(|g| CircleInterval::new(arc_center(&g.0), radius)).collect::<Result<_>>()?;
    let min_time = if level == 1 { q - 1 } else { q };
    let cap = cfg.return_cap.unwrap_or_else(|| default_return_cap(radius, cfg.tau, ctx.gamma_hat, min_time));
    let mut r_plus = u64::MAX;
    let mut r_minus = u64::MAX;
    for i in &intervals {
        r_plus = r_plus.min(first_return_interval(i, &intervals, c.alpha, min_time, cap, 1)?);
        r_minus = r_minus.min(first_return_interval(i, &intervals, c.alpha, min_time, cap, -1)?);
    }
    let resonance = if intervals.len() == 2 { resonance_scan(&intervals[0], &intervals[1], c.alpha, q) } else { None };
    let active_k = if intervals.len() == 2 { resonance.map(|r| r.k).or(inherited_k) } else { None };
    let lambda_floor = ctx.schedule.at(level);
    let drift_bound = cfg.drift_constant * (-0.75 * prev.0 as f64 * prev.1).exp();

    let mut arcs = Vec::with_capacity(intervals.len());
    for (j, (interval, (srcs, sres))) in intervals.iter().zip(&groups).enumerate() {
        let split = match active_k {
            Some(k) if (k.unsigned_abs()) < r_plus.min(r_minus) => Split::for_arc(k, j),
            _ => Split::None,
        };
        arcs.push(measure_arc(c, &ctx, *interval, srcs, sres, split, r_plus, r_minus, lambda_floor, drift_bound)?);
    }

    let gap_min = arcs.iter().map(|a| a.gap_min).fold(f64::INFINITY, f64::min);
    let r = r_plus.min(r_minus) as f64;
    let uh_threshold = (-(r / 10.0) * lambda_floor).exp();
    let uh_stop = gap_min > uh_threshold.max(cfg.uh_floor);
    let class = summarize(&arcs);
    let norm_floor_ok = arcs.iter().all(|a| a.rate_plus >= lambda_floor && a.rate_minus >= lambda_floor);
    let drift_ok = arcs.iter().all(|a| a.drift <= a.drift_bound.max(a.drift_resolution));
    let orbit_relation = orbit_relation(&arcs, active_k, c.alpha);
    let state = InductionState {
        level,
        n: ctx.n,
        q,
        radius,
        arcs,
        r_plus,
        r_minus,
        resonance_k: resonance.map(|r| r.k),
        active_k,
        class,
        lambda_floor,
        gap_min,
        uh_threshold,
        uh_stop,
        norm_floor_ok,
        drift_ok,
        orbit_relation,
        ctx,
    };
    if !state.drift_ok {
        let a = state.arcs.iter().find(|a| a.drift > a.drift_bound.max(a.drift_resolution)).unwrap();
        return Err(Error::DriftViolated { level, drift: a.drift, bound: a.drift_bound.max(a.drift_resolution) });
    }
    Ok(state)
}

fn summarize(arcs: &[ArcReport]) -> ClassTag {
    let tags: Vec<ClassTag> = arcs.iter().map(|a| a.class.tag).collect();
    if tags.contains(&ClassTag::Unclassified) {
        ClassTag::Unclassified
    } else if tags.contains(&ClassTag::TypeIII) {
        ClassTag::TypeIII
    } else if tags.contains(&ClassTag::TypeII) {
        ClassTag::TypeII
    } else {
        tags[0]
    }
}

fn orbit_relation(arcs: &[ArcReport], k: Option<i64>, alpha: f64) -> Option<f64> {
    let k = k?;
    let mut worst: Option<f64> = None;
    for (j, a) in arcs.iter().enumerate() {
        let (Some(extra), Some(other)) = (a.extra, arcs.get(1 - j)) else { continue };
        let shift = match a.split {
            Some((m, 's')) => m as i64,
            Some((m, _)) => -(m as i64),
            None => continue,
        };
        let _ = k;
        let image = crate::cocycle::orbit_point(extra, shift, alpha);
        let d = other.criticals.iter().map(|&c| circle_dist(image, c)).fold(f64::INFINITY, f64::min);
        worst = Some(worst.map_or(d, |w: f64| w.max(d)));
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn measure_arc(
    c: &QpCocycle,
    ctx: &RunContext,
    interval: CircleInterval,
    sources: &[f64],
    source_res: &[f64],
    split: Split,
    r_plus: u64,
    r_minus: u64,
    lambda_floor: f64,
    drift_bound: f64,
) -> Result<ArcReport> {
    let cfg = &ctx.config;
    let center = interval.center;
    let ev = GapEvaluator::new(c, r_plus, r_minus, split, center)?;
    let lifted = ev.is_split();
    let (a, b) = (center - interval.radius, center + interval.radius);
    let min_spacing = (interval.radius * 2f64.powi(-30)).max(4.0 * f64::EPSILON);
    let eval = |x: f64| ev.eval(x.rem_euclid(1.0));
    let (xs, pts) = adaptive_sample_by(eval, |p: &GapPoint| p.g, a, b, cfg.grid, min_spacing, !lifted)?;
    let raw: Vec<f64> = pts.iter().map(|p| p.g).collect();
    let curve = if lifted { GapCurve::from_lift(xs.clone(), raw, min_spacing) } else { GapCurve::from_mod_pi(xs.clone(), &raw)? };
    let shift = curve.g_vals[0] - pts[0].g;
    let g_at = |x: f64| -> Result<f64> { Ok(eval(x)?.g) };

    let f1: Vec<f64> = pts.iter().map(|p| p.f1).collect();
    let has_step = lifted && zero_crossings(&xs, &f1).len() == 1;
    let l_center = pts[pts.len() / 2].l;
    let class = if has_step {
        let f2: Vec<f64> = pts.iter().map(|p| p.f2).collect();
        classify_composed(&xs, &f1, &f2, interval.radius, l_center, &cfg.margins)
    } else {
        classify(&curve, interval.radius, l_center, &cfg.margins)
    };

    let zeros = zero_crossings(&curve.xs, &curve.g_vals);
    let step_x = if has_step { zero_crossings(&xs, &f1).first().copied() } else { None };
    // the zero made by the step is the one nearest its location
    let extra_idx = step_x.and_then(|w| nearest_index(&zeros, w));
    let extra = match extra_idx {
        Some(i) => Some(refine_zero(&curve, zeros[i], &g_at, shift)?.0),
        None => None,
    };
    let plain: Vec<f64> = zeros.iter().enumerate().filter(|(i, _)| Some(*i) != extra_idx).map(|(_, &z)| z).collect();

    let mut criticals = Vec::new();
    let mut resolution = Vec::new();
    let anchors: Vec<f64> = if has_step {
        let f2: Vec<f64> = pts.iter().map(|p| p.f2).collect();
        zero_crossings(&xs, &f2).into_iter().take(1).collect::<Vec<_>>()
    } else {
        Vec::new()
    };
    let anchors = if anchors.is_empty() { sources.iter().map(|&s| unwrap_near(s, center)).collect() } else { anchors };
    let mut used = Vec::new();
    for &anchor in &anchors {
        let pick = if plain.len() == anchors.len() && anchors.len() > 1 {
            let mut sorted_a = anchors.clone();
            sorted_a.sort_by(|p, q| p.total_cmp(q));
            let rank = sorted_a.iter().position(|&v| v == anchor).unwrap();
            Some(rank)
        } else {
            nearest_index(&plain, anchor)
        };
        let (x, res) = match pick {
            Some(i) => refine_zero(&curve, plain[i], &g_at, shift)?,
            None => local_minimum(&curve, anchor, &g_at)?,
        };
        let x = x.rem_euclid(1.0);
        if !used.iter().any(|&u: &f64| circle_dist(u, x) < 1e-15) {
            used.push(x);
            criticals.push(x);
            resolution.push(res);
        }
    }

    let gap_min = if !zeros.is_empty() {
        0.0
    } else {
        let (m, at) = curve.min_abs();
        let refined = local_minimum(&curve, at, &g_at).map(|(x, _)| g_at(x).map(dist_to_zero));
        match refined {
            Ok(Ok(v)) => v.min(m),
            _ => m,
        }
    };

    let mut drift: f64 = 0.0;
    let mut drift_resolution: f64 = 0.0;
    for (x, r) in criticals.iter().zip(&resolution) {
        let (i, d) = sources
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, circle_dist(s, *x)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if d > drift {
            drift = d;
            drift_resolution = r + source_res[i];
        }
    }

    let rate_plus = pts.iter().map(|p| p.log_plus / r_plus as f64).fold(f64::INFINITY, f64::min);
    let rate_minus = pts.iter().map(|p| p.log_minus / r_minus as f64).fold(f64::INFINITY, f64::min);
    let _ = lambda_floor;
    Ok(ArcReport {
        interval,
        sources: sources.to_vec(),
        criticals,
        resolution,
        extra: extra.map(|x| x.rem_euclid(1.0)),
        split: match split {
            Split::None => None,
            Split::Stable(k) => Some((k, 's')),
            Split::Unstable(k) => Some((k, 'u')),
        },
        class,
        gap_min,
        drift,
        drift_bound,
        drift_resolution,
        rate_plus,
        rate_minus,
        samples: xs.len(),
        unresolved_steps: curve.unresolved.len(),
        curve,
    })
}

/// Representative of `x` on the real line nearest `center`.
fn unwrap_near(x: f64, center: f64) -> f64 {
    center + crate::arithmetic::circle_diff(x, center)
}

fn nearest_index(v: &[f64], x: f64) -> Option<usize> {
    v.iter()
        .enumerate()
        .map(|(i, &z)| (i, (z - x).abs()))
        .fold(None, |a: Option<(usize, f64)>, b| match a {
            Some(p) if p.1 <= b.1 => Some(p),
            _ => Some(b),
        })
        .map(|p| p.0)
}

/// Illinois refinement of a crossing located on the sampled curve.
/// Returns the root and its resolution.
fn refine_zero<G: Fn(f64) -> Result<f64>>(curve: &GapCurve, z: f64, g: &G, _shift: f64) -> Result<(f64, f64)> {
    let i = curve.xs.partition_point(|&x| x < z).clamp(1, curve.len() - 1);
    let (mut a, mut b) = (curve.xs[i - 1], curve.xs[i]);
    let (ga, gb) = (curve.g_vals[i - 1], curve.g_vals[i]);
    let level = PI * ((ga.max(gb) / PI).floor());
    let slope = ((gb - ga) / (b - a)).abs();
    if (gb - ga).abs() > 0.75 * PI {
        // an unresolved step: its location is known to the sample spacing
        return Ok((0.5 * (a + b), b - a));
    }
    let h = |x: f64| -> Result<f64> { Ok(wrap_half(g(x)? - level)) };
    let (mut fa, mut fb) = (h(a)?, h(b)?);
    if fa == 0.0 {
        b = a;
    } else if fb == 0.0 {
        a = b;
    } else if fa * fb > 0.0 {
        return Ok((z, b - a));
    }
    let mut last = 0i8;
    for _ in 0..100 {
        if (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let m = (a * fb - b * fa) / (fb - fa);
        let m = if m > a && m < b { m } else { 0.5 * (a + b) };
        let fm = h(m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
            if last == -1 {
                fb *= 0.5;
            }
            last = -1;
        } else {
            b = m;
            fb = fm;
            if last == 1 {
                fa *= 0.5;
            }
            last = 1;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, GAP_NOISE / slope.max(f64::MIN_POSITIVE) + 4.0 * f64::EPSILON * x.abs().max(1.0)))
}

/// Golden-section minimum of `|g|` around the sampled local minimum
/// nearest `anchor`.
fn local_minimum<G: Fn(f64) -> Result<f64>>(curve: &GapCurve, anchor: f64, g: &G) -> Result<(f64, f64)> {
    let d: Vec<f64> = curve.g_vals.iter().map(|&v| dist_to_zero(v)).collect();
    let n = d.len();
    let mut best: Option<usize> = None;
    for i in 0..n {
        let left = i == 0 || d[i] <= d[i - 1];
        let right = i + 1 == n || d[i] <= d[i + 1];
        if left && right {
            let closer = best.is_none_or(|b| (curve.xs[i] - anchor).abs() < (curve.xs[b] - anchor).abs());
            if closer {
                best = Some(i);
            }
        }
    }
    let i = best.unwrap_or(0);
    let a = curve.xs[i.saturating_sub(1)];
    let b = curve.xs[(i + 1).min(n - 1)];
    let err = std::cell::Cell::new(None);
    let f = |x: f64| match g(x) {
        Ok(v) => dist_to_zero(v),
        Err(e) => {
            err.set(Some(e));
            f64::INFINITY
        }
    };
    let (x, fx) = golden_min(f, a, b, 80);
    if let Some(e) = err.take() {
        return Err(e);
    }
    let h = (b - a) / 4.0;
    let curv = ((f(x + h) + f(x - h) - 2.0 * fx) / (h * h)).abs();
    let res = if curv > 0.0 { (2.0 * GAP_NOISE / curv).sqrt() } else { b - a };
    Ok((x, res))
}

/// Scans `t ∈ 𝒥` for values whose level-1 arcs are in resonance.
pub fn scan_resonant_parameters(
    alpha: f64,
    lambda: f64,
    potential: &crate::cocycle::Potential,
    config: &InductionConfig,
    samples: usize,
) -> Result<Vec<(f64, i64)>> {
    let probe = QpCocycle::reduced(alpha, 0.0, lambda, potential.clone());
    let ctx = prepare(&probe, config)?;
    let radius = ctx.radius_for_level(1)?;
    let q = ctx.q_for_level(1)?;
    let (lo, hi) = parameter_range(&probe);
    let mut out = Vec::new();
    for i in 0..samples {
        let t = lo + (hi - lo) * (i as f64 + 0.5) / samples as f64;
        let cc = probe.with_family(Family::Reduced { t, lambda });
        let cs = starting_criticals(&cc, t);
        if cs.len() != 2 || circle_dist(cs[0], cs[1]) < 2.0 * radius {
            continue;
        }
        let i0 = CircleInterval::new(cs[0], radius)?;
        let i1 = CircleInterval::new(cs[1], radius)?;
        if let Some(r) = resonance_scan(&i0, &i1, alpha, q) {
            out.push((t, r.k));
        }
    }
    Ok(out)
}
