//! Type I / II / III tests on sampled gap functions.
//!
//! Zeros are crossings of `πℤ` by the lift. Derivatives come from local
//! least-squares fits over a few neighbouring samples, which keeps the
//! clauses usable on adaptively refined and mildly noisy data.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::directions::GapCurve;
use crate::sl2::dist_to_zero;

/// The classification constants. The defaults keep the starting step of
/// the cosine potential cleanly classified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `c` in `|f| > c·r³` on the opposite-slope set.
    pub c_margin: f64,
    /// Lower bound on `|f″|` where `|f′| < r²`.
    pub curvature: f64,
    /// Half-width, in samples, of the local derivative fits.
    pub window: usize,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { c_margin: 0.05, curvature: 0.05, window: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassTag {
    TypeIPlus,
    TypeIMinus,
    TypeII,
    TypeIII,
    Unclassified,
}

impl ClassTag {
    pub fn is_type_one(self) -> bool {
        matches!(self, ClassTag::TypeIPlus | ClassTag::TypeIMinus)
    }

    pub fn polarity(self) -> i8 {
        match self {
            ClassTag::TypeIPlus => 1,
            ClassTag::TypeIMinus => -1,
            _ => 0,
        }
    }
}

/// A steep step of `±π` in a type III profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub x: f64,
    /// `+1` for a rising step.
    pub sign: i8,
    pub l: f64,
    /// Whether the step was resolved by sampling or taken from a lift.
    pub resolved: bool,
}

/// What the tests measured.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    pub zeros: Vec<f64>,
    pub criticals: Vec<f64>,
    pub slope_at_zero: Option<f64>,
    /// `min |f′|` on `B(x₀, r/2)`.
    pub min_slope_near_zero: Option<f64>,
    /// `min |f|` where `f′·f′(x₀) ≤ 0`.
    pub min_abs_opposite: Option<f64>,
    pub curvature: Option<f64>,
    pub winding: Option<Winding>,
    /// Polarity of the background for type III.
    pub background_polarity: Option<i8>,
    /// Sup-norm slack before a clause on values could flip.
    pub margin: f64,
    /// First failing clause when unclassified.
    pub violated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub tag: ClassTag,
    pub witness: Witness,
}

impl FunctionClass {
    fn unclassified(violated: String) -> Self {
        FunctionClass {
            tag: ClassTag::Unclassified,
            witness: Witness { violated: Some(violated), ..Witness::default() },
        }
    }
}

/// Locations where the lift crosses a multiple of π, by linear
/// interpolation; a step crossing several multiples contributes several.
pub fn zero_crossings(xs: &[f64], vals: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        let (a, b) = (vals[i], vals[i + 1]);
        let (ka, kb) = ((a / PI).floor() as i64, (b / PI).floor() as i64);
        if ka == kb {
            continue;
        }
        let (lo, hi) = if ka < kb { (ka + 1, kb) } else { (kb + 1, ka) };
        for m in lo..=hi {
            let level = m as f64 * PI;
            let t = (level - a) / (b - a);
            out.push(xs[i] + t * (xs[i + 1] - xs[i]));
        }
    }
    out
}

/// Local least-squares slope and curvature at every sample.
fn local_fits(xs: &[f64], vals: &[f64], w: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(w);
        let hi = (i + w + 1).min(n);
        let (lo, hi) = if hi - lo < 2 * w + 1 && n > 2 * w {
            if lo == 0 {
                (0, 2 * w + 1)
            } else {
                (n - 2 * w - 1, n)
            }
        } else {
            (lo, hi)
        };
        let x0 = xs[i];
        let h = (xs[hi - 1] - xs[lo]).max(f64::MIN_POSITIVE);
        // quadratic fit in the scaled variable z = (x − x0)/h
        let mut s = [0.0f64; 5];
        let mut t = [0.0f64; 3];
        for j in lo..hi {
            let z = (xs[j] - x0) / h;
            let y = vals[j] - vals[i];
            let mut p = 1.0;
            for k in 0..5 {
                s[k] += p;
                if k < 3 {
                    t[k] += p * y;
                }
                p *= z;
            }
        }
        let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
        match solve3(m, t) {
            Some(c) if hi - lo >= 3 => {
                d1[i] = c[1] / h;
                d2[i] = 2.0 * c[2] / (h * h);
            }
            _ => {
                let j = if i + 1 < n { i + 1 } else { i - 1 };
                d1[i] = (vals[j] - vals[i]) / (xs[j] - xs[i]);
            }
        }
    }
    (d1, d2)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for r in 0..3 {
            a[r][k] = b[r];
        }
        *o = det(a) / d;
    }
    Some(out)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Zeros of `f′`: sign changes among slopes exceeding `floor` in size.
fn slope_sign_changes(xs: &[f64], d1: &[f64], floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &s) in d1.iter().enumerate() {
        if s.abs() <= floor {
            continue;
        }
        if let Some((j, prev)) = last {
            if prev.signum() != s.signum() {
                let t = prev / (prev - s);
                out.push(xs[j] + t * (xs[i] - xs[j]));
            }
        }
        last = Some((i, s));
    }
    out
}

struct Profile<'a> {
    xs: &'a [f64],
    vals: &'a [f64],
    center: f64,
    r: f64,
}

fn type_one(p: &Profile, m: &Margins) -> std::result::Result<FunctionClass, String> {
    let zeros = zero_crossings(p.xs, p.vals);
    if zeros.len() != 1 {
        return Err(format!("type I needs exactly one zero, found {}", zeros.len()));
    }
    let x0 = zeros[0];
    if (x0 - p.center).abs() > p.r / 3.0 {
        return Err(format!("type I zero at {x0} lies outside I/3"));
    }
    let (d1, _) = local_fits(p.xs, p.vals, m.window);
    let r2 = p.r * p.r;
    let crit = slope_sign_changes(p.xs, &d1, r2);
    if crit.len() > 1 {
        return Err(format!("type I allows one critical point, found {}", crit.len()));
    }
    let slope0 = interp(p.xs, &d1, x0);
    let near: Vec<f64> = p
        .xs
        .iter()
        .zip(&d1)
        .filter(|(&x, _)| (x - x0).abs() <= p.r / 2.0)
        .map(|(_, d)| d.abs())
        .collect();
    let min_slope = near.iter().copied().fold(slope0.abs(), f64::min);
    if min_slope <= r2 {
        return Err(format!("|f′| = {min_slope} ≤ r² near the zero"));
    }
    let floor = m.c_margin * p.r.powi(3);
    let opp = p
        .xs
        .iter()
        .zip(p.vals)
        .zip(&d1)
        .filter(|(_, &d)| d * slope0 <= 0.0)
        .map(|((_, &v), _)| dist_to_zero(v))
        .fold(f64::INFINITY, f64::min);
    if opp <= floor {
        return Err(format!("|f| = {opp} ≤ c·r³ where the slope reverses"));
    }
    let away = p
        .xs
        .iter()
        .zip(p.vals)
        .filter(|(&x, _)| (x - x0).abs() > p.r / 6.0)
        .map(|(_, &v)| dist_to_zero(v))
        .fold(f64::INFINITY, f64::min);
    let slack_zero = (p.r / 3.0 - (x0 - p.center).abs()) * min_slope;
    let margin = [opp - floor, away, slack_zero].into_iter().fold(f64::INFINITY, f64::min);
    let tag = if slope0 > 0.0 { ClassTag::TypeIPlus } else { ClassTag::TypeIMinus };
    Ok(FunctionClass {
        tag,
        witness: Witness {
            zeros,
            criticals: crit,
            slope_at_zero: Some(slope0),
            min_slope_near_zero: Some(min_slope),
            min_abs_opposite: Some(opp),
            margin,
            ..Witness::default()
        },
    })
}

fn type_two(p: &Profile, m: &Margins) -> std::result::Result<FunctionClass, String> {
    let zeros = zero_crossings(p.xs, p.vals);
    if zeros.len() > 2 {
        return Err(format!("type II allows two zeros, found {}", zeros.len()));
    }
    let half = p.r / 2.0;
    if let Some(z) = zeros.iter().find(|&&z| (z - p.center).abs() > half) {
        return Err(format!("type II zero at {z} lies outside I/2"));
    }
    let (d1, d2) = local_fits(p.xs, p.vals, m.window);
    let r2 = p.r * p.r;
    let crit = slope_sign_changes(p.xs, &d1, r2);
    if crit.len() != 1 {
        return Err(format!("type II needs one critical point, found {}", crit.len()));
    }
    let xc = crit[0];
    if (xc - p.center).abs() > half {
        return Err(format!("type II critical point at {xc} lies outside I/2"));
    }
    let spacing = p.xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if zeros.len() == 1 && (zeros[0] - xc).abs() > 2.0 * spacing {
        return Err("a single type II zero must be the critical point".into());
    }
    let curv = interp(p.xs, &d2, xc);
    let mut worst = curv.abs();
    for (&s, &c) in d1.iter().zip(&d2) {
        if s.abs() < r2 {
            worst = worst.min(c.abs());
        }
    }
    if worst <= m.curvature {
        return Err(format!("|f″| = {worst} ≤ c where |f′| < r²"));
    }
    let inner = zeros.iter().map(|z| half - (z - p.center).abs()).fold(half, f64::min);
    let away = p
        .xs
        .iter()
        .zip(p.vals)
        .filter(|(&x, _)| (x - p.center).abs() > half)
        .map(|(_, &v)| dist_to_zero(v))
        .fold(f64::INFINITY, f64::min);
    let slope_scale = d1.iter().map(|d| d.abs()).fold(0.0, f64::max);
    Ok(FunctionClass {
        tag: ClassTag::TypeII,
        witness: Witness {
            zeros,
            criticals: crit,
            curvature: Some(curv),
            margin: away.min(inner * slope_scale),
            ..Witness::default()
        },
    })
}

fn type_one_or_two(p: &Profile, m: &Margins) -> FunctionClass {
    match type_one(p, m) {
        Ok(c) => c,
        Err(e1) => match type_two(p, m) {
            Ok(c) => c,
            Err(e2) => FunctionClass::unclassified(format!("{e1}; {e2}")),
        },
    }
}

/// Finds `±π` steps: windows of two coarse cells whose net change exceeds
/// `3π/4`, merged when adjacent.
fn find_windings(g: &GapCurve, cells: usize) -> Vec<(f64, f64, i64)> {
    let a = g.xs[0];
    let b = *g.xs.last().unwrap();
    let h = (b - a) / cells as f64;
    let at = |k: usize| g.eval(if k >= cells { b } else { a + k as f64 * h });
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for k in 0..cells.saturating_sub(1) {
        if (at(k + 2) - at(k)).abs() > 0.75 * PI {
            match runs.last_mut() {
                Some(r) if r.1 >= k => r.1 = k + 2,
                _ => runs.push((k, k + 2)),
            }
        }
    }
    runs.into_iter()
        .map(|(k0, k1)| {
            let (x0, x1) = (a + k0 as f64 * h, if k1 >= cells { b } else { a + k1 as f64 * h });
            let net = ((at(k1) - at(k0)) / PI).round() as i64;
            (x0, x1, net)
        })
        .collect()
}

/// Classifies a sampled curve on `B(center, r)`, with `center` the middle
/// of the sampled range.
///
/// A single `±π` step makes the curve a type III candidate: the step is
/// removed, the background is bridged linearly across `B(x_w, ρ)` with
/// `ρ = min(l^{−1/2}, r/8)`, and the background must be type I of the
/// opposite polarity to the step.
pub fn classify(f: &GapCurve, r: f64, l: f64, margins: &Margins) -> FunctionClass {
    if f.len() < 8 {
        return FunctionClass::unclassified("too few samples".into());
    }
    let center = 0.5 * (f.xs[0] + f.xs[f.len() - 1]);
    let windings = find_windings(f, 64);
    match windings.as_slice() {
        [] => type_one_or_two(&Profile { xs: &f.xs, vals: &f.g_vals, center, r }, margins),
        [(x0, x1, net)] if net.abs() == 1 => {
            let sign = *net as i8;
            let xw = step_location(f, *x0, *x1);
            let rho = l.powf(-0.5).min(r / 8.0);
            let mut xs = Vec::with_capacity(f.len());
            let mut vals = Vec::with_capacity(f.len());
            for (&x, &g) in f.xs.iter().zip(&f.g_vals) {
                if (x - xw).abs() <= rho {
                    continue;
                }
                let add = if sign > 0 { x < xw } else { x > xw };
                xs.push(x);
                vals.push(if add { g + PI } else { g });
            }
            let resolved = !f.unresolved.iter().any(|&i| f.xs[i] <= xw && xw <= f.xs[i + 1]);
            let w = Winding { x: xw, sign, l, resolved };
            classify_background(&xs, &vals, center, r, w, margins)
        }
        _ => FunctionClass::unclassified(format!("{} steps of ±π; at most one allowed", windings.len())),
    }
}

/// Classifies a type III candidate from an explicit decomposition
/// `f = atan(l²·tan f1) − π/2 + f2` sampled on common points.
pub fn classify_composed(xs: &[f64], f1: &[f64], f2: &[f64], r: f64, l: f64, margins: &Margins) -> FunctionClass {
    let center = 0.5 * (xs[0] + xs[xs.len() - 1]);
    let z1 = zero_crossings(xs, f1);
    if z1.len() != 1 {
        return FunctionClass::unclassified(format!("step factor needs one zero, found {}", z1.len()));
    }
    let (d1, _) = local_fits(xs, f1, margins.window);
    let s1 = interp(xs, &d1, z1[0]);
    if d1.iter().any(|d| d * s1 <= 0.0) {
        return FunctionClass::unclassified("step factor is not monotone".into());
    }
    let w = Winding { x: z1[0], sign: if s1 > 0.0 { 1 } else { -1 }, l, resolved: true };
    // the background varies on scale r; the refinement near the step only adds noise to its fits
    let min_gap = r / 512.0;
    let mut bx = Vec::new();
    let mut bv = Vec::new();
    for (i, (&x, &v)) in xs.iter().zip(f2).enumerate() {
        if i == 0 || i + 1 == xs.len() || x - bx.last().copied().unwrap_or(f64::NEG_INFINITY) >= min_gap {
            bx.push(x);
            bv.push(v);
        }
    }
    classify_background(&bx, &bv, center, r, w, margins)
}

fn classify_background(xs: &[f64], vals: &[f64], center: f64, r: f64, w: Winding, m: &Margins) -> FunctionClass {
    if xs.len() < 8 {
        return FunctionClass::unclassified("background has too few samples".into());
    }
    let bg = match type_one(&Profile { xs, vals, center, r }, m) {
        Ok(c) => c,
        Err(e) => return FunctionClass::unclassified(format!("type III background: {e}")),
    };
    let pol = bg.tag.polarity();
    if pol == w.sign {
        return FunctionClass::unclassified("type III background has the polarity of the step".into());
    }
    let mut witness = bg.witness;
    witness.winding = Some(w);
    witness.background_polarity = Some(pol);
    FunctionClass { tag: ClassTag::TypeIII, witness }
}

fn step_location(f: &GapCurve, x0: f64, x1: f64) -> f64 {
    let (g0, g1) = (f.eval(x0), f.eval(x1));
    let mid = 0.5 * (g0 + g1);
    let rising = g1 > g0;
    for i in 0..f.len() - 1 {
        let (a, b) = (f.g_vals[i], f.g_vals[i + 1]);
        if f.xs[i + 1] < x0 || f.xs[i] > x1 {
            continue;
        }
        if (rising && a <= mid && b > mid) || (!rising && a >= mid && b < mid) {
            let t = (mid - a) / (b - a);
            return f.xs[i] + t * (f.xs[i + 1] - f.xs[i]);
        }
    }
    0.5 * (x0 + x1)
}

/// Measured `min |f|` outside `B(X, r′)` against `c·r′³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapFloor {
    pub floor_ok: bool,
    pub measured_min: f64,
    pub floor: f64,
}

pub fn min_gap_floor(f: &GapCurve, critical: &[f64], r_prime: f64, margins: &Margins) -> GapFloor {
    let measured_min = f
        .xs
        .iter()
        .zip(&f.g_vals)
        .filter(|(&x, _)| critical.iter().all(|&c| (x - c).abs() > r_prime))
        .map(|(_, &g)| dist_to_zero(g))
        .fold(f64::INFINITY, f64::min);
    let floor = margins.c_margin * r_prime.powi(3);
    GapFloor { floor_ok: measured_min > floor, measured_min, floor }
}

/// Outcome of translating the background of a type III profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub d_values: Vec<f64>,
    pub zero_counts: Vec<usize>,
    /// Estimated translation at which the two zeros merge.
    pub d0_hat: f64,
    /// Zero count at `d0_hat`, tangential touches included.
    pub count_at_d0: usize,
}

/// Zero counts of `atan(l²·tan f1(x)) − π/2 + f2(x − d)` on `[a, b]` for
/// each `d`, and the critical translation found by bisection on the
/// transition from no zeros to some.
///
/// `f2` has its zero at the origin, so `d` is the position of the
/// translated zero. Sampling is geometric around `0`, where the step of
/// `f1` is assumed to sit, down to `l⁻³`.
pub fn type3_bifurcation<F1, F2>(f1: F1, f2: F2, l: f64, domain: (f64, f64), d_values: &[f64]) -> Bifurcation
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let grid = bifurcation_grid(l, domain);
    let composed = |x: f64, d: f64| (l * l * f1(x).tan()).atan() - FRAC_PI_2 + f2(x - d);
    let count = |d: f64, touches: bool| {
        let vals: Vec<f64> = grid.iter().map(|&x| composed(x, d)).collect();
        let mut n = zero_crossings(&grid, &vals).len();
        if touches && n == 0 {
            n += tangential_touches(&grid, &vals, |x| composed(x, d), d);
        }
        n
    };
    let zero_counts: Vec<usize> = d_values.iter().map(|&d| count(d, true)).collect();
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    let mut sorted: Vec<f64> = d_values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    for &d in &sorted {
        if count(d, false) == 0 {
            lo = d;
        } else if !lo.is_nan() {
            hi = d;
            break;
        }
    }
    let (d0_hat, last_empty) = if lo.is_nan() || hi.is_nan() {
        (f64::NAN, f64::NAN)
    } else {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if count(mid, false) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), lo)
    };
    // on the crossing-free side of the bracket the double zero shows as a touch
    let count_at_d0 = if d0_hat.is_nan() { 0 } else { count(last_empty, true) };
    Bifurcation { d_values: d_values.to_vec(), zero_counts, d0_hat, count_at_d0 }
}

fn bifurcation_grid(l: f64, (a, b): (f64, f64)) -> Vec<f64> {
    let mut xs = Vec::new();
    let tiny = l.powi(-3);
    let n = 4000;
    for side in [-1.0f64, 1.0] {
        let top = if side < 0.0 { -a } else { b };
        if top <= tiny {
            continue;
        }
        let ratio = (top / tiny).ln();
        for k in 0..=n {
            xs.push(side * tiny * (ratio * k as f64 / n as f64).exp());
        }
    }
    xs.push(0.0);
    let uniform = 4000;
    for k in 0..=uniform {
        xs.push(a + (b - a) * k as f64 / uniform as f64);
    }
    xs.retain(|&x| x >= a && x <= b);
    xs.sort_by(|p, q| p.total_cmp(q));
    xs.dedup();
    xs
}

/// Local minima of the distance to `πℤ` that refine to a touch.
fn tangential_touches<F: Fn(f64) -> f64>(xs: &[f64], vals: &[f64], f: F, d: f64) -> usize {
    let tol = 1e-12 + 1e-9 * d.abs();
    let dist: Vec<f64> = vals.iter().map(|&v| dist_to_zero(v)).collect();
    let mut n = 0;
    for i in 1..xs.len() - 1 {
        if dist[i] <= dist[i - 1] && dist[i] <= dist[i + 1] {
            let m = golden_min(|x| dist_to_zero(f(x)), xs[i - 1], xs[i + 1], 200);
            if m.1 <= tol {
                n += 1;
            }
        }
    }
    n
}

/// Golden-section minimum of `f` on `[a, b]`: `(argmin, min)`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
