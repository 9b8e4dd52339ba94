//! Stable and unstable direction fields, gap curves, and the two-matrix
//! concatenation checks built on them.
//!
//! For depth `n`, `s_n(x) = s(A_n(x))` and `u_n(x) = s(A_{−n}(x))`; the gap
//! curve is a continuous real lift of `s_{n⁺} − u_{n⁻}`, whose crossings of
//! `πℤ` are the places where the two directions align.

mod lemmas;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lemmas::{
    almost_invariance_residuals, concat_floor_check, ess_change_predict, AlmostInvariance, ConcatReport,
    DirectionPrediction,
};

use crate::arithmetic::CircleInterval;
use crate::cocycle::{transfer, QpCocycle};
use crate::error::{Error, Result};
use crate::sl2::{wrap_half, ProjAngle};

/// Sampled `s_{n⁺}` and `u_{n⁻}` on an arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionField {
    pub interval: CircleInterval,
    /// Sample points, lifted to be increasing across the arc.
    pub xs: Vec<f64>,
    pub s_vals: Vec<ProjAngle>,
    pub u_vals: Vec<ProjAngle>,
    pub n_plus: u64,
    pub n_minus: u64,
    pub log_norms_plus: Vec<f64>,
    pub log_norms_minus: Vec<f64>,
}

/// Evaluates `(s_{n⁺}(x), log‖A_{n⁺}‖, u_{n⁻}(x), log‖A_{−n⁻}‖)`.
pub fn directions_at(c: &QpCocycle, x: f64, n_plus: u64, n_minus: u64) -> Result<(ProjAngle, f64, ProjAngle, f64)> {
    let fwd = transfer(c, x, n_plus as i64)?;
    let bwd = transfer(c, x, -(n_minus as i64))?;
    let ps = fwd.polar().map_err(|e| at_x(e, x))?;
    let pu = bwd.polar().map_err(|e| at_x(e, x))?;
    Ok((ps.s, fwd.log_norm, pu.s, bwd.log_norm))
}

fn at_x(e: Error, x: f64) -> Error {
    match e {
        Error::DegenerateNorm { norm } => {
            Error::DegenerateData(format!("norm {norm} too close to 1 at x = {x}"))
        }
        other => other,
    }
}

/// Samples both direction fields on a uniform grid over `interval`.
pub fn sample_directions(
    c: &QpCocycle,
    interval: &CircleInterval,
    n_plus: u64,
    n_minus: u64,
    grid: usize,
) -> Result<DirectionField> {
    if grid < 16 {
        return Err(Error::Config(format!("grid = {grid}; need at least 16")));
    }
    if n_plus == 0 || n_minus == 0 {
        return Err(Error::Config("direction depths must be at least 1".into()));
    }
    let h = 2.0 * interval.radius / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|i| interval.left() + i as f64 * h).collect();
    let rows: Vec<_> = xs
        .par_iter()
        .map(|&x| directions_at(c, x.rem_euclid(1.0), n_plus, n_minus))
        .collect::<Result<_>>()?;
    Ok(DirectionField {
        interval: *interval,
        xs,
        s_vals: rows.iter().map(|r| r.0).collect(),
        u_vals: rows.iter().map(|r| r.2).collect(),
        n_plus,
        n_minus,
        log_norms_plus: rows.iter().map(|r| r.1).collect(),
        log_norms_minus: rows.iter().map(|r| r.3).collect(),
    })
}

/// Largest step between successive samples accepted by the unwrapper.
pub const UNWRAP_LIMIT: f64 = FRAC_PI_4;

/// A continuous real lift of a gap function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub xs: Vec<f64>,
    pub g_vals: Vec<f64>,
    /// Multiple of π added to the first raw sample.
    pub base_branch: i64,
    /// Indices `i` whose step `g[i] → g[i+1]` stays near ±π at the finest
    /// sampling allowed; the lift there was taken from an explicit branch.
    pub unresolved: Vec<usize>,
}

impl GapCurve {
    /// Unwraps mod-π samples by nearest branch.
    ///
    /// Steps larger than [`UNWRAP_LIMIT`] after wrapping mean the sampling
    /// cannot follow the branch; that is reported as [`Error::UnwrapFailure`].
    pub fn from_mod_pi(xs: Vec<f64>, raw: &[f64]) -> Result<Self> {
        if xs.len() != raw.len() || xs.is_empty() {
            return Err(Error::DegenerateData("gap samples are empty or mismatched".into()));
        }
        let first = wrap_half(raw[0]);
        let base_branch = ((first - raw[0]) / PI).round() as i64;
        let mut g = Vec::with_capacity(raw.len());
        g.push(first);
        for i in 1..raw.len() {
            let d = wrap_half(raw[i] - raw[i - 1]);
            if d.abs() > UNWRAP_LIMIT {
                return Err(Error::UnwrapFailure { x: xs[i] });
            }
            g.push(g[i - 1] + d);
        }
        Ok(GapCurve { xs, g_vals: g, base_branch, unresolved: Vec::new() })
    }

    /// A curve from values that are already a continuous lift.
    pub fn from_lift(xs: Vec<f64>, g_vals: Vec<f64>, min_spacing: f64) -> Self {
        let unresolved = (0..xs.len().saturating_sub(1))
            .filter(|&i| (g_vals[i + 1] - g_vals[i]).abs() > UNWRAP_LIMIT && xs[i + 1] - xs[i] <= 2.0 * min_spacing)
            .collect();
        GapCurve { xs, g_vals, base_branch: 0, unresolved }
    }

    /// Adaptively samples a real-valued lift `f` on `[a, b]`, refining
    /// wherever successive values differ by more than π/8 until the spacing
    /// drops below `min_spacing`.
    pub fn from_fn<F>(f: F, a: f64, b: f64, base: usize, min_spacing: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let (xs, vs) = adaptive_sample(|x| Ok(f(x)), a, b, base, min_spacing, false)?;
        Ok(GapCurve::from_lift(xs, vs, min_spacing))
    }

    /// Adaptively samples a mod-π evaluator and unwraps it.
    pub fn from_mod_pi_fn<F>(f: F, a: f64, b: f64, base: usize, min_spacing: f64) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let (xs, vs) = adaptive_sample(f, a, b, base, min_spacing, true)?;
        GapCurve::from_mod_pi(xs, &vs)
    }

    /// Adaptively samples an evaluator that already returns a continuous
    /// lift.
    pub fn from_lift_fn<F>(f: F, a: f64, b: f64, base: usize, min_spacing: f64) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let (xs, vs) = adaptive_sample(f, a, b, base, min_spacing, false)?;
        Ok(GapCurve::from_lift(xs, vs, min_spacing))
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Linear interpolation of the lift.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&xi| xi <= x);
        if i == 0 {
            return self.g_vals[0];
        }
        if i >= self.xs.len() {
            return *self.g_vals.last().unwrap();
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.g_vals[i - 1] + t * (self.g_vals[i] - self.g_vals[i - 1])
    }

    /// `min |g|` measured as distance to `πℤ`, with its location.
    pub fn min_abs(&self) -> (f64, f64) {
        self.xs
            .iter()
            .zip(&self.g_vals)
            .map(|(&x, &g)| (crate::sl2::dist_to_zero(g), x))
            .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// Sup-norm distance to another curve sampled on the same points.
    pub fn sup_diff(&self, other: &GapCurve) -> f64 {
        self.g_vals
            .iter()
            .zip(&other.g_vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The curve shifted by a multiple of π so that the value at `x`
    /// lies in `(−π/2, π/2]`.
    pub fn normalized_at(&self, x: f64) -> GapCurve {
        let g = self.eval(x);
        let shift = -PI * (g / PI).round();
        let mut out = self.clone();
        out.g_vals.iter_mut().for_each(|v| *v += shift);
        out
    }
}

/// The lift of `s − u` for a sampled field.
pub fn gap_curve(f: &DirectionField) -> Result<GapCurve> {
    let raw: Vec<f64> = f.s_vals.iter().zip(&f.u_vals).map(|(s, u)| s.value() - u.value()).collect();
    GapCurve::from_mod_pi(f.xs.clone(), &raw)
}

/// CSV with columns `x,s,u,g,log_norm_plus,log_norm_minus`.
pub fn field_csv(f: &DirectionField, g: &GapCurve) -> String {
    let mut out = String::from("x,s,u,g,log_norm_plus,log_norm_minus\n");
    for i in 0..f.xs.len() {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            f.xs[i],
            f.s_vals[i].value(),
            f.u_vals[i].value(),
            g.g_vals[i],
            f.log_norms_plus[i],
            f.log_norms_minus[i]
        );
    }
    out
}

/// Uniform base grid refined by bisection where steps exceed π/8.
///
/// With `wrap` the step is measured modulo π. Refinement rounds evaluate
/// all new midpoints in parallel; output order is deterministic.
pub fn adaptive_sample<F>(f: F, a: f64, b: f64, base: usize, min_spacing: f64, wrap: bool) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    adaptive_sample_by(f, |v| *v, a, b, base, min_spacing, wrap)
}

/// [`adaptive_sample`] for evaluators returning richer records; `key`
/// extracts the value whose steps drive refinement.
pub fn adaptive_sample_by<T, F, K>(
    f: F,
    key: K,
    a: f64,
    b: f64,
    base: usize,
    min_spacing: f64,
    wrap: bool,
) -> Result<(Vec<f64>, Vec<T>)>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
    K: Fn(&T) -> f64,
{
    if !(b > a) || base < 2 {
        return Err(Error::Config(format!("bad sampling range [{a}, {b}] with {base} points")));
    }
    let h = (b - a) / (base - 1) as f64;
    let mut xs: Vec<f64> = (0..base).map(|i| if i + 1 == base { b } else { a + i as f64 * h }).collect();
    let mut vs: Vec<T> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let step = |d: f64| if wrap { wrap_half(d).abs() } else { d.abs() };
    for _round in 0..64 {
        let need: Vec<usize> = (0..xs.len() - 1)
            .filter(|&i| step(key(&vs[i + 1]) - key(&vs[i])) > FRAC_PI_8 && xs[i + 1] - xs[i] > 2.0 * min_spacing)
            .collect();
        if need.is_empty() {
            break;
        }
        let mids: Vec<f64> = need.iter().map(|&i| 0.5 * (xs[i] + xs[i + 1])).collect();
        let mvals: Vec<T> = mids.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        let mut nx = Vec::with_capacity(xs.len() + mids.len());
        let mut nv = Vec::with_capacity(xs.len() + mids.len());
        let mut pending = need.iter().copied().zip(mids).zip(mvals).peekable();
        for (i, (x, v)) in xs.into_iter().zip(vs).enumerate() {
            nx.push(x);
            nv.push(v);
            if let Some(((_, mx), mv)) = pending.next_if(|((j, _), _)| *j == i) {
                nx.push(mx);
                nv.push(mv);
            }
        }
        xs = nx;
        vs = nv;
    }
    Ok((xs, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::GOLDEN;
    use crate::cocycle::Potential;
    use crate::sl2::{proj_dist, Mat2};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn reduced_depth_one_field() {
        let c = QpCocycle::reduced(GOLDEN, 0.3, 100.0, Potential::cos());
        let i = CircleInterval::new(0.2, 0.1).unwrap();
        let f = sample_directions(&c, &i, 1, 1, 33).unwrap();
        let g = gap_curve(&f).unwrap();
        for k in 0..f.xs.len() {
            let x = f.xs[k];
            let expect = (0.3 - (2.0 * PI * x).cos()).atan();
            assert!(f.u_vals[k].value().min(PI - f.u_vals[k].value()) < 1e-12);
            assert!(proj_dist(f.s_vals[k], ProjAngle::new(expect)) < 1e-12);
            assert!((g.g_vals[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_diagonal_field() {
        let c = QpCocycle::constant(GOLDEN, Mat2::hyperbolic(7.0));
        let i = CircleInterval::new(0.5, 0.2).unwrap();
        for n in [1, 5] {
            let f = sample_directions(&c, &i, n, n, 16).unwrap();
            assert!(f.s_vals.iter().all(|s| (s.value() - FRAC_PI_2).abs() < 1e-12));
            assert!(f.u_vals.iter().all(|u| u.value() < 1e-12 || PI - u.value() < 1e-12));
        }
    }

    #[test]
    fn equal_fields_give_zero_gap() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let g = GapCurve::from_mod_pi(xs, &[0.0; 20]).unwrap();
        assert!(g.g_vals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarse_jumps_fail_loudly() {
        let xs = vec![0.0, 0.1, 0.2];
        let raw = vec![0.0, 1.2, 2.4];
        assert!(matches!(GapCurve::from_mod_pi(xs, &raw), Err(Error::UnwrapFailure { .. })));
    }

    #[test]
    fn unwrap_follows_branches() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let truth: Vec<f64> = xs.iter().map(|x| 4.0 * x - 1.0).collect();
        let raw: Vec<f64> = truth.iter().map(|t| t.rem_euclid(PI)).collect();
        let g = GapCurve::from_mod_pi(xs, &raw).unwrap();
        for (a, b) in g.g_vals.iter().zip(&truth) {
            assert!((a - b - (g.g_vals[0] - truth[0])).abs() < 1e-12);
        }
        assert!(g.g_vals[0] > -PI && g.g_vals[0] <= PI);
    }

    #[test]
    fn grid_refinement_preserves_shared_points() {
        let c = QpCocycle::schrodinger(GOLDEN, 0.2, 30.0, Potential::cos());
        let i = CircleInterval::new(0.3, 0.05).unwrap();
        let coarse = gap_curve(&sample_directions(&c, &i, 12, 12, 17).unwrap()).unwrap();
        let fine = gap_curve(&sample_directions(&c, &i, 12, 12, 33).unwrap()).unwrap();
        for k in 0..coarse.len() {
            let shift = fine.g_vals[0] - coarse.g_vals[0];
            assert!((fine.g_vals[2 * k] - coarse.g_vals[k] - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn adaptive_sampler_resolves_steep_winding() {
        let l: f64 = 1e4;
        let f = |x: f64| (l * l * x.tan()).atan() - FRAC_PI_2 - (x - 1e-3);
        let g = GapCurve::from_fn(f, -0.05, 0.05, 65, 1e-12).unwrap();
        assert!(g.unresolved.is_empty());
        for w in g.g_vals.windows(2) {
            assert!((w[1] - w[0]).abs() <= FRAC_PI_8 + 1e-12);
        }
    }

    #[test]
    fn field_csv_has_header_and_rows() {
        let c = QpCocycle::reduced(GOLDEN, 0.0, 50.0, Potential::cos());
        let i = CircleInterval::new(0.25, 0.02).unwrap();
        let f = sample_directions(&c, &i, 2, 2, 16).unwrap();
        let csv = field_csv(&f, &gap_curve(&f).unwrap());
        assert!(csv.starts_with("x,s,u,g,log_norm_plus,log_norm_minus\n"));
        assert_eq!(csv.lines().count(), 17);
    }
}
