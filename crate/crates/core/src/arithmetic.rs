//! Continued fractions, Diophantine diagnostics, and return times of the
//! circle rotation.

use serde::{Deserialize, Serialize};

use crate::cocycle::orbit_point;
use crate::error::{Error, Result};

/// `(√5 − 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// `√2 − 1`.
pub const SILVER: f64 = 0.414_213_562_373_095_03;

/// Hard ceiling on any return-time search.
pub const RETURN_CAP_CEILING: u64 = 100_000_000;

/// A frequency parsed from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub value: f64,
    /// Exact `(p, q)` when the frequency was given as a fraction.
    pub ratio: Option<(u64, u64)>,
}

impl Frequency {
    /// Accepts `golden`, `silver`, `p/q`, or a decimal in `(0, 1)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let f = match s {
            "golden" => Frequency { value: GOLDEN, ratio: None },
            "silver" => Frequency { value: SILVER, ratio: None },
            _ => {
                if let Some((p, q)) = s.split_once('/') {
                    let p: u64 = p.trim().parse().map_err(|_| Error::Config(format!("bad alpha `{s}`")))?;
                    let q: u64 = q.trim().parse().map_err(|_| Error::Config(format!("bad alpha `{s}`")))?;
                    if q == 0 {
                        return Err(Error::Config(format!("bad alpha `{s}`")));
                    }
                    Frequency { value: p as f64 / q as f64, ratio: Some((p, q)) }
                } else {
                    let v: f64 = s.parse().map_err(|_| Error::Config(format!("bad alpha `{s}`")))?;
                    Frequency { value: v, ratio: None }
                }
            }
        };
        if !(f.value > 0.0 && f.value < 1.0) {
            return Err(Error::Config(format!("alpha `{s}` must lie in (0, 1)")));
        }
        Ok(f)
    }

    pub fn expand(&self, depth: usize) -> Result<ContinuedFraction> {
        match self.ratio {
            Some((p, q)) => ContinuedFraction::from_ratio(p, q, depth),
            None => cf_expand(self.value, depth),
        }
    }
}

/// Partial quotients `a_1, a_2, …` of `α = [0; a_1, a_2, …]` with the
/// convergents `p_s/q_s`, indexed so that `q_0 = 1` and `q_1 = a_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub alpha: f64,
    pub partial_quotients: Vec<u64>,
    /// `p_0, p_1, …` (same length as `q`).
    pub p: Vec<u64>,
    pub q: Vec<u64>,
    /// The expansion ended exactly: `α = p_last/q_last`.
    pub terminated: bool,
    exact: Option<(u64, u64)>,
}

impl ContinuedFraction {
    /// Exact expansion of `num/den` reduced into `(0, 1)`.
    pub fn from_ratio(num: u64, den: u64, depth: usize) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::Config(format!("{num}/{den} is not in (0, 1)")));
        }
        let (partials, done) = euclid(num as u128, den as u128, depth);
        let mut cf = Self::from_partials(num as f64 / den as f64, &partials)?;
        cf.terminated = done;
        let g = gcd(num, den);
        cf.exact = Some((num / g, den / g));
        Ok(cf)
    }

    fn from_partials(alpha: f64, partials: &[u64]) -> Result<Self> {
        let mut p = vec![0u64];
        let mut q = vec![1u64];
        let (mut p_prev, mut q_prev) = (1u128, 0u128);
        let (mut p_cur, mut q_cur) = (0u128, 1u128);
        for &a in partials {
            let pn = a as u128 * p_cur + p_prev;
            let qn = a as u128 * q_cur + q_prev;
            if qn > u64::MAX as u128 {
                return Err(Error::PrecisionExhausted { requested: partials.len(), reliable: q.len() - 1 });
            }
            p_prev = p_cur;
            q_prev = q_cur;
            p_cur = pn;
            q_cur = qn;
            p.push(pn as u64);
            q.push(qn as u64);
        }
        Ok(ContinuedFraction { alpha, partial_quotients: partials.to_vec(), p, q, terminated: false, exact: None })
    }

    /// Number of partial quotients.
    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    /// Folds the partial quotients back into a real number.
    pub fn value(&self) -> f64 {
        let mut x = 0.0f64;
        for &a in self.partial_quotients.iter().rev() {
            x = 1.0 / (a as f64 + x);
        }
        x
    }

    /// `‖q α‖`, the distance from `qα` to the nearest integer.
    pub fn dist_to_int(&self, q: u64) -> f64 {
        match self.exact {
            Some((num, den)) => {
                let r = ((q as u128 * num as u128) % den as u128) as u64;
                r.min(den - r) as f64 / den as f64
            }
            None => dist_to_int(q, self.alpha),
        }
    }

    /// Smallest convergent index `s` with `q_s^{-2τ} < limit`.
    pub fn first_index_below(&self, tau: f64, limit: f64) -> Option<usize> {
        self.q.iter().position(|&q| (q as f64).powf(-2.0 * tau) < limit)
    }
}

/// `‖qα‖` for a floating-point `α`, with the product formed exactly.
pub fn dist_to_int(q: u64, alpha: f64) -> f64 {
    let qf = q as f64;
    let p = qf * alpha;
    let e = qf.mul_add(alpha, -p);
    let f = (p - p.round()) + e;
    (f - f.round()).abs()
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Euclid on `num/den`, returning up to `depth` quotients and whether the
/// expansion terminated.
fn euclid(mut num: u128, mut den: u128, depth: usize) -> (Vec<u64>, bool) {
    let mut out = Vec::new();
    while out.len() < depth {
        if num == 0 {
            return (out, true);
        }
        let a = den / num;
        let r = den % num;
        out.push(a.min(u64::MAX as u128) as u64);
        den = num;
        num = r;
    }
    (out, num == 0)
}

/// Expands `α ∈ (0, 1)` into `depth` partial quotients.
///
/// The floating-point value is a dyadic rational and is expanded exactly.
/// A quotient `a_{s+1}` is accepted only while every real number within
/// half an ulp of `α` shares it, i.e. while `q_{s+1}(q_{s+1} + q_s)·ulp < 1`.
/// An expansion that terminates inside that range is an exact rational.
pub fn cf_expand(alpha: f64, depth: usize) -> Result<ContinuedFraction> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} is not in (0, 1)")));
    }
    if depth > 64 {
        return Err(Error::PrecisionExhausted { requested: depth, reliable: 64 });
    }
    let bits = alpha.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mant = if exp == 0 { (bits & ((1 << 52) - 1)) << 1 } else { (bits & ((1 << 52) - 1)) | (1 << 52) };
    // alpha = mant · 2^(exp − 1075)
    let shift = 1075 - exp;
    if shift > 126 {
        return Err(Error::PrecisionExhausted { requested: depth, reliable: 0 });
    }
    let num = mant as u128;
    let den = 1u128 << shift;
    let ulp = f64::from_bits(bits + 1) - alpha;
    let (all, done) = euclid(num, den, depth.max(1) + 1);

    let mut reliable = Vec::new();
    let (mut q_prev, mut q_cur) = (0f64, 1f64);
    for (i, &a) in all.iter().enumerate() {
        let q_next = a as f64 * q_cur + q_prev;
        let last = done && i + 1 == all.len();
        if !last && q_next * (q_next + q_cur) * ulp >= 1.0 {
            break;
        }
        reliable.push(a);
        q_prev = q_cur;
        q_cur = q_next;
    }
    let terminated = done && reliable.len() == all.len();
    if reliable.len() < depth && !terminated {
        return Err(Error::PrecisionExhausted { requested: depth, reliable: reliable.len() });
    }
    reliable.truncate(depth);
    let mut cf = ContinuedFraction::from_partials(alpha, &reliable)?;
    cf.terminated = terminated && cf.depth() == all.len();
    Ok(cf)
}

/// Largest reliable depth for `α`, capped at 64.
pub fn max_reliable_depth(alpha: f64) -> usize {
    match cf_expand(alpha, 64) {
        Ok(cf) => cf.depth(),
        Err(Error::PrecisionExhausted { reliable, .. }) => reliable,
        Err(_) => 0,
    }
}

/// True when `‖qα‖ < 1e−12` for some `q ≤ 10⁶`.
pub fn is_numerically_rational(alpha: f64) -> bool {
    let a = alpha.rem_euclid(1.0);
    if a == 0.0 {
        return true;
    }
    let depth = max_reliable_depth(a).max(1);
    match cf_expand(a, depth) {
        Ok(cf) => cf.q.iter().any(|&q| q <= 1_000_000 && dist_to_int(q, a) < 1e-12),
        Err(_) => false,
    }
}

/// Lower estimate of the Diophantine constant over the computed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineReport {
    /// `min_s q_s^{τ−1} ‖q_s α‖` over the available convergents.
    pub gamma_hat: f64,
    pub ok: bool,
    /// Number of convergents examined.
    pub convergents: usize,
}

pub fn diophantine_report(cf: &ContinuedFraction, tau: f64) -> Result<DiophantineReport> {
    if cf.q.len() < 3 {
        return Err(Error::DegenerateData(format!("{} convergents; need at least 3", cf.q.len())));
    }
    let gamma_hat = cf
        .q
        .iter()
        .map(|&q| (q as f64).powf(tau - 1.0) * cf.dist_to_int(q))
        .fold(f64::INFINITY, f64::min);
    Ok(DiophantineReport { gamma_hat, ok: gamma_hat > 0.0, convergents: cf.q.len() })
}

/// A closed arc `B(center, radius)` on `ℝ/ℤ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleInterval {
    pub center: f64,
    pub radius: f64,
}

impl CircleInterval {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.25) {
            return Err(Error::Config(format!("interval radius {radius} outside (0, 1/4)")));
        }
        Ok(CircleInterval { center: center.rem_euclid(1.0), radius })
    }

    pub fn contains(&self, x: f64) -> bool {
        circle_dist(x, self.center) <= self.radius
    }

    /// `B(center, radius·factor)`.
    pub fn shrink(&self, factor: f64) -> Self {
        CircleInterval { center: self.center, radius: self.radius * factor }
    }

    /// Left endpoint, lifted so that `left < center ≤ right` holds on `ℝ`.
    pub fn left(&self) -> f64 {
        self.center - self.radius
    }

    pub fn right(&self) -> f64 {
        self.center + self.radius
    }

    /// Whether `(self + shift) ∩ other ≠ ∅`.
    pub fn meets_shifted(&self, shift: f64, other: &CircleInterval) -> bool {
        circle_dist(self.center + shift, other.center) <= self.radius + other.radius
    }
}

/// Distance on `ℝ/ℤ`.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Signed representative of `a − b` in `[−1/2, 1/2)`.
pub fn circle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Default search cap for returns into an arc of radius `radius`.
///
/// By the three-distance theorem every gap of `{jα : j ≤ q_s}` is below
/// `2/q_s`, and `q_s < (q_{s−1}^{τ−1})/γ̂` for `α ∈ DC(τ, γ̂)`. Taking the
/// first `q_s` exceeding `2/ℓ` for an arc of length `ℓ = 2·radius` yields
/// `min_time + ⌈2(2/ℓ)^{τ−1}/γ̂⌉ + 1`, clamped at `10⁸`.
pub fn default_return_cap(radius: f64, tau: f64, gamma_hat: f64, min_time: u64) -> u64 {
    let ell = 2.0 * radius;
    let span = (2.0 * (2.0 / ell).powf(tau - 1.0) / gamma_hat).ceil();
    let cap = min_time as f64 + span + 1.0;
    if cap.is_finite() && cap < RETURN_CAP_CEILING as f64 {
        cap as u64
    } else {
        RETURN_CAP_CEILING
    }
}

/// Least `j ∈ (min_time, cap]` with `x + direction·jα` in one of `targets`.
pub fn first_return(
    x: f64,
    targets: &[CircleInterval],
    alpha: f64,
    min_time: u64,
    cap: u64,
    direction: i8,
) -> Result<u64> {
    if cap < min_time {
        return Err(Error::Config(format!("cap {cap} below min_time {min_time}")));
    }
    let d = if direction < 0 { -1i64 } else { 1 };
    for j in (min_time + 1)..=cap {
        let y = orbit_point(x, d * j as i64, alpha);
        if targets.iter().any(|t| t.contains(y)) {
            return Ok(j);
        }
    }
    Err(Error::CapExceeded { cap })
}

/// Least `j ∈ (min_time, cap]` for which `(from + direction·jα)` meets one
/// of `targets`. This is the smallest first-return time over all starting
/// points in `from`.
pub fn first_return_interval(
    from: &CircleInterval,
    targets: &[CircleInterval],
    alpha: f64,
    min_time: u64,
    cap: u64,
    direction: i8,
) -> Result<u64> {
    let d = if direction < 0 { -1i64 } else { 1 };
    for j in (min_time + 1)..=cap {
        let shift = orbit_point(0.0, d * j as i64, alpha);
        if targets.iter().any(|t| from.meets_shifted(shift, t)) {
            return Ok(j);
        }
    }
    Err(Error::CapExceeded { cap })
}

/// A short-time return of one critical arc onto the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Signed shift: `(I1 + kα) ∩ I2 ≠ ∅`.
    pub k: i64,
    /// Width of the overlap.
    pub overlap: f64,
}

/// Least `|k|` in `[1, qbound)` with `(I1 ± kα) ∩ I2 ≠ ∅`; `+k` is tried
/// before `−k`.
pub fn resonance_scan(i1: &CircleInterval, i2: &CircleInterval, alpha: f64, qbound: u64) -> Option<Resonance> {
    for k in 1..qbound {
        for s in [1i64, -1] {
            let kk = s * k as i64;
            let shifted = orbit_point(i1.center, kk, alpha);
            let d = circle_dist(shifted, i2.center);
            let reach = i1.radius + i2.radius;
            if d <= reach {
                let overlap = (reach - d).min(2.0 * i1.radius.min(i2.radius));
                return Some(Resonance { k: kk, overlap });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_is_fibonacci() {
        let cf = cf_expand(GOLDEN, 30).unwrap();
        assert!(cf.partial_quotients.iter().all(|&a| a == 1));
        assert_eq!(&cf.q[..8], &[1, 1, 2, 3, 5, 8, 13, 21]);
        for w in cf.q.windows(3) {
            assert_eq!(w[2], w[1] + w[0]);
        }
    }

    #[test]
    fn silver_mean_is_all_twos() {
        let cf = cf_expand(SILVER, 20).unwrap();
        assert!(cf.partial_quotients.iter().all(|&a| a == 2));
    }

    #[test]
    fn three_eighths_terminates() {
        let cf = cf_expand(0.375, 10).unwrap();
        assert_eq!(cf.partial_quotients, vec![2, 1, 2]);
        assert!(cf.terminated);
        let exact = ContinuedFraction::from_ratio(3, 8, 10).unwrap();
        assert_eq!(exact.partial_quotients, vec![2, 1, 2]);
        assert_eq!(*exact.q.last().unwrap(), 8);
    }

    #[test]
    fn depth_beyond_precision_is_reported() {
        match cf_expand(GOLDEN, 60) {
            Err(Error::PrecisionExhausted { requested, reliable }) => {
                assert_eq!(requested, 60);
                assert!((30..60).contains(&reliable));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn convergent_bound_holds() {
        let cf = cf_expand(SILVER, 18).unwrap();
        for s in 0..cf.q.len() - 1 {
            let err = (SILVER - cf.p[s] as f64 / cf.q[s] as f64).abs();
            assert!(err < 1.0 / (cf.q[s] as f64 * cf.q[s + 1] as f64));
        }
    }

    #[test]
    fn rational_has_zero_gamma() {
        let cf = ContinuedFraction::from_ratio(3, 8, 10).unwrap();
        let r = diophantine_report(&cf, 2.5).unwrap();
        assert!(!r.ok);
        assert_eq!(r.gamma_hat, 0.0);
    }

    #[test]
    fn frequency_parsing() {
        assert_eq!(Frequency::parse("golden").unwrap().value, GOLDEN);
        assert_eq!(Frequency::parse("3/8").unwrap().ratio, Some((3, 8)));
        assert_eq!(Frequency::parse("0.25").unwrap().value, 0.25);
        assert!(Frequency::parse("1.5").is_err());
        assert!(Frequency::parse("x").is_err());
    }

    #[test]
    fn quarter_rotation_returns() {
        let t = [CircleInterval::new(0.0, 0.05).unwrap()];
        assert_eq!(first_return(0.0, &t, 0.25, 1, 100, 1).unwrap(), 4);
        assert_eq!(first_return(0.0, &t, 0.25, 10, 100, 1).unwrap(), 12);
        assert_eq!(first_return(0.0, &t, 0.25, 10, 11, 1), Err(Error::CapExceeded { cap: 11 }));
    }

    #[test]
    fn resonance_examples() {
        let i = CircleInterval::new(0.0, 0.01).unwrap();
        assert_eq!(resonance_scan(&i, &i, GOLDEN, 3), None);
        let a = CircleInterval::new(0.0, 0.05).unwrap();
        let b = CircleInterval::new(GOLDEN, 0.05).unwrap();
        assert_eq!(resonance_scan(&a, &b, GOLDEN, 2).unwrap().k, 1);
        assert_eq!(resonance_scan(&b, &a, GOLDEN, 2).unwrap().k, -1);
    }

    #[test]
    fn circle_distances() {
        assert!((circle_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_diff(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((circle_diff(0.95, 0.05) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn default_cap_is_clamped() {
        assert_eq!(default_return_cap(1e-30, 2.5, 0.3, 0), RETURN_CAP_CEILING);
        assert!(default_return_cap(0.01, 2.5, 0.3, 5) > 5);
    }

    #[test]
    fn rationality_flag() {
        assert!(is_numerically_rational(0.375));
        assert!(is_numerically_rational(1.0 / 3.0));
        assert!(!is_numerically_rational(GOLDEN));
    }
}
