//! Cocycle families over the circle rotation `x ↦ x + α` and their
//! renormalized transfer matrices.
//!
//! `A_n(x) = A(x + (n−1)α) ⋯ A(x)` for `n ≥ 1`, `A_0 = Id`, and
//! `A_{−n}(x) = A_n(x − nα)⁻¹`.

mod potential;

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

pub use potential::{Jet, Potential};

use crate::error::{Error, Result};
use crate::sl2::{polar_decompose, Mat2, PolarForm, ProjAngle, TOL_DEGENERATE};

/// Largest `|n|` accepted by [`transfer`].
pub const MAX_STEPS: u64 = 100_000_000;

/// Which matrix-valued map the cocycle iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `((E − λv(x), −1), (1, 0))`.
    Schrodinger { energy: f64, lambda: f64 },
    /// The polar-reduced map `diag(λ(x), λ(x)⁻¹)·R_φ` with `cot φ = t − v(x)`.
    Reduced { t: f64, lambda: f64 },
    /// The Schrödinger map conjugated by `diag(λ^{-1/2}, λ^{1/2})`:
    /// `((λ(t − v), −1/λ), (λ, 0))`.
    Conjugated { t: f64, lambda: f64 },
    /// `diag(√((1+λ)/(1−λ)), √((1−λ)/(1+λ)))·R_ψ` with
    /// `ψ = π[θ(x) − θ(x−α) + kα + t]`; the potential plays the role of θ.
    Szego { lambda: f64, k: i64, t: f64 },
    /// An `x`-independent matrix, for fixtures.
    Constant(Mat2),
}

/// A frequency together with a family and its potential.
#[derive(Debug, Clone)]
pub struct QpCocycle {
    pub alpha: f64,
    pub family: Family,
    pub potential: Arc<Potential>,
}

impl QpCocycle {
    pub fn new(alpha: f64, family: Family, potential: Potential) -> Self {
        QpCocycle { alpha, family, potential: Arc::new(potential) }
    }

    pub fn schrodinger(alpha: f64, energy: f64, lambda: f64, potential: Potential) -> Self {
        Self::new(alpha, Family::Schrodinger { energy, lambda }, potential)
    }

    pub fn reduced(alpha: f64, t: f64, lambda: f64, potential: Potential) -> Self {
        Self::new(alpha, Family::Reduced { t, lambda }, potential)
    }

    pub fn constant(alpha: f64, m: Mat2) -> Self {
        Self::new(alpha, Family::Constant(m), Potential::constant(0.0))
    }

    /// Same cocycle with a different family parameter set.
    pub fn with_family(&self, family: Family) -> Self {
        QpCocycle { alpha: self.alpha, family, potential: Arc::clone(&self.potential) }
    }

    /// True when `α` is numerically rational: some `q ≤ 10⁶` has
    /// `‖qα‖ < 1e−12`. Such frequencies are accepted for fixtures only.
    pub fn alpha_is_rational(&self) -> bool {
        crate::arithmetic::is_numerically_rational(self.alpha)
    }

    /// The one-step matrix at `x`.
    #[inline]
    pub fn matrix(&self, x: f64) -> Mat2 {
        match self.family {
            Family::Schrodinger { energy, lambda } => schrodinger_map(energy, lambda, &self.potential, x),
            Family::Reduced { t, lambda } => reduced_matrix(t, lambda, &self.potential, x),
            Family::Conjugated { t, lambda } => conjugated_map(t, lambda, &self.potential, x),
            Family::Szego { lambda, k, t } => szego_map(lambda, &self.potential, k, t, self.alpha, x),
            Family::Constant(m) => m,
        }
    }
}

/// `x + jα` reduced to `[0, 1)`, with the product `jα` formed exactly so
/// that orbit points stay accurate for `j` up to `10⁸` and beyond.
#[inline]
pub fn orbit_point(x: f64, j: i64, alpha: f64) -> f64 {
    let jf = j as f64;
    let p = jf * alpha;
    let e = jf.mul_add(alpha, -p);
    let frac = p - p.floor();
    let y = (frac + x.rem_euclid(1.0)) + e;
    let y = y - y.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// The Schrödinger one-step matrix. Its determinant is exactly 1.
#[inline]
pub fn schrodinger_map(energy: f64, lambda: f64, v: &Potential, x: f64) -> Mat2 {
    Mat2::new(energy - lambda * v.value(x), -1.0, 1.0, 0.0)
}

/// `a(x, t, λ)` from the closed-form polar decomposition of the conjugated
/// map; its norm is `λ√(a/2)`.
pub fn reduced_a(r: f64, lambda: f64) -> f64 {
    let l4 = lambda.powi(-4);
    let b = r * r + 1.0 + l4;
    // b² − 4λ⁻⁴ = (r²+1−λ⁻⁴)² + 4r²λ⁻⁴, which avoids cancellation
    let c = r * r + 1.0 - l4;
    b + (c * c + 4.0 * r * r * l4).sqrt()
}

fn reduced_parts(t: f64, lambda: f64, v: &Potential, x: f64) -> (f64, f64) {
    let r = t - v.value(x);
    let lx = lambda * (0.5 * reduced_a(r, lambda)).sqrt();
    let phi = 1.0f64.atan2(r);
    (lx, phi)
}

fn reduced_matrix(t: f64, lambda: f64, v: &Potential, x: f64) -> Mat2 {
    let (lx, phi) = reduced_parts(t, lambda, v, x);
    Mat2::hyperbolic(lx) * Mat2::rotation(phi)
}

/// The reduced map `Λ(x)·R_φ(x,t)` and its polar form.
///
/// `λ(x) = λ√(a/2)` is the exact norm of the conjugated Schrödinger map and
/// `cot φ = t − v(x)`, so the polar data are `u = 0`, `s = arctan(t − v(x))`.
pub fn reduced_map(t: f64, lambda: f64, v: &Potential, x: f64) -> Result<(Mat2, PolarForm)> {
    if lambda < 10.0 {
        return Err(Error::LambdaTooSmall { lambda, min: 10.0 });
    }
    let (lx, phi) = reduced_parts(t, lambda, v, x);
    let m = Mat2::hyperbolic(lx) * Mat2::rotation(phi);
    let polar = PolarForm::from_parts(lx.ln(), ProjAngle::new(0.0), ProjAngle::new(FRAC_PI_2 - phi));
    Ok((m, polar))
}

/// The Schrödinger map at `E = λt` conjugated by `diag(λ^{-1/2}, λ^{1/2})`.
#[inline]
pub fn conjugated_map(t: f64, lambda: f64, v: &Potential, x: f64) -> Mat2 {
    Mat2::new(lambda * (t - v.value(x)), -1.0 / lambda, lambda, 0.0)
}

/// The Szegő map in its real polar form.
pub fn szego_map(lambda: f64, theta: &Potential, k: i64, t: f64, alpha: f64, x: f64) -> Mat2 {
    let psi = szego_phase(theta, k, t, alpha, x);
    let e = ((1.0 + lambda) / (1.0 - lambda)).sqrt();
    Mat2::hyperbolic(e) * Mat2::rotation(psi)
}

/// `ψ(x, t) = π[θ(x) − θ(x−α) + kα + t]`.
pub fn szego_phase(theta: &Potential, k: i64, t: f64, alpha: f64, x: f64) -> f64 {
    let xm = (x - alpha).rem_euclid(1.0);
    PI * (theta.value(x) - theta.value(xm) + k as f64 * alpha + t)
}

/// A renormalized transfer product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferResult {
    /// `log ‖A_n(x)‖`.
    pub log_norm: f64,
    /// `A_n(x) / ‖A_n(x)‖`.
    pub normalized: Mat2,
}

impl TransferResult {
    pub fn identity() -> Self {
        TransferResult { log_norm: 0.0, normalized: Mat2::IDENTITY }
    }

    /// Polar data of the full product, norm kept in log form.
    pub fn polar(&self) -> Result<PolarForm> {
        self.polar_tol(TOL_DEGENERATE)
    }

    pub fn polar_tol(&self, tol: f64) -> Result<PolarForm> {
        if self.log_norm < 20.0 {
            // moderate norms: decompose the actual product so that the
            // unimodularity check is meaningful
            let m = self.normalized.scale(self.log_norm.exp());
            if m.is_finite() {
                return crate::sl2::polar_decompose_tol(&m, tol);
            }
        }
        PolarForm::from_scaled(&self.normalized, self.log_norm, tol)
    }

    /// The full product, when it is representable.
    pub fn matrix(&self) -> Result<Mat2> {
        let m = self.normalized.scale(self.log_norm.exp());
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::ProductOverflow)
        }
    }

    /// `A_{−n}` from `A_n`: the inverse has the same norm.
    fn inverted(self) -> Self {
        TransferResult { log_norm: self.log_norm, normalized: self.normalized.adjugate() }
    }
}

/// Running product with exact power-of-two rescaling.
struct Accumulator {
    m: Mat2,
    exp2: i64,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator { m: Mat2::IDENTITY, exp2: 0 }
    }

    #[inline]
    fn push(&mut self, a: &Mat2) {
        self.m = *a * self.m;
        let big = self.m.max_abs();
        let e = exponent(big);
        if e != 0 {
            self.m = self.m.scale(pow2(-e));
            self.exp2 += e as i64;
        }
    }

    fn result(&self) -> TransferResult {
        let n = self.m.norm();
        TransferResult {
            log_norm: self.exp2 as f64 * std::f64::consts::LN_2 + n.ln(),
            normalized: self.m.scale(1.0 / n),
        }
    }
}

/// Unbiased binary exponent of a positive normal float.
#[inline]
fn exponent(x: f64) -> i32 {
    ((x.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

#[inline]
fn pow2(e: i32) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

fn check_steps(n: u64) -> Result<()> {
    if n > MAX_STEPS {
        return Err(Error::RegimeViolation(format!("|n| = {n} exceeds {MAX_STEPS}")));
    }
    Ok(())
}

/// `A_n(x)` for any integer `n`, renormalized at every step.
pub fn transfer(c: &QpCocycle, x: f64, n: i64) -> Result<TransferResult> {
    check_steps(n.unsigned_abs())?;
    if n == 0 {
        return Ok(TransferResult::identity());
    }
    if n > 0 {
        Ok(forward(c, x, n as u64))
    } else {
        let m = -n;
        let start = orbit_point(x, n, c.alpha);
        Ok(forward(c, start, m as u64).inverted())
    }
}

fn forward(c: &QpCocycle, x: f64, n: u64) -> TransferResult {
    let mut acc = Accumulator::new();
    for j in 0..n {
        acc.push(&c.matrix(orbit_point(x, j as i64, c.alpha)));
    }
    acc.result()
}

/// `A_n(x)` for each `n` in the ascending list `ns` from a single pass.
pub fn transfer_checkpoints(c: &QpCocycle, x: f64, ns: &[u64]) -> Result<Vec<TransferResult>> {
    if ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("checkpoints must be ascending".into()));
    }
    let last = ns.last().copied().unwrap_or(0);
    check_steps(last)?;
    let mut out = Vec::with_capacity(ns.len());
    let mut acc = Accumulator::new();
    let mut next = ns.iter().peekable();
    while let Some(&&0) = next.peek() {
        out.push(TransferResult::identity());
        next.next();
    }
    for j in 0..last {
        acc.push(&c.matrix(orbit_point(x, j as i64, c.alpha)));
        while let Some(&&k) = next.peek() {
            if k == j + 1 {
                out.push(acc.result());
                next.next();
            } else {
                break;
            }
        }
    }
    Ok(out)
}

/// Log-norms `log ‖A_n(x)‖` for every `n = 1..=len` along one orbit.
pub fn log_norm_trajectory(c: &QpCocycle, x: f64, len: u64) -> Result<Vec<f64>> {
    check_steps(len)?;
    let mut acc = Accumulator::new();
    let mut out = Vec::with_capacity(len as usize);
    for j in 0..len {
        acc.push(&c.matrix(orbit_point(x, j as i64, c.alpha)));
        out.push(acc.result().log_norm);
    }
    Ok(out)
}

/// Polar form of the one-step matrix; a convenience for tests and examples.
pub fn one_step_polar(c: &QpCocycle, x: f64) -> Result<PolarForm> {
    polar_decompose(&c.matrix(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn schrodinger_examples() {
        let v = Potential::cos();
        assert_eq!(schrodinger_map(0.0, 0.0, &v, 0.37), Mat2::new(0.0, -1.0, 1.0, 0.0));
        assert_eq!(schrodinger_map(3.0, 1.0, &v, 0.0), Mat2::new(2.0, -1.0, 1.0, 0.0));
        for i in 0..100 {
            let m = schrodinger_map(1.7 * i as f64, 123.4, &v, i as f64 * 0.013);
            assert_eq!(m.det(), 1.0);
        }
    }

    #[test]
    fn reduced_flat_case() {
        let v = Potential::constant(0.0);
        assert_eq!(reduced_a(0.0, 50.0), 2.0);
        let (m, p) = reduced_map(0.0, 50.0, &v, 0.2).unwrap();
        assert!((p.norm() - 50.0).abs() < 1e-12);
        assert!((p.s.value()).abs() < 1e-15);
        assert!((m.norm() - 50.0).abs() < 1e-11);
    }

    #[test]
    fn reduced_norm_is_exact_conjugated_norm() {
        let v = Potential::cos();
        for i in 0..40 {
            let x = i as f64 / 40.0;
            let (_, p) = reduced_map(0.3, 1e3, &v, x).unwrap();
            let exact = conjugated_map(0.3, 1e3, &v, x).norm();
            assert!((p.log_norm - exact.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_rejects_small_lambda() {
        assert!(matches!(reduced_map(0.0, 5.0, &Potential::cos(), 0.0), Err(Error::LambdaTooSmall { .. })));
    }

    #[test]
    fn szego_examples() {
        let zero = Potential::constant(0.0);
        let r = szego_map(0.0, &zero, 0, 0.3, GOLDEN, 0.4);
        assert!((r.norm() - 1.0).abs() < 1e-15);
        let r = szego_map(0.0, &zero, 0, 0.5, GOLDEN, 0.9);
        assert!(r.sub(&Mat2::rotation(FRAC_PI_2)).max_abs() < 1e-15);
        let theta = Potential::cos().scaled(0.5);
        for i in 0..20 {
            let m = szego_map(0.9, &theta, 1, 0.1, GOLDEN, i as f64 / 20.0);
            assert!((m.det() - 1.0).abs() < 1e-12);
            assert!((m.norm() - 19f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_zero_and_one() {
        let c = QpCocycle::schrodinger(GOLDEN, 0.4, 5.0, Potential::cos());
        assert_eq!(transfer(&c, 0.2, 0).unwrap(), TransferResult::identity());
        let t = transfer(&c, 0.2, 1).unwrap();
        let a = c.matrix(0.2);
        assert!((t.log_norm - a.norm().ln()).abs() < 1e-15);
        assert!(t.normalized.sub(&a.scale(1.0 / a.norm())).max_abs() < 1e-15);
    }

    #[test]
    fn negative_steps_invert() {
        let c = QpCocycle::schrodinger(GOLDEN, 0.4, 5.0, Potential::cos());
        for n in [1i64, 7, 50] {
            let neg = transfer(&c, 0.31, -n).unwrap().matrix().unwrap();
            let start = orbit_point(0.31, -n, GOLDEN);
            let pos = transfer(&c, start, n).unwrap().matrix().unwrap();
            let prod = neg * pos;
            let scale = pos.norm() * neg.norm();
            assert!(prod.sub(&Mat2::IDENTITY).max_abs() < 1e-13 * scale, "n = {n}");
        }
    }

    #[test]
    fn checkpoints_match_separate_runs() {
        let c = QpCocycle::schrodinger(GOLDEN, -0.8, 30.0, Potential::cos());
        let ns = [0u64, 1, 10, 10, 64, 129];
        let cps = transfer_checkpoints(&c, 0.77, &ns).unwrap();
        for (n, r) in ns.iter().zip(&cps) {
            let direct = transfer(&c, 0.77, *n as i64).unwrap();
            assert_eq!(direct, *r);
        }
    }

    #[test]
    fn orbit_point_is_accurate_at_large_j() {
        let j = 99_999_989i64;
        let y = orbit_point(0.25, j, GOLDEN);
        // j·α split by hand with an exact integer part
        let expect = (0.25 + (j as f64 * GOLDEN).fract() + (j as f64).mul_add(GOLDEN, -(j as f64 * GOLDEN))).fract();
        assert!((y - expect).abs() < 1e-15);
        assert!((0.0..1.0).contains(&y));
    }

    #[test]
    fn huge_products_do_not_overflow() {
        let c = QpCocycle::schrodinger(GOLDEN, 0.0, 1e3, Potential::cos());
        let t = transfer(&c, 0.1, 20_000).unwrap();
        assert!(t.log_norm.is_finite() && t.log_norm > 1e4);
        assert!((t.normalized.norm() - 1.0).abs() < 1e-12);
        let p = t.polar().unwrap();
        assert!((p.log_norm - t.log_norm).abs() < 1e-9);
    }

    #[test]
    fn steps_beyond_limit_are_refused() {
        let c = QpCocycle::constant(GOLDEN, Mat2::IDENTITY);
        assert!(transfer(&c, 0.0, -(MAX_STEPS as i64) - 1).is_err());
    }

    #[test]
    fn rational_alpha_is_flagged() {
        assert!(QpCocycle::constant(0.375, Mat2::IDENTITY).alpha_is_rational());
        assert!(!QpCocycle::constant(GOLDEN, Mat2::IDENTITY).alpha_is_rational());
    }
}
