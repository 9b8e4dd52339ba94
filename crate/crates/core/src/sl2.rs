//! 2×2 real matrices, angles on the projective line, and polar decomposition.
//!
//! Directions live in ℝP¹ = ℝ/πℤ and are always stored in `[0, π)`.
//! Continuous lifts of angle-valued curves are built in [`crate::directions`].
//!
//! The polar form follows the convention
//! `A = R_u · diag(‖A‖, ‖A‖⁻¹) · R_{π/2 − s}`, where `s` is the most
//! contracted input direction and `u = s(A⁻¹)` the most expanded output
//! direction.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on `‖A‖ − 1` below which directions are undefined.
pub const TOL_DEGENERATE: f64 = 1e-8;

/// A real 2×2 matrix `[[a11, a12], [a21, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// `diag(e, 1/e)`.
    pub fn hyperbolic(e: f64) -> Self {
        Mat2::diag(e, 1.0 / e)
    }

    pub fn det(&self) -> f64 {
        // fused form keeps det = 1 exact for Schrödinger-type matrices
        self.a11.mul_add(self.a22, -(self.a12 * self.a21))
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// The adjugate; equals the inverse when `det = 1`.
    pub fn adjugate(&self) -> Self {
        Mat2::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        self.adjugate().scale(1.0 / d)
    }

    pub fn scale(&self, k: f64) -> Self {
        Mat2::new(self.a11 * k, self.a12 * k, self.a21 * k, self.a22 * k)
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        Mat2::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    pub fn frobenius(&self) -> f64 {
        self.a11
            .hypot(self.a12)
            .hypot(self.a21.hypot(self.a22))
    }

    /// Whether `|det − 1| ≤ 1e−9 · (1 + ‖A‖²)`.
    pub fn is_unimodular(&self) -> bool {
        let n = self.norm();
        (self.det() - 1.0).abs() <= 1e-9 * (1.0 + n * n)
    }

    /// Both singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        let k = Kernel::of(self);
        let s1 = k.h1 + k.h2;
        let s2 = if s1 > 0.0 { self.det().abs() / s1 } else { 0.0 };
        (s1, s2)
    }

    /// Operator 2-norm.
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Product that reports overflow instead of producing infinities.
    pub fn try_mul(&self, o: &Mat2) -> Result<Mat2> {
        let m = *self * *o;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::ProductOverflow)
        }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11.mul_add(o.a11, self.a12 * o.a21),
            self.a11.mul_add(o.a12, self.a12 * o.a22),
            self.a21.mul_add(o.a11, self.a22 * o.a21),
            self.a21.mul_add(o.a12, self.a22 * o.a22),
        )
    }
}

/// Decomposition `A = p·I + q·J + r·K + s·L` into a rotation-scaling part
/// and a reflection-scaling part, from which the SVD is read off in
/// closed form without cancellation.
struct Kernel {
    h1: f64,
    h2: f64,
    theta1: f64,
    theta2: f64,
}

impl Kernel {
    fn of(m: &Mat2) -> Kernel {
        let p = 0.5 * (m.a11 + m.a22);
        let q = 0.5 * (m.a21 - m.a12);
        let r = 0.5 * (m.a11 - m.a22);
        let s = 0.5 * (m.a12 + m.a21);
        Kernel {
            h1: p.hypot(q),
            h2: r.hypot(s),
            theta1: q.atan2(p),
            theta2: s.atan2(r),
        }
    }
}

/// A direction in ℝP¹, stored in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ProjAngle(f64);

impl ProjAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        ProjAngle(t)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Signed difference `self − other` wrapped into `(−π/2, π/2]`.
    pub fn signed_diff(self, other: ProjAngle) -> f64 {
        wrap_half(self.0 - other.0)
    }
}

/// Wraps a real number into `(−π/2, π/2]`.
pub fn wrap_half(d: f64) -> f64 {
    let w = d - PI * (d / PI).round();
    if w <= -FRAC_PI_2 {
        w + PI
    } else {
        w
    }
}

/// Distance on ℝP¹: `min(|a − b|, π − |a − b|)`.
pub fn proj_dist(a: ProjAngle, b: ProjAngle) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(PI - d)
}

/// Distance from a (lifted) angle to the nearest multiple of π.
pub fn dist_to_zero(g: f64) -> f64 {
    (g - PI * (g / PI).round()).abs()
}

/// The direction of `A·(cos θ, sin θ)`.
pub fn mobius_action(a: &Mat2, theta: ProjAngle) -> ProjAngle {
    let (s, c) = theta.0.sin_cos();
    let v = a.apply([c, s]);
    ProjAngle::new(v[1].atan2(v[0]))
}

/// Polar data of a matrix with positive determinant.
///
/// The norm is kept in log form so that products of astronomically large
/// norm can be represented. A sign bit records whether the two angle
/// reductions modulo π flipped the overall sign, which makes
/// [`PolarForm::reconstruct`] exact rather than exact up to `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarForm {
    pub log_norm: f64,
    pub u: ProjAngle,
    pub s: ProjAngle,
    negated: bool,
}

impl PolarForm {
    pub fn norm(&self) -> f64 {
        self.log_norm.exp()
    }

    /// `R_u · diag(‖A‖, ‖A‖⁻¹) · R_{π/2 − s}`.
    pub fn reconstruct(&self) -> Mat2 {
        let n = self.norm();
        let m = Mat2::rotation(self.u.0) * Mat2::diag(n, 1.0 / n) * Mat2::rotation(FRAC_PI_2 - self.s.0);
        if self.negated {
            m.scale(-1.0)
        } else {
            m
        }
    }

    /// Polar data from explicit parts, as used by the concatenation lemmas.
    pub fn from_parts(log_norm: f64, u: ProjAngle, s: ProjAngle) -> Self {
        PolarForm { log_norm, u, s, negated: false }
    }

    /// Polar data of the inverse matrix: norm kept, `u` and `s` swapped.
    pub fn inverse(&self) -> Self {
        PolarForm { log_norm: self.log_norm, u: self.s, s: self.u, negated: self.negated }
    }

    /// Polar data of `e^{log_scale} · m`, where the scaled matrix is known
    /// to be unimodular. The determinant of `m` itself may underflow, so it
    /// is not consulted.
    pub fn from_scaled(m: &Mat2, log_scale: f64, tol: f64) -> Result<Self> {
        let k = Kernel::of(m);
        let s1 = k.h1 + k.h2;
        if !(s1 > 0.0) || !s1.is_finite() {
            return Err(Error::NotUnimodular { det: m.det() });
        }
        let log_norm = log_scale + s1.ln();
        if log_norm < tol.ln_1p() {
            return Err(Error::DegenerateNorm { norm: log_norm.exp() });
        }
        let beta = 0.5 * (k.theta1 + k.theta2);
        let gamma = 0.5 * (k.theta1 - k.theta2);
        let u_raw = beta;
        let s_raw = FRAC_PI_2 - gamma;
        let u = ProjAngle::new(u_raw);
        let s = ProjAngle::new(s_raw);
        let shifts = ((u_raw - u.0) / PI).round() as i64 + ((s_raw - s.0) / PI).round() as i64;
        Ok(PolarForm { log_norm, u, s, negated: shifts.rem_euclid(2) == 1 })
    }
}

/// Polar decomposition of a unimodular matrix.
pub fn polar_decompose(a: &Mat2) -> Result<PolarForm> {
    polar_decompose_tol(a, TOL_DEGENERATE)
}

/// [`polar_decompose`] with an explicit degeneracy threshold on `‖A‖ − 1`.
pub fn polar_decompose_tol(a: &Mat2, tol: f64) -> Result<PolarForm> {
    let det = a.det();
    let n = a.norm();
    if !((det - 1.0).abs() <= 1e-9 * (1.0 + n * n)) {
        return Err(Error::NotUnimodular { det });
    }
    if n - 1.0 < tol {
        return Err(Error::DegenerateNorm { norm: n });
    }
    PolarForm::from_scaled(a, 0.0, tol)
}

/// The most contracted unit input vector of a polar form.
pub fn unit(theta: ProjAngle) -> [f64; 2] {
    let (s, c) = theta.0.sin_cos();
    [c, s]
}

/// Continuous lift of the Möbius action of a matrix with polar data `p`.
///
/// For a lifted input angle `theta`, returns a lifted output angle that is
/// continuous and increasing in `theta`, advances by exactly π when
/// `theta` does, and agrees with [`mobius_action`] modulo π. The output
/// sweeps through π in a window of width about `‖A‖⁻²` around
/// `theta ≡ s (mod π)`.
pub fn mobius_lift(p: &PolarForm, u_lift: f64, psi: f64) -> f64 {
    // psi = theta + π/2 − s, lifted by the caller
    let n = (psi / PI).round();
    let r = psi - n * PI;
    let k = (-2.0 * p.log_norm).exp();
    let core = if (r.abs() - FRAC_PI_2).abs() < 1e-300 { r } else { (k * r.tan()).atan() };
    u_lift + n * PI + core
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_product() {
        assert_eq!(Mat2::IDENTITY * Mat2::IDENTITY, Mat2::IDENTITY);
    }

    #[test]
    fn rotations_compose() {
        let m = Mat2::rotation(PI / 3.0) * Mat2::rotation(FRAC_PI_6);
        let r = Mat2::rotation(FRAC_PI_2);
        assert!(m.sub(&r).frobenius() < 1e-15);
    }

    #[test]
    fn overflow_is_reported() {
        let big = Mat2::diag(1e200, 1e-200);
        assert_eq!(big.try_mul(&big), Err(Error::ProductOverflow));
    }

    #[test]
    fn diagonal_polar() {
        let p = polar_decompose(&Mat2::diag(2.0, 0.5)).unwrap();
        assert!(close(p.norm(), 2.0, 1e-15));
        assert!(close(p.u.value(), 0.0, 1e-15));
        assert!(close(p.s.value(), FRAC_PI_2, 1e-15));
    }

    #[test]
    fn one_sided_rotation_polar() {
        let a = Mat2::rotation(FRAC_PI_6) * Mat2::diag(5.0, 0.2);
        let p = polar_decompose(&a).unwrap();
        assert!(close(p.norm(), 5.0, 1e-14));
        assert!(close(p.u.value(), FRAC_PI_6, 1e-14));
        assert!(close(p.s.value(), FRAC_PI_2, 1e-14));
    }

    #[test]
    fn degenerate_norm_is_an_error() {
        let r = Mat2::rotation(0.3);
        assert!(matches!(polar_decompose(&r), Err(Error::DegenerateNorm { .. })));
    }

    #[test]
    fn non_unimodular_is_rejected() {
        assert!(matches!(
            polar_decompose(&Mat2::diag(2.0, 2.0)),
            Err(Error::NotUnimodular { .. })
        ));
    }

    #[test]
    fn proj_dist_examples() {
        assert_eq!(proj_dist(ProjAngle::new(0.0), ProjAngle::new(0.0)), 0.0);
        let d = proj_dist(ProjAngle::new(0.1), ProjAngle::new(PI - 0.1));
        assert!(close(d, 0.2, 1e-15));
        let d = proj_dist(ProjAngle::new(PI / 4.0), ProjAngle::new(3.0 * PI / 4.0));
        assert!(close(d, FRAC_PI_2, 1e-15));
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(ProjAngle::new(PI).value(), 0.0);
        assert!(close(ProjAngle::new(-0.25).value(), PI - 0.25, 1e-15));
        assert!(ProjAngle::new(-1e-300).value() < PI);
    }

    #[test]
    fn mobius_examples() {
        let t = ProjAngle::new(0.7);
        assert!(close(mobius_action(&Mat2::IDENTITY, t).value(), 0.7, 1e-15));
        let r = mobius_action(&Mat2::rotation(2.9), t);
        assert!(close(r.value(), ProjAngle::new(3.6).value(), 1e-14));
        let l: f64 = 7.0;
        let d = mobius_action(&Mat2::hyperbolic(l), ProjAngle::new(PI / 4.0));
        assert!(close(d.value(), (l.powi(-2)).atan(), 1e-15));
    }

    #[test]
    fn mobius_lift_agrees_modulo_pi() {
        let a = Mat2::rotation(0.4) * Mat2::hyperbolic(30.0) * Mat2::rotation(1.1);
        let p = polar_decompose(&a).unwrap();
        for i in 0..200 {
            let theta = -3.0 + 0.031 * i as f64;
            let psi = theta + FRAC_PI_2 - p.s.value();
            let lifted = mobius_lift(&p, p.u.value(), psi);
            let direct = mobius_action(&a, ProjAngle::new(theta));
            assert!(proj_dist(ProjAngle::new(lifted), direct) < 1e-12, "theta {theta}");
        }
    }

    #[test]
    fn wrap_half_range() {
        for &d in &[-7.0, -FRAC_PI_2, -0.3, 0.0, FRAC_PI_2, 3.0, 10.0] {
            let w = wrap_half(d);
            assert!(w > -FRAC_PI_2 && w <= FRAC_PI_2);
            assert!(dist_to_zero(w - d) < 1e-12);
        }
    }
}
