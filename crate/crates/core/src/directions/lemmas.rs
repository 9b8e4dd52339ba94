use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sl2::{mobius_action, polar_decompose, proj_dist, Mat2, PolarForm, ProjAngle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionPrediction {
    pub s_pred: ProjAngle,
    pub u_pred: ProjAngle,
}

/// Predicted contracting and expanding directions of `Λ₂ R_θ Λ₁`, where
/// `Λ = diag(e, 1/e)`. The prediction error is of order `min(e1, e2)⁻²`.
pub fn ess_change_predict(e1: f64, e2: f64, theta: f64) -> DirectionPrediction {
    let (sn, cs) = theta.sin_cos();
    let cot = cs / sn;
    let tan = sn / cs;
    let half_root = |e_a: f64, e_b: f64| {
        let f = 0.5 * (e_a * e_a * cot + e_a * e_a * e_b.powi(-4) * tan);
        (f * f + 1.0).sqrt() + f.abs()
    };
    let (s, u) = if e2 > e1 {
        let s = (e1 * e1 * cot).atan();
        let f2 = 0.5 * (e2 * e2 * cot + e2 * e2 * e1.powi(-4) * tan);
        let root = half_root(e2, e1);
        let u = FRAC_PI_2 - (f2.signum() * root).atan();
        (s, u)
    } else if e1 > e2 {
        let f1 = 0.5 * (e1 * e1 * cot + e1 * e1 * e2.powi(-4) * tan);
        let root = half_root(e1, e2);
        let s = (f1.signum() * root).atan();
        let u = FRAC_PI_2 - (e2 * e2 * cot).atan();
        (s, u)
    } else {
        let e4 = e1.powi(4);
        let s = (cot.signum() * (e4 * cot * cot + 1.0).sqrt()).atan();
        (s, FRAC_PI_2 - s)
    };
    DirectionPrediction { s_pred: ProjAngle::new(s), u_pred: ProjAngle::new(u) }
}

/// Residuals of the almost-invariance relations for `E = E2·E1` and
/// `F = E1·E2`, each paired with its reference bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlmostInvariance {
    /// `|E1⁻¹·s(E2) − s(E)|` against `‖E‖⁻²`.
    pub r1: f64,
    /// `|s(E2) − E1·s(E)|` against `‖E2‖⁻²`.
    pub r2: f64,
    /// `|E1·u(E2) − u(F)|` against `‖F‖⁻²`.
    pub r3: f64,
    /// `|u(E2) − E1⁻¹·u(F)|` against `‖E2‖⁻²`.
    pub r4: f64,
    pub bounds: [f64; 4],
}

impl AlmostInvariance {
    pub fn residuals(&self) -> [f64; 4] {
        [self.r1, self.r2, self.r3, self.r4]
    }

    /// Largest residual-to-bound ratio.
    pub fn worst_ratio(&self) -> f64 {
        self.residuals().iter().zip(&self.bounds).map(|(r, b)| r / b).fold(0.0, f64::max)
    }
}

pub fn almost_invariance_residuals(e1: &Mat2, e2: &Mat2) -> Result<AlmostInvariance> {
    let n1 = e1.norm();
    let n2 = e2.norm();
    if !(n1 * n1 >= 100.0 || *e1 == Mat2::IDENTITY) || n2 < n1 * n1 || n2 < 100.0 {
        return Err(Error::RegimeViolation(format!(
            "need ‖E2‖ ≥ ‖E1‖² ≥ 100, got ‖E1‖ = {n1}, ‖E2‖ = {n2}"
        )));
    }
    let e = *e2 * *e1;
    let f = *e1 * *e2;
    let pe = polar_decompose(&e)?;
    let pf = polar_decompose(&f)?;
    let p2 = polar_decompose(e2)?;
    let inv1 = e1.inverse();
    let r1 = proj_dist(mobius_action(&inv1, p2.s), pe.s);
    let r2 = proj_dist(p2.s, mobius_action(e1, pe.s));
    let r3 = proj_dist(mobius_action(e1, p2.u), pf.u);
    let r4 = proj_dist(p2.u, mobius_action(&inv1, pf.u));
    let b2 = n2.powi(-2);
    Ok(AlmostInvariance { r1, r2, r3, r4, bounds: [pe.norm().powi(-2), b2, pf.norm().powi(-2), b2] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcatReport {
    pub holds: bool,
    /// `log ‖E_{n−1}···E_0‖`.
    pub log_l_n: f64,
    /// `(1 − η)·Σ log λ_ℓ`.
    pub log_floor: f64,
    pub s_drift: f64,
    pub u_drift: f64,
    /// `λ_0^{−3/2}` and `λ_{n−1}^{−3/2}`.
    pub drift_bounds: [f64; 2],
    /// The product in polar form.
    pub product: PolarForm,
}

/// Rebuilds `E_{n−1}···E_0` from polar data and compares its norm to the
/// concatenation floor.
pub fn concat_floor_check(seq: &[PolarForm], eta: f64) -> Result<ConcatReport> {
    if seq.is_empty() {
        return Err(Error::DegenerateData("empty product".into()));
    }
    let ln10 = 10f64.ln();
    if let Some(p) = seq.iter().find(|p| p.log_norm < ln10) {
        return Err(Error::RegimeViolation(format!("factor norm {} below 10", p.norm())));
    }
    let min_log = seq.iter().map(|p| p.log_norm).fold(f64::INFINITY, f64::min);
    let floor = (-eta * min_log).exp();
    for (index, w) in seq.windows(2).enumerate() {
        let gap = proj_dist(w[1].s, w[0].u);
        if gap <= floor {
            return Err(Error::AngleCollision { index: index + 1, gap, floor });
        }
    }
    let mut m = Mat2::IDENTITY;
    let mut log_scale = 0.0;
    for p in seq {
        m = p.reconstruct() * m;
        let n = m.max_abs();
        m = m.scale(1.0 / n);
        log_scale += n.ln();
    }
    let product = PolarForm::from_scaled(&m, log_scale, 0.0)?;
    let sum: f64 = seq.iter().map(|p| p.log_norm).sum();
    let log_floor = (1.0 - eta) * sum;
    let last = seq[seq.len() - 1];
    Ok(ConcatReport {
        holds: product.log_norm >= log_floor,
        log_l_n: product.log_norm,
        log_floor,
        s_drift: proj_dist(seq[0].s, product.s),
        u_drift: proj_dist(last.u, product.u),
        drift_bounds: [(-1.5 * seq[0].log_norm).exp(), (-1.5 * last.log_norm).exp()],
        product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn product(e1: f64, e2: f64, th: f64) -> PolarForm {
        polar_decompose(&(Mat2::hyperbolic(e2) * Mat2::rotation(th) * Mat2::hyperbolic(e1))).unwrap()
    }

    #[test]
    fn equal_norm_branch_value() {
        let p = ess_change_predict(100.0, 100.0, FRAC_PI_4);
        let expect = (1e8f64 + 1.0).sqrt().atan();
        assert!((p.s_pred.value() - expect).abs() < 1e-14);
    }

    #[test]
    fn small_angle_sends_s_to_vertical() {
        for (e1, e2) in [(10.0, 1e3), (1e3, 10.0), (50.0, 50.0)] {
            let p = ess_change_predict(e1, e2, 1e-12);
            assert!((p.s_pred.value() - FRAC_PI_2).abs() < 1e-6);
        }
    }

    #[test]
    fn unequal_branch_against_exact_polar() {
        let (e1, e2, th) = (1e3, 1e6, 0.3);
        let p = ess_change_predict(e1, e2, th);
        let exact = product(e1, e2, th);
        assert!(proj_dist(p.s_pred, exact.s) <= 10.0 / (e1 * e1));
    }

    #[test]
    fn branches_meet_at_equal_norms() {
        for th in [0.2, 0.9, 2.0] {
            let e = 300.0;
            let eq = ess_change_predict(e, e, th);
            let up = ess_change_predict(e * (1.0 + 1e-9), e, th);
            let down = ess_change_predict(e, e * (1.0 + 1e-9), th);
            for other in [up, down] {
                assert!(proj_dist(eq.s_pred, other.s_pred) < 1e-6 * eq.s_pred.value().max(1e-3));
            }
        }
    }

    #[test]
    fn identity_first_factor_is_exact() {
        let e2 = Mat2::rotation(0.4) * Mat2::hyperbolic(500.0) * Mat2::rotation(1.1);
        let r = almost_invariance_residuals(&Mat2::IDENTITY, &e2).unwrap();
        assert_eq!(r.r1, 0.0);
        assert_eq!(r.r2, 0.0);
    }

    #[test]
    fn diagonal_pairs_have_no_residual() {
        let r = almost_invariance_residuals(&Mat2::hyperbolic(20.0), &Mat2::hyperbolic(900.0)).unwrap();
        assert!(r.residuals().iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn out_of_regime_is_rejected() {
        let r = almost_invariance_residuals(&Mat2::hyperbolic(20.0), &Mat2::hyperbolic(30.0));
        assert!(matches!(r, Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn aligned_diagonals_multiply_norms() {
        let seq: Vec<PolarForm> = [12.0, 40.0, 300.0]
            .iter()
            .map(|&e| polar_decompose(&Mat2::hyperbolic(e)).unwrap())
            .map(|p| PolarForm::from_parts(p.log_norm, ProjAngle::new(0.0), ProjAngle::new(FRAC_PI_2)))
            .collect();
        let r = concat_floor_check(&seq, 0.05).unwrap();
        assert!((r.log_l_n - (12.0f64 * 40.0 * 300.0).ln()).abs() < 1e-12);
        assert!(r.s_drift < 1e-12 && r.u_drift < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn two_factor_product_matches_direct_polar() {
        let a = Mat2::rotation(0.3) * Mat2::hyperbolic(30.0) * Mat2::rotation(1.2);
        let b = Mat2::rotation(2.1) * Mat2::hyperbolic(80.0) * Mat2::rotation(0.4);
        let seq = [polar_decompose(&a).unwrap(), polar_decompose(&b).unwrap()];
        let r = concat_floor_check(&seq, 0.05).unwrap();
        let direct = polar_decompose(&(b * a)).unwrap();
        assert!((r.log_l_n - direct.log_norm).abs() < 1e-10);
        assert!(proj_dist(r.product.s, direct.s) < 1e-10);
        assert!(proj_dist(r.product.u, direct.u) < 1e-10);
    }

    #[test]
    fn collision_is_reported_with_index() {
        let p = PolarForm::from_parts(5.0, ProjAngle::new(0.3), ProjAngle::new(0.3 + PI / 2.0));
        let q = PolarForm::from_parts(5.0, ProjAngle::new(1.0), ProjAngle::new(0.3));
        let e = concat_floor_check(&[p, q], 0.05).unwrap_err();
        assert!(matches!(e, Error::AngleCollision { index: 1, .. }));
    }
}
