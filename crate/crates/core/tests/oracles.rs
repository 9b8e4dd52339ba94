//! Independent oracles for the transfer product and the Lyapunov exponent.

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::{orbit_point, transfer, Family, Potential, QpCocycle};
use cocycle_lab::sl2::Mat2;
use cocycle_lab::spectral::{hull_grid, le_refined};
use num_complex::Complex64;
use twofloat::TwoFloat;

/// A 2×2 product carried in double-double with a separate binary exponent.
struct DdProduct {
    m: [TwoFloat; 4],
    log2_scale: i32,
}

impl DdProduct {
    fn identity() -> Self {
        let (one, zero) = (TwoFloat::from(1.0), TwoFloat::from(0.0));
        DdProduct { m: [one, zero, zero, one], log2_scale: 0 }
    }

    fn left_mul(&mut self, a: [f64; 4]) {
        let [b11, b12, b21, b22] = self.m;
        let a: [TwoFloat; 4] = a.map(TwoFloat::from);
        self.m = [
            a[0] * b11 + a[1] * b21,
            a[0] * b12 + a[1] * b22,
            a[2] * b11 + a[3] * b21,
            a[2] * b12 + a[3] * b22,
        ];
        let big = self.m.iter().map(|v| v.hi().abs()).fold(0.0, f64::max);
        let e = big.log2().floor() as i32;
        let s = TwoFloat::from(2f64.powi(-e));
        for v in &mut self.m {
            *v *= s;
        }
        self.log2_scale += e;
    }

    fn log_norm(&self) -> f64 {
        let [a, b, c, d] = self.m;
        let f = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (f * f - TwoFloat::from(4.0) * det * det).sqrt();
        let s1_sq = (f + disc) * TwoFloat::from(0.5);
        0.5 * f64::from(s1_sq.ln()) + self.log2_scale as f64 * std::f64::consts::LN_2
    }
}

#[test]
fn transfer_matches_double_double_product() {
    let lambda = 1e3;
    let v = Potential::cos();
    let mut worst: f64 = 0.0;
    for &e in &[-1001.5, -400.8, 0.0, 3.7, 640.25, 999.0] {
        let c = QpCocycle::schrodinger(GOLDEN, e, lambda, v.clone());
        for k in 0..8 {
            let x = (k as f64 + 0.37) / 8.0;
            let mut dd = DdProduct::identity();
            for n in 1..=80i64 {
                let xj = orbit_point(x, n - 1, GOLDEN);
                dd.left_mul([e - lambda * v.value(xj), -1.0, 1.0, 0.0]);
                let got = transfer(&c, x, n).unwrap().log_norm;
                let want = dd.log_norm();
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    assert!(worst <= 1e-12, "worst relative log-norm error {worst:e}");
}

/// For `v = cos` the coupling `λ` is the almost-Mathieu operator at `λ/2`,
/// whose exponent is `log(λ/2)` on the spectrum and larger off it.
#[test]
fn exponent_of_the_almost_mathieu_operator() {
    let lambda: f64 = 10.0;
    let floor = (lambda / 2.0).ln();
    let ls: Vec<f64> = hull_grid(&Potential::cos(), lambda, 48)
        .into_iter()
        .map(|e| le_refined(&QpCocycle::schrodinger(GOLDEN, e, lambda, Potential::cos()), 128, 256).unwrap())
        .collect();
    let min = ls.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(ls.iter().all(|&l| l >= floor - 2e-3), "{ls:?}");
    assert!((min - floor).abs() <= 2e-3, "min {min} vs {floor}");
}

/// The complex SU(1,1) form of the Szegő cocycle. It factors as
/// `D(−φ/2)·H·D(πt + φ/2)` with `D(β) = diag(e^{iβ}, e^{−iβ})` and
/// `φ = 2π(θ + kx)`, so conjugating by `D(φ/2)` and then by
/// `(−1/(1+i))·((1, −i), (1, i))` gives the real form.
fn szego_complex(lambda: f64, theta: &Potential, k: i64, t: f64, x: f64) -> [Complex64; 4] {
    let tau = std::f64::consts::TAU;
    let f = Complex64::from_polar(lambda, tau * (theta.value(x) + k as f64 * x));
    let sqrt_e = Complex64::from_polar(1.0, std::f64::consts::PI * t);
    let s = (1.0 - lambda * lambda).powf(-0.5);
    [sqrt_e * s, -f.conj() / sqrt_e * s, -f * sqrt_e * s, s / sqrt_e]
}

fn complex_log_norm(lambda: f64, theta: &Potential, k: i64, t: f64, x: f64, n: usize) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [one, zero, zero, one];
    let mut log_scale = 0.0;
    for j in 0..n {
        let a = szego_complex(lambda, theta, k, t, orbit_point(x, j as i64, GOLDEN));
        m = [
            a[0] * m[0] + a[1] * m[2],
            a[0] * m[1] + a[1] * m[3],
            a[2] * m[0] + a[3] * m[2],
            a[2] * m[1] + a[3] * m[3],
        ];
        let big = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for z in &mut m {
            *z /= big;
        }
        log_scale += big.ln();
    }
    let f: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let det = (m[0] * m[3] - m[1] * m[2]).norm();
    log_scale + 0.5 * (0.5 * (f + (f * f - 4.0 * det * det).max(0.0).sqrt())).ln()
}

#[test]
fn szego_complex_form_is_unimodular() {
    let theta = Potential::by_name("0.5*cos").unwrap();
    for j in 0..16 {
        let a = szego_complex(0.9, &theta, 1, 0.4, j as f64 / 16.0);
        let det = a[0] * a[3] - a[1] * a[2];
        assert!((det - 1.0).norm() <= 1e-13, "{det}");
    }
}

// both conjugations are unitary, so the norms agree orbit by orbit
#[test]
fn szego_real_form_matches_the_complex_form() {
    let theta = Potential::by_name("0.5*cos").unwrap();
    let n = 4000usize;
    for &lambda in &[0.3, 0.9] {
        for &(k, t) in &[(0i64, 0.0), (0, 0.31), (1, 0.77)] {
            let c = QpCocycle::new(GOLDEN, Family::Szego { lambda, k, t }, theta.clone());
            for j in 0..16 {
                // A_n = D·[H R_ψ(x_{n−1}) ⋯ H R_ψ(x_1)]·H·D′ with D, D′ unitary
                let x = (j as f64 + 0.5) / 16.0;
                let tail = transfer(&c, orbit_point(x, 1, GOLDEN), n as i64 - 1).unwrap();
                let h = Mat2::hyperbolic(((1.0 + lambda) / (1.0 - lambda)).sqrt());
                let real = tail.log_norm + (tail.normalized * h).norm().ln();
                let complex = complex_log_norm(lambda, &theta, k, t, x, n);
                assert!((real - complex).abs() <= 1e-9 * complex.abs().max(1.0), "λ {lambda} k {k} t {t} x {x}: {real} vs {complex}");
            }
        }
    }
}
