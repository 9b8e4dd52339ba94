//! Lyapunov exponents, the integrated density of states and the estimators
//! built on them.
//!
//! `L_n(E) = (1/n)∫ log‖A_n(x)‖ dx` is approximated on the uniform grid
//! `x_k = k/x_grid`. The IDS comes from Sturm sign counts on the Dirichlet
//! truncation `H_{n,x}` with diagonal `λv(x + jα)` and unit off-diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{orbit_point, transfer, transfer_checkpoints, Family, Potential, QpCocycle};
use crate::error::{Error, Result};
use crate::sl2::Mat2;

/// One energy of a spectral scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub e: f64,
    pub l_n: f64,
    pub l_refined: f64,
    pub n: u64,
    /// IDS of `H_{n,x}` averaged over `ids_x_count` phases.
    pub n_n: f64,
    pub x_count: usize,
}

fn grid_point(k: usize, x_grid: usize) -> f64 {
    k as f64 / x_grid as f64
}

/// Order-preserving parallel map over the x grid followed by a sequential
/// sum, so the result does not depend on the thread count.
fn grid_mean<F>(x_grid: usize, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Vec<f64> = (0..x_grid).into_par_iter().map(|k| f(grid_point(k, x_grid))).collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / x_grid as f64)
}

fn check_grid(x_grid: usize) -> Result<()> {
    if x_grid == 0 {
        return Err(Error::Config("x_grid must be at least 1".into()));
    }
    Ok(())
}

/// `(1/n)·mean_k log‖A_n(x_k)‖`.
pub fn finite_le(c: &QpCocycle, n: u64, x_grid: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    check_grid(x_grid)?;
    Ok(grid_mean(x_grid, |x| Ok(transfer(c, x, n as i64)?.log_norm))? / n as f64)
}

/// `L_n` for every `n` in the ascending list `ns`, one pass per grid point.
pub fn finite_le_many(c: &QpCocycle, ns: &[u64], x_grid: usize) -> Result<Vec<f64>> {
    check_grid(x_grid)?;
    if ns.is_empty() || ns[0] == 0 {
        return Err(Error::Config("scales must be positive".into()));
    }
    let rows: Vec<Vec<f64>> = (0..x_grid)
        .into_par_iter()
        .map(|k| {
            let t = transfer_checkpoints(c, grid_point(k, x_grid), ns)?;
            Ok(t.iter().map(|r| r.log_norm).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; ns.len()];
    for row in &rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Ok(out.iter().zip(ns).map(|(s, &n)| s / (x_grid as f64 * n as f64)).collect())
}

/// `(1/n) log‖A_n(x)‖` along the single orbit of `x`.
pub fn orbit_le(c: &QpCocycle, x: f64, n: u64) -> Result<f64> {
    Ok(transfer(c, x, n as i64)?.log_norm / n as f64)
}

/// `2L_{2l} − L_l`.
pub fn le_refined(c: &QpCocycle, l: u64, x_grid: usize) -> Result<f64> {
    if l < 8 {
        return Err(Error::Config(format!("refinement scale {l} is below 8")));
    }
    let v = finite_le_many(c, &[l, 2 * l], x_grid)?;
    Ok(2.0 * v[1] - v[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvalancheReport {
    /// Both hypotheses: `min‖E_j‖ ≥ μ ≥ n` and every pairwise cancellation
    /// `log‖E_{j+1}‖ + log‖E_j‖ − log‖E_{j+1}E_j‖` below `½ log μ`.
    pub cond_ok: bool,
    pub lhs: f64,
    /// `n/μ`.
    pub scale: f64,
}

/// Starts from the first pair product exactly as the pair sum forms it, so
/// that two factors telescope to zero bit for bit.
fn log_norm_of_product(mats: &[Mat2]) -> f64 {
    let mut m = mats[1] * mats[0];
    let mut log_scale = 0.0;
    for a in &mats[2..] {
        let s = m.max_abs();
        m = *a * m.scale(1.0 / s);
        log_scale += s.ln();
    }
    log_scale + m.norm().ln()
}

/// `|log‖E_n⋯E_1‖ + Σ_{j=2}^{n−1} log‖E_j‖ − Σ_{j=1}^{n−1} log‖E_{j+1}E_j‖|`.
pub fn avalanche_check(mats: &[Mat2], mu: f64) -> Result<AvalancheReport> {
    let n = mats.len();
    if n < 2 {
        return Err(Error::Config("the avalanche check needs at least two matrices".into()));
    }
    let logs: Vec<f64> = mats.iter().map(|m| m.norm().ln()).collect();
    let pairs: Vec<f64> = mats.windows(2).map(|w| (w[1] * w[0]).norm().ln()).collect();
    let inner: f64 = logs[1..n - 1].iter().sum();
    let pair_sum: f64 = pairs.iter().sum();
    let lhs = (log_norm_of_product(mats) + inner - pair_sum).abs();
    let floor_ok = logs.iter().all(|&l| l >= mu.ln()) && mu >= n as f64;
    let cancel_ok = pairs.iter().enumerate().all(|(j, &p)| logs[j] + logs[j + 1] - p < 0.5 * mu.ln());
    Ok(AvalancheReport { cond_ok: floor_ok && cancel_ok, lhs, scale: n as f64 / mu })
}

fn schrodinger_params(c: &QpCocycle) -> Result<(f64, f64)> {
    match c.family {
        Family::Schrodinger { energy, lambda } => Ok((energy, lambda)),
        _ => Err(Error::Config("the Dirichlet truncation needs a Schrödinger cocycle".into())),
    }
}

/// Diagonal of `H_{n,x}`.
pub fn dirichlet_diagonal(c: &QpCocycle, n: usize, x: f64) -> Result<Vec<f64>> {
    let (_, lambda) = schrodinger_params(c)?;
    Ok((0..n).map(|j| lambda * c.potential.value(orbit_point(x, j as i64, c.alpha))).collect())
}

/// Number of eigenvalues below `e` of the tridiagonal matrix with diagonal
/// `diag` and unit off-diagonal: the count of negative pivots of `H − e`.
pub fn sturm_count(diag: &[f64], e: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut d = 1.0;
    for (j, &a) in diag.iter().enumerate() {
        d = if j == 0 { a - e } else { (a - e) - 1.0 / d };
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `#{eigenvalues of H_{n,x} below E}/n`.
pub fn ids_dirichlet(c: &QpCocycle, e: f64, n: usize, x: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Config("the truncation needs n ≥ 2".into()));
    }
    let diag = dirichlet_diagonal(c, n, x)?;
    Ok(sturm_count(&diag, e) as f64 / n as f64)
}

/// [`ids_dirichlet`] averaged over the uniform phase grid.
pub fn ids_average(c: &QpCocycle, e: f64, n: usize, x_grid: usize) -> Result<f64> {
    check_grid(x_grid)?;
    grid_mean(x_grid, |x| ids_dirichlet(c, e, n, x))
}

/// All eigenvalues of `H_{n,x}`, ascending, by bisection on Sturm counts.
pub fn dirichlet_eigenvalues(c: &QpCocycle, n: usize, x: f64) -> Result<Vec<f64>> {
    let diag = dirichlet_diagonal(c, n, x)?;
    let lo0 = diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
    let hi0 = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let eig: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            // the j-th eigenvalue is the least E with more than j eigenvalues below or at it
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(&diag, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    Ok(eig)
}

/// `(1/n)·Σ_j log|E − E_j|`.
pub fn thouless_le(eigs: &[f64], e: f64) -> Result<f64> {
    if eigs.is_empty() {
        return Err(Error::Config("no eigenvalues given".into()));
    }
    let mut sum = 0.0;
    for &ej in eigs {
        let d = (e - ej).abs();
        if d < 1e-12 {
            return Err(Error::SingularEnergy { energy: e });
        }
        sum += d.ln();
    }
    Ok(sum / eigs.len() as f64)
}

/// Measured large-deviation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub i: u64,
    pub epsilon: f64,
    pub measure_hat: f64,
    /// `e^{−(δ/2) i^σ}`.
    pub bound: f64,
    pub delta: f64,
    pub sigma: f64,
}

/// Defaults of the large-deviation exponent: `σ = 1/(2τC)` and
/// `δ = 0.01·ε·log λ`.
pub fn ldt_default_params(tau: f64, c: f64, eps: f64, log_lambda: f64) -> (f64, f64) {
    (0.01 * eps * log_lambda, 1.0 / (2.0 * tau * c))
}

/// Fraction of the grid with `|(1/i)log‖A_i(x)‖ − L_ref| > eps_log`.
pub fn ldt_deviation_measure(
    c: &QpCocycle,
    i: u64,
    eps_log: f64,
    x_grid: usize,
    l_ref: f64,
    (delta, sigma): (f64, f64),
) -> Result<DeviationReport> {
    if x_grid < 1000 {
        return Err(Error::Config(format!("x_grid = {x_grid} is below 1000")));
    }
    if i == 0 {
        return Err(Error::Config("i must be at least 1".into()));
    }
    let hits = grid_mean(x_grid, |x| {
        let li = transfer(c, x, i as i64)?.log_norm / i as f64;
        Ok(if (li - l_ref).abs() > eps_log { 1.0 } else { 0.0 })
    })?;
    Ok(DeviationReport {
        i,
        epsilon: eps_log,
        measure_hat: hits,
        bound: (-0.5 * delta * (i as f64).powf(sigma)).exp(),
        delta,
        sigma,
    })
}

/// Least-squares `δ` in `log m_i ≈ log K − (δ/2)·i^σ` over the reports with
/// a nonzero measure. `None` with fewer than two such reports.
pub fn fit_ldt_delta(reports: &[DeviationReport], sigma: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        reports.iter().filter(|r| r.measure_hat > 0.0).map(|r| ((r.i as f64).powf(sigma), r.measure_hat.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, _, _) = linear_fit(&pts)?;
    Some(-2.0 * slope)
}

/// `(slope, intercept, rms residual)` of an ordinary least-squares line.
fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Some((slope, icpt, (rss / n).sqrt()))
}

/// Fit of `|L(E) − L(E′)| ≈ C·exp(−c·(log|E − E′|⁻¹)^σ)` over adjacent pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub c_hat: f64,
    pub big_c_hat: f64,
    pub sigma_hat: f64,
    /// RMS residual in `log|ΔL|`.
    pub residual: f64,
    pub pairs: usize,
}

pub fn holder_fit(es: &[f64], ls: &[f64]) -> Result<HolderFit> {
    if es.len() != ls.len() {
        return Err(Error::Config("energies and exponents differ in length".into()));
    }
    if es.len() < 50 {
        return Err(Error::Config(format!("{} samples; need at least 50", es.len())));
    }
    if es.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("energies must be strictly increasing".into()));
    }
    if ls.iter().all(|&l| l == ls[0]) {
        return Err(Error::DegenerateData("all exponents are equal".into()));
    }
    let data: Vec<(f64, f64)> = es
        .windows(2)
        .zip(ls.windows(2))
        .filter(|(_, l)| l[1] != l[0])
        .map(|(e, l)| ((1.0 / (e[1] - e[0])).ln(), (l[1] - l[0]).abs().ln()))
        .collect();
    if data.len() < 3 || data.iter().any(|d| d.0 <= 0.0) {
        return Err(Error::DegenerateData("needs energy spacings below 1 and several distinct pairs".into()));
    }
    let fit_at = |sigma: f64| {
        let pts: Vec<(f64, f64)> = data.iter().map(|&(x, y)| (x.powf(sigma), y)).collect();
        linear_fit(&pts)
    };
    let rms = |sigma: f64| fit_at(sigma).map_or(f64::INFINITY, |f| f.2);
    // coarse scan, then golden refinement around the best grid point
    let grid: Vec<f64> = (1..=120).map(|k| 0.025 * k as f64).collect();
    let best = grid.iter().copied().min_by(|a, b| rms(*a).total_cmp(&rms(*b))).unwrap();
    let (sigma, _) = crate::induction::golden_min(rms, (best - 0.025).max(1e-3), best + 0.025, 100);
    let (slope, icpt, residual) =
        fit_at(sigma).ok_or_else(|| Error::DegenerateData("energy spacings are all equal".into()))?;
    Ok(HolderFit { c_hat: -slope, big_c_hat: icpt.exp(), sigma_hat: sigma, residual, pairs: data.len() })
}

/// Refined exponents over an energy grid and the least `L/log λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityScan {
    pub min_ratio: f64,
    pub argmin: f64,
    pub table: Vec<SpectralSample>,
}

/// Number of phases the scan averages the IDS over.
pub const SCAN_IDS_PHASES: usize = 16;

/// `[−2 + λ inf v, 2 + λ sup v]`, which contains the spectrum.
pub fn spectrum_hull(v: &Potential, lambda: f64) -> (f64, f64) {
    let (lo, hi) = v.range();
    (-2.0 + lambda * lo, 2.0 + lambda * hi)
}

/// Uniform grid of `points` energies spanning the spectrum hull.
pub fn hull_grid(v: &Potential, lambda: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = spectrum_hull(v, lambda);
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// Per energy: `L_n`, the refinement `2L_n − L_{n/2}` and the IDS at `n`.
pub fn positivity_scan(
    v: &Potential,
    lambda: f64,
    alpha: f64,
    e_grid: &[f64],
    n: u64,
    x_grid: usize,
) -> Result<PositivityScan> {
    if lambda < 10.0 {
        return Err(Error::LambdaTooSmall { lambda, min: 10.0 });
    }
    if n < 16 {
        return Err(Error::Config(format!("scale {n} is below 16")));
    }
    if e_grid.is_empty() {
        return Err(Error::Config("empty energy grid".into()));
    }
    let (lo, hi) = spectrum_hull(v, lambda);
    let covers = e_grid.iter().copied().fold(f64::INFINITY, f64::min) <= lo + 1e-9
        && e_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= hi - 1e-9;
    if !covers {
        return Err(Error::Config(format!("energy grid does not cover [{lo}, {hi}]")));
    }
    let base = QpCocycle::schrodinger(alpha, 0.0, lambda, v.clone());
    let log_lambda = lambda.ln();
    let mut table = Vec::with_capacity(e_grid.len());
    for &e in e_grid {
        let c = base.with_family(Family::Schrodinger { energy: e, lambda });
        let ls = finite_le_many(&c, &[n / 2, n], x_grid)?;
        let n_n = ids_average(&c, e, n as usize, SCAN_IDS_PHASES)?;
        table.push(SpectralSample {
            e,
            l_n: ls[1],
            l_refined: 2.0 * ls[1] - ls[0],
            n,
            n_n,
            x_count: x_grid,
        });
    }
    let (argmin, min_ratio) = table
        .iter()
        .map(|s| (s.e, s.l_refined / log_lambda))
        .fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(PositivityScan { min_ratio, argmin, table })
}

/// CSV rows `E,n,L_n,L_refined,N_n,ratio`.
pub fn scan_csv(scan: &PositivityScan, log_lambda: f64) -> String {
    let mut out = String::from("E,n,L_n,L_refined,N_n,ratio\n");
    for s in &scan.table {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.e,
            s.n,
            s.l_n,
            s.l_refined,
            s.n_n,
            s.l_refined / log_lambda
        ));
    }
    out
}
