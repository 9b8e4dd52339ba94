//! Integrated density of states by Sturm counts and the Thouless formula
//! against the transfer-matrix exponent.
//!
//! `cargo run --release --example spectral_measures -- [lambda] [n]`

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::{Family, Potential, QpCocycle};
use cocycle_lab::spectral::{dirichlet_eigenvalues, finite_le, ids_average, spectrum_hull, thouless_le};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lambda = args.first().copied().unwrap_or(10.0);
    let n = args.get(1).copied().unwrap_or(1000.0) as usize;

    let base = QpCocycle::schrodinger(GOLDEN, 0.0, lambda, Potential::cos());
    let at = |e: f64| base.with_family(Family::Schrodinger { energy: e, lambda });
    let (lo, hi) = spectrum_hull(&base.potential, lambda);

    println!("E,N_n");
    for k in 0..=20 {
        let e = lo + (hi - lo) * k as f64 / 20.0;
        println!("{e:.6},{:.6}", ids_average(&at(e), e, n, 16).unwrap());
    }

    let eigs = dirichlet_eigenvalues(&base, n, 0.0).unwrap();
    println!("\nE,L_thouless,L_n");
    for j in (n / 10..n).step_by(n / 10) {
        let e = 0.5 * (eigs[j - 1] + eigs[j]);
        let lt = thouless_le(&eigs, e).unwrap();
        let ln = finite_le(&at(e), n as u64, 256).unwrap();
        println!("{e:.6},{lt:.6},{ln:.6}");
    }
}
