//! Scans the refined Lyapunov exponent over the spectrum hull of the
//! `cos` potential and compares the minimum with the almost-Mathieu value
//! `log(λ/2)`.
//!
//! `cargo run --release --example positivity_scan -- [lambda] [points] [n]`

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::Potential;
use cocycle_lab::spectral::{hull_grid, positivity_scan, scan_csv};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lambda = args.first().copied().unwrap_or(100.0);
    let points = args.get(1).copied().unwrap_or(41.0) as usize;
    let n = args.get(2).copied().unwrap_or(2000.0) as u64;

    let v = Potential::cos();
    let grid = hull_grid(&v, lambda, points);
    let scan = positivity_scan(&v, lambda, GOLDEN, &grid, n, 256).expect("scan");
    print!("{}", scan_csv(&scan, lambda.ln()));
    println!(
        "# min L/log λ = {:.5} at E = {:.3}; log(λ/2)/log λ = {:.5}",
        scan.min_ratio,
        scan.argmin,
        (lambda / 2.0).ln() / lambda.ln()
    );
}
