//! Lyapunov exponent of the Szegő cocycle with `θ = ½cos(2πx)` against the
//! lower bound `−½(1 − ε)·log(1 − λ)`.
//!
//! `cargo run --release --example szego -- [n] [epsilon]`

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::{Family, Potential, QpCocycle};
use cocycle_lab::spectral::finite_le;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(4000.0) as u64;
    let eps = args.get(1).copied().unwrap_or(0.1);

    let theta = Potential::by_name("0.5*cos").unwrap();
    println!("lambda,min_t L_n,bound,ratio");
    for lambda in [0.5, 0.9, 0.99, 0.999, 0.9999] {
        let l = (0..8)
            .map(|j| {
                let c = QpCocycle::new(GOLDEN, Family::Szego { lambda, k: 0, t: j as f64 / 8.0 }, theta.clone());
                finite_le(&c, n, 128).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        let bound = -0.5 * (1.0 - eps) * (1.0f64 - lambda).ln();
        println!("{lambda},{l:.6},{bound:.6},{:.4}", l / bound);
    }
}
