//! Stable and unstable direction fields of the reduced cocycle around the
//! two critical points of `t − cos(2πx)`, with the gap curve and its zeros.
//!
//! `cargo run --release --example gap_field -- [t] [lambda] [depth]`

use cocycle_lab::arithmetic::{CircleInterval, GOLDEN};
use cocycle_lab::cocycle::{Potential, QpCocycle};
use cocycle_lab::directions::{gap_curve, sample_directions};
use cocycle_lab::induction::{starting_criticals, zero_crossings};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let t = args.first().copied().unwrap_or(0.3);
    let lambda = args.get(1).copied().unwrap_or(1e3);
    let depth = args.get(2).copied().unwrap_or(8.0) as u64;

    let c = QpCocycle::reduced(GOLDEN, t, lambda, Potential::cos());
    for x0 in starting_criticals(&c, t) {
        let arc = CircleInterval::new(x0, 0.02).unwrap();
        let field = sample_directions(&c, &arc, depth, depth, 401).unwrap();
        let g = gap_curve(&field).unwrap();
        let (g_min, x_min) = g.min_abs();
        let zeros = zero_crossings(&g.xs, &g.g_vals);
        println!("critical point {x0:.6}: min |g| = {g_min:.3e} at {x_min:.6}, zeros {zeros:.6?}");
    }
}
