//! Large-deviation measures of the finite-scale exponent and a weak Hölder
//! fit of `L(E)` on energies accumulating at `E₀` from above.
//!
//! The potential is `cos(2πx) + 0.2·cos(4πx)`; for the pure cosine the
//! exponent is constant on the spectrum and there is nothing to fit.
//!
//! `cargo run --release --example ldt_holder -- [lambda] [energy]`

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::{Family, Potential, QpCocycle};
use cocycle_lab::spectral::{fit_ldt_delta, holder_fit, ldt_default_params, ldt_deviation_measure, le_refined};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lambda = args.first().copied().unwrap_or(5.0);
    let e0 = args.get(1).copied().unwrap_or(0.4);

    let base = QpCocycle::schrodinger(GOLDEN, e0, lambda, Potential::trig(0.2, 0.0).unwrap());
    let at = |e: f64| base.with_family(Family::Schrodinger { energy: e, lambda });
    let l_ref = le_refined(&base, 256, 2048).unwrap();
    let eps = 0.02 * lambda.ln();
    let params = ldt_default_params(2.5, 0.3, 0.1, lambda.ln());
    let reports: Vec<_> =
        [10u64, 30, 100, 300, 1000].iter().map(|&i| ldt_deviation_measure(&base, i, eps, 2048, l_ref, params).unwrap()).collect();
    for r in &reports {
        println!("i = {:5}: measure {:.4}", r.i, r.measure_hat);
    }
    println!("fitted δ: {:?}", fit_ldt_delta(&reports, params.1));

    // offsets from 1e-6 to 1 so that adjacent spacings span six decades
    let es: Vec<f64> = (0..64).map(|k| e0 + 10f64.powf(-6.0 + 6.0 * k as f64 / 63.0)).collect();
    let ls: Vec<f64> = es.iter().map(|&e| le_refined(&at(e), 128, 256).unwrap()).collect();
    match holder_fit(&es, &ls) {
        Ok(f) => println!("Hölder fit: c = {:.4}, C = {:.4e}, σ = {:.3}, rms {:.3}", f.c_hat, f.big_c_hat, f.sigma_hat, f.residual),
        Err(e) => println!("Hölder fit: {e}"),
    }
}
