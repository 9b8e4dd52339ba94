//! Runs the multiscale induction for `v = cos`, golden α and prints the
//! JSON-lines trace for a few parameters.
//!
//! `cargo run --release --example induction_trace -- 1000 0.0 0.36`

use cocycle_lab::arithmetic::GOLDEN;
use cocycle_lab::cocycle::{Potential, QpCocycle};
use cocycle_lab::induction::{run_induction, InductionConfig};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lambda = args.first().copied().unwrap_or(1e3);
    let ts = if args.len() > 1 { args[1..].to_vec() } else { vec![0.0, 0.36, 0.9] };
    let config = InductionConfig::default();
    for t in ts {
        let c = QpCocycle::reduced(GOLDEN, t, lambda, Potential::cos());
        let started = std::time::Instant::now();
        match run_induction(&c, &config, 3) {
            Ok(run) => {
                print!("{}", run.trace());
                if let Some(e) = &run.stopped {
                    println!("# t = {t}: stopped: {e}");
                }
                println!("# t = {t}: {} levels in {:.2?}", run.states.len(), started.elapsed());
            }
            Err(e) => println!("# t = {t}: {e}"),
        }
    }
}
