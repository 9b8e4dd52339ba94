//! Runs every registered verification suite with its default trial count
//! and prints one JSON line per report.
//!
//! `cargo run --release --example lemma_suites [seed]`

use cocycle_lab::harness::{run_lemma_suite, SuiteConfig, SUITES};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(SuiteConfig::default().seed);
    let cfg = SuiteConfig { seed, ..SuiteConfig::default() };
    for suite in SUITES {
        let started = std::time::Instant::now();
        match run_lemma_suite(suite.id, &cfg) {
            Ok(r) => println!("{}  # {:.2?}", r.json_line(), started.elapsed()),
            Err(e) => println!("# {}: {e}", suite.id),
        }
    }
}
