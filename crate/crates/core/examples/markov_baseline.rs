//! Compares the four approximation levels at a handful of biases: full
//! dynamical poles, bare-frame dynamical poles, the Markovian baseline and
//! the undriven ground state.
//!
//!     cargo run --release --example markov_baseline

use dqd_steady::config::{Mode, SweepConfig};
use dqd_steady::sweep::run_sweep;

fn main() -> dqd_steady::Result<()> {
    let cfg = SweepConfig {
        bias_min: 0.85,
        bias_max: 1.05,
        steps: 11,
        mode: Mode::All,
        ..Default::default()
    };
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "bias", "full", "bare-dyn", "markov", "no-drive"
    );
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    for row in run_sweep(&cfg)? {
        println!(
            "{:8.4} {:>10} {:>10} {:>10} {:>10}",
            row.bias,
            show(row.full),
            show(row.bare_dynamical),
            show(row.markov),
            show(row.no_drive)
        );
    }
    Ok(())
}
