//! Checks the pole solution against direct time integration of the
//! second-order master equation at weak coupling, where both should agree.
//! Each point runs two trajectories (step and half step); expect a few
//! minutes in release mode.
//!
//!     cargo run --release --example oracle_comparison

use dqd_steady::config::SweepConfig;
use dqd_steady::oracle::TrajectoryConfig;
use dqd_steady::sweep::compare_with_oracle;
use dqd_steady::DqdParams;

fn main() -> dqd_steady::Result<()> {
    let cfg = SweepConfig {
        coupling: 0.02,
        ..Default::default()
    };
    let traj = TrajectoryConfig::default();
    let resonance = DqdParams::resonant_bias(cfg.tunneling);
    println!(
        "{:>9} {:>10} {:>10} {:>10} {:>10}",
        "bias", "poles", "oracle", "diff", "halving"
    );
    for k in -2..=2 {
        let bias = resonance + 0.02 * k as f64;
        let c = compare_with_oracle(&cfg, bias, &traj)?;
        println!(
            "{bias:9.5} {:10.6} {:10.6} {:10.2e} {:10.2e}",
            c.poles,
            c.oracle.value,
            c.difference(),
            c.oracle.change
        );
    }
    Ok(())
}
