//! Resolves a sweep from config-file text plus overrides, the same way the
//! command-line tool does, and prints the reproducible CSV to stdout.
//!
//!     cargo run --release --example config_file

use std::io;

use dqd_steady::config::parse_config;
use dqd_steady::sweep::{run_sweep, write_sweep_csv};

const FILE: &str = "\
# narrow window around resonance
bias-min = 0.93
bias-max = 0.98
steps    = 6
drive    = 0.1
mode     = all
";

fn main() -> dqd_steady::Result<()> {
    let overrides = vec![("coupling".to_string(), "0.1".to_string())];
    let cfg = parse_config(&overrides, Some(FILE))?;
    let rows = run_sweep(&cfg)?;
    write_sweep_csv(&cfg, &rows, io::stdout().lock())
}
