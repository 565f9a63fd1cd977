//! Tabulates the phonon spectral density J and its Hilbert transform F,
//! then reports F'(0) and a few values of the bath correlation function.
//!
//!     cargo run --release --example bath_spectrum

use dqd_steady::sweep::emit_spectrum;
use dqd_steady::{BathSpectrum, Spectrum};

fn main() -> dqd_steady::Result<()> {
    let bath = BathSpectrum::new(0.2, 20.0, 2.0)?;

    println!("{:>8} {:>12} {:>12}", "omega", "J", "F");
    for row in emit_spectrum(&bath, -3.0, 1.0, 21)? {
        let f = row.hilbert.map_or("-".to_string(), |f| format!("{f:12.6}"));
        println!("{:8.3} {:12.6} {f:>12}", row.omega, row.density);
    }

    // J oscillates with the inter-dot separation; count its local maxima.
    let grid: Vec<f64> = (0..=3000).map(|i| -2.0 + 1.5 * i as f64 / 3000.0).collect();
    let j: Vec<f64> = grid.iter().map(|&w| bath.density(w)).collect();
    let peaks: Vec<f64> = (1..grid.len() - 1)
        .filter(|&i| j[i] > j[i - 1] && j[i] > j[i + 1])
        .map(|i| grid[i])
        .collect();
    let spacing = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
    println!(
        "\nmean peak spacing on (-2, -0.5): {spacing:.5}  (2π/d = {:.5})",
        std::f64::consts::TAU / 20.0
    );

    println!(
        "F'(0) = {:.8}  (large-d estimate {:.8})",
        bath.eval_fprime0()?,
        bath.fprime0_estimate()
    );

    println!("\n{:>8} {:>14} {:>14}", "tau", "Re C", "Im C");
    for tau in [0.1, 1.0, 5.0, 20.0, 50.0] {
        let c = bath.bath_correlation(tau)?;
        println!("{tau:8.1} {:14.6e} {:14.6e}", c.re, c.im);
    }
    Ok(())
}
