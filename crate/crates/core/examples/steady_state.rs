//! Pole residues of the periodic steady state at one bias point, with the
//! solver's own consistency diagnostics.
//!
//!     cargo run --release --example steady_state

use dqd_steady::model::{bare_frame, observable_table};
use dqd_steady::poles::steady_observable;
use dqd_steady::poles::Dressing;
use dqd_steady::renorm::{solve_self_consistent, RenormOptions};
use dqd_steady::sweep::dynamical_observable;
use dqd_steady::{BathSpectrum, DqdParams};

fn main() -> dqd_steady::Result<()> {
    let bath = BathSpectrum::new(0.2, 20.0, 2.0)?;
    let params = DqdParams::new(0.94, 0.3, std::f64::consts::FRAC_PI_2, 0.2)?;
    let bare = bare_frame(&params);
    let frame =
        solve_self_consistent(&bare, bare.theta, &bath, &RenormOptions::default(), None)?.frame;

    let (m, residues) = dynamical_observable(&bare, &frame, &bath, Dressing::Cancelled)?;
    for (label, (w, rho)) in residues
        .poles
        .iter()
        .zip(residues.frequencies.iter().zip(&residues.residues))
    {
        println!("pole {label:>4}  ν = {w:+.6}");
        for i in 0..2 {
            println!(
                "    [{:+.6}{:+.6}i  {:+.6}{:+.6}i]",
                rho[(i, 0)].re,
                rho[(i, 0)].im,
                rho[(i, 1)].re,
                rho[(i, 1)].im
            );
        }
    }
    let [lo, hi] = residues.stationary_eigenvalues();
    println!("\nρ₀ eigenvalues       {lo:.8}, {hi:.8}");
    println!("Tr ρ_{{±Ω′}}           {:.2e}", residues.dynamical_trace());
    println!("Hermiticity defect   {:.2e}", residues.hermiticity_defect());
    println!("relative residual    {:.2e}", residues.relative_residual);
    println!("kernel dimension     {}", residues.kernel_dimension);
    println!("condition number     {:.3}", residues.conditioning);
    println!("right-dot weight     {m:.8}");

    // The same number from the observable table directly.
    let again = steady_observable(&residues, &observable_table(bare.theta, &frame));
    assert_eq!(m, again);
    Ok(())
}
