mod common;

use std::f64::consts::FRAC_PI_2;

use common::{brute_min_separation, FIG};
use dqd_steady::config::{Mode, SweepConfig};
use dqd_steady::model::{
    bare_frame, check_distinct, coupling_table, dispersive_coeffs, observable_table, FreqLabel,
    COUPLING_LABELS, DEGENERACY_TOLERANCE,
};
use dqd_steady::poles::{
    assemble_system, dynamical_poles, solve_residues, steady_observable_complex, Dressing,
};
use dqd_steady::renorm::{solve_self_consistent, RenormOptions};
use dqd_steady::sweep::{no_drive_observable, run_sweep};
use dqd_steady::{BathSpectrum, DqdParams, DressedFrame, Error};
use num_complex::Complex64;
use rand::Rng;

fn fig_bath() -> BathSpectrum {
    BathSpectrum::new(FIG.coupling, FIG.separation, FIG.cutoff).unwrap()
}

/// Each block row, minus its `iν′` diagonal, maps any input to a traceless
/// output.
#[test]
fn block_rows_annihilate_trace() {
    let bath = fig_bath();
    let mut rng = common::rng(11);
    for _ in 0..40 {
        let bias = rng.random_range(0.75..1.15);
        let bare =
            bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, rng.random_range(0.05..0.3)).unwrap());
        let frame = DressedFrame::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..-0.02));
        if brute_min_separation(frame.rabi_prime) < 1e-3 {
            continue;
        }
        let table = coupling_table(bare.theta, &frame).unwrap();
        let disp = dispersive_coeffs(bare.theta, &frame, &bare, &bath).unwrap();
        for dressing in [Dressing::Cancelled, Dressing::FromFrames] {
            let sys = assemble_system(&table, &disp, &frame, &bath, &dynamical_poles(), dressing)
                .unwrap();
            let n = sys.poles.len();
            let x = nalgebra_vector(&mut rng, 4 * n);
            let y = &sys.matrix * &x;
            let scale = sys.matrix.norm() * x.norm();
            for (b, p) in sys.poles.iter().enumerate() {
                let nu = Complex64::new(0.0, p.value(frame.rabi_prime));
                let tr_in = x[4 * b] + x[4 * b + 3];
                let tr_out = y[4 * b] + y[4 * b + 3] - nu * tr_in;
                assert!(tr_out.norm() < 1e-12 * scale, "block {p}: {tr_out}");
            }
        }
    }
}

fn nalgebra_vector(rng: &mut impl Rng, n: usize) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Exhaustive search over `W × W × V × V` for coincidences
/// `ω′ − ω = ν − ν′`, compared against exact label arithmetic.
#[test]
fn pair_enumeration_matches_label_arithmetic() {
    let v = [0i32, 1, -1];
    let w = common::coupling_multiples();
    for rabi in [0.137, 0.2113, 0.377, 0.61] {
        for a in &w {
            for b in &w {
                let d_num = (b.0 - a.0) as f64 + (b.1 - a.1) as f64 * rabi;
                for nu in v {
                    for nup in v {
                        let numeric = (d_num - (nu - nup) as f64 * rabi).abs() < 1e-9;
                        let exact = b.0 == a.0 && b.1 - a.1 == nu - nup;
                        assert_eq!(numeric, exact, "{a:?} {b:?} {nu} {nup} at {rabi}");
                        if *a == (1, -1) && *b == (1, 1) && numeric {
                            assert_eq!(nu - nup, 2);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn degeneracy_guard_matches_brute_force() {
    for w in [
        0.3,
        0.5 - 2e-6,
        0.5 - 5e-7,
        0.5,
        0.5 + 5e-7,
        0.7,
        1.0 - 5e-7,
        1.0 + 2e-6,
        1.4,
    ] {
        let brute = brute_min_separation(w) < DEGENERACY_TOLERANCE;
        let guarded = matches!(
            check_distinct(&COUPLING_LABELS, w, DEGENERACY_TOLERANCE),
            Err(Error::DegenerateFrequencies { .. })
        );
        assert_eq!(brute, guarded, "Ω′ = {w}");
    }
}

/// Residues at `±Ω′` shrink as the Rabi frequency grows, bath fixed.
#[test]
fn rabi_residue_shrinks_along_ladder() {
    let bath = fig_bath();
    let opts = RenormOptions::default();
    let bias = DqdParams::resonant_bias(0.3);
    let mut sizes = Vec::new();
    for drive in [0.1, 0.15, 0.2, 0.25, 0.3] {
        let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, drive).unwrap());
        let frame = solve_self_consistent(&bare, bare.theta, &bath, &opts, None)
            .unwrap()
            .frame;
        let table = coupling_table(bare.theta, &frame).unwrap();
        let disp = dispersive_coeffs(bare.theta, &frame, &bare, &bath).unwrap();
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &dynamical_poles(),
            Dressing::Cancelled,
        )
        .unwrap();
        let r = solve_residues(&sys).unwrap();
        let rho = r.get(FreqLabel::new(0, 1)).unwrap();
        sizes.push((frame.rabi_prime, rho.norm()));
    }
    assert!(sizes.windows(2).all(|s| s[1].0 > s[0].0), "{sizes:?}");
    assert!(sizes.windows(2).all(|s| s[1].1 < s[0].1), "{sizes:?}");
}

#[test]
fn observable_sum_is_real() {
    let bath = fig_bath();
    let opts = RenormOptions::default();
    for bias in [0.8, 0.94, 0.96, 1.1] {
        let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
        let frame = solve_self_consistent(&bare, bare.theta, &bath, &opts, None)
            .unwrap()
            .frame;
        let table = coupling_table(bare.theta, &frame).unwrap();
        let disp = dispersive_coeffs(bare.theta, &frame, &bare, &bath).unwrap();
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &dynamical_poles(),
            Dressing::Cancelled,
        )
        .unwrap();
        let r = solve_residues(&sys).unwrap();
        let m = steady_observable_complex(&r, &observable_table(bare.theta, &frame));
        assert!(m.im.abs() < 1e-10);
    }
}

#[test]
fn observables_stay_in_unit_interval_over_sweep() {
    let cfg = SweepConfig {
        steps: 120,
        mode: Mode::All,
        ..Default::default()
    };
    for row in run_sweep(&cfg).unwrap() {
        assert!(row.valid, "{}: {}", row.bias, row.note);
        for m in Mode::SINGLE {
            let v = row.observable(m).unwrap();
            assert!(
                (-1e-6..=1.0 + 1e-6).contains(&v),
                "{m} at {}: {v}",
                row.bias
            );
        }
    }
}

#[test]
fn undriven_population_at_resonance() {
    let bare =
        bare_frame(&DqdParams::new(DqdParams::resonant_bias(0.3), 0.3, FRAC_PI_2, 0.2).unwrap());
    let m = no_drive_observable(bare.theta);
    assert!((m - 0.0231).abs() < 1e-4, "{m}");
}
