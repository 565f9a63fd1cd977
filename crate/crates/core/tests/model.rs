mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::FIG;
use dqd_steady::model::{
    bare_frame, coupling_table, dispersive_coeffs, identity, observable_table, FreqLabel,
};
use dqd_steady::renorm::{
    approx_renorm_with_slope, renormalization_map, solve_self_consistent, RenormOptions,
};
use dqd_steady::{BathSpectrum, DqdParams, DressedFrame};
use proptest::prelude::*;

fn fig_bath() -> BathSpectrum {
    BathSpectrum::new(FIG.coupling, FIG.separation, FIG.cutoff).unwrap()
}

fn frame_strategy() -> impl Strategy<Value = (f64, DressedFrame)> {
    (0.05..PI - 0.05, -0.4..0.4f64, 0.02..0.45f64, any::<bool>()).prop_map(|(t, eta, om, neg)| {
        let om = if neg { -om } else { om };
        (t, DressedFrame::new(eta, om))
    })
}

fn generic((_, f): &(f64, DressedFrame)) -> bool {
    let w = f.rabi_prime;
    (w - 0.5).abs() > 1e-3 && (w - 1.0).abs() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coupling_entries_pair_with_adjoints(tf in frame_strategy().prop_filter("generic", generic)) {
        let (theta, frame) = tf;
        for table in [coupling_table(theta, &frame).unwrap(), observable_table(theta, &frame)] {
            for e in &table.entries {
                let partner = table.get(-e.label).expect("partner present");
                prop_assert_eq!(partner.matrix, e.matrix.adjoint());
            }
        }
    }

    /// At t = 0 every phase is one, so the table sums to the localized
    /// `σ_z` rotated into the dressed basis: Hermitian, traceless, unitary.
    #[test]
    fn coupling_table_is_complete_at_origin(tf in frame_strategy().prop_filter("generic", generic)) {
        let (theta, frame) = tf;
        let z = coupling_table(theta, &frame).unwrap().at_time(0.0);
        prop_assert!((z - z.adjoint()).norm() < 1e-12);
        prop_assert!(z.trace().norm() < 1e-12);
        prop_assert!((z * z - identity()).norm() < 1e-12);
        prop_assert!((z[(0, 0)].re - (theta + frame.angle).cos()).abs() < 1e-12);
    }

    #[test]
    fn population_table_is_bounded(tf in frame_strategy().prop_filter("generic", generic), t in 0.0..200.0f64) {
        let (theta, frame) = tf;
        let m = observable_table(theta, &frame).at_time(t);
        prop_assert!((m * m - m).norm() < 1e-12, "projector");
        prop_assert!((m.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bare_angle_stays_in_open_interval(bias in -3.0..3.0f64, delta in 0.01..1.0f64) {
        let bare = bare_frame(&DqdParams::new(bias, delta, FRAC_PI_2, 0.1).unwrap());
        prop_assert!(bare.theta > 0.0 && bare.theta < PI);
        prop_assert!((bare.splitting - bias.hypot(delta)).abs() < 1e-14);
    }
}

#[test]
fn resonance_geometry() {
    let bias = (1.0f64 - 0.09).sqrt();
    let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
    assert!((bare.splitting - 1.0).abs() < 1e-15);
    assert!(bare.detuning.abs() < 1e-15);
    assert!((bare.theta - 0.3_f64.atan2(bias)).abs() < 1e-15);
    assert!((bare.theta - 0.30469).abs() < 1e-5);
    let undriven = bare_frame(&DqdParams::new(bias, 0.3, 0.7, 0.0).unwrap());
    assert_eq!(undriven.rabi, 0.0);
}

#[test]
fn bare_frame_is_continuous_across_resonance() {
    let mut last: Option<(f64, f64, f64)> = None;
    for i in 0..=2000 {
        let bias = 0.7 + 0.5 * i as f64 / 2000.0;
        let b = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
        if let Some((eta, om, th)) = last {
            let step: f64 = 0.5 / 2000.0;
            assert!((b.detuning - eta).abs() < 2.0 * step);
            assert!((b.rabi - om).abs() < 2.0 * step);
            assert!((b.theta - th).abs() < 2.0 * step);
        }
        last = Some((b.detuning, b.rabi, b.theta));
    }
}

#[test]
fn population_at_zero_detuning_is_half() {
    let frame = DressedFrame::new(0.0, -0.17);
    let m = observable_table(0.3, &frame);
    let m0 = m.get(FreqLabel::ZERO).unwrap().matrix;
    assert_eq!(m0, identity() * num_complex::Complex64::new(0.5, 0.0));
}

#[test]
fn dispersive_shifts_are_linear_in_coupling() {
    let bare = bare_frame(&DqdParams::new(0.93, 0.3, FRAC_PI_2, 0.2).unwrap());
    let frame = DressedFrame::new(-0.05, -0.11);
    let bath = fig_bath();
    let one = dispersive_coeffs(bare.theta, &frame, &bare, &bath).unwrap();
    let two =
        dispersive_coeffs(bare.theta, &frame, &bare, &bath.with_coupling(0.4).unwrap()).unwrap();
    assert!((two.a0 - 2.0 * one.a0).abs() < 1e-12);
    assert!((two.a_rabi - 2.0 * one.a_rabi).abs() < 1e-12);
    let off =
        dispersive_coeffs(bare.theta, &frame, &bare, &bath.with_coupling(0.0).unwrap()).unwrap();
    assert_eq!((off.a0, off.a_rabi), (0.0, 0.0));
}

#[test]
fn closed_forms_with_synthetic_slope() {
    let bare = bare_frame(&DqdParams::new(0.9, 0.3, FRAC_PI_2, 0.2).unwrap());
    let (eta, om) = approx_renorm_with_slope(&bare, -0.5).unwrap();
    assert!((eta - 2.0 * bare.detuning).abs() < 1e-15);
    assert!((om - bare.rabi / 1.5).abs() < 1e-15);
    assert_eq!(
        approx_renorm_with_slope(&bare, 0.0).unwrap(),
        (bare.detuning, bare.rabi)
    );
}

#[test]
fn solution_is_a_fixed_point_with_matching_sign() {
    let bath = fig_bath();
    let opts = RenormOptions::default();
    for bias in [0.75, 0.9, 0.95394, 1.0, 1.15] {
        let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
        let s = solve_self_consistent(&bare, bare.theta, &bath, &opts, None).unwrap();
        let x = [s.frame.detuning, s.frame.rabi];
        let g = renormalization_map(&bare, bare.theta, x, &bath).unwrap();
        assert!((g[0] - x[0]).hypot(g[1] - x[1]) <= opts.tolerance);
        assert!(s.frame.rabi.signum() == bare.rabi.signum());
        assert!(s.consistency_gap < 1e-9);
    }
}

#[test]
fn decoupled_bath_leaves_frame_bare() {
    let bath = fig_bath().with_coupling(0.0).unwrap();
    let bare = bare_frame(&DqdParams::new(0.91, 0.3, FRAC_PI_2, 0.2).unwrap());
    let s =
        solve_self_consistent(&bare, bare.theta, &bath, &RenormOptions::default(), None).unwrap();
    assert_eq!((s.frame.detuning, s.frame.rabi), (bare.detuning, bare.rabi));
}

/// The renormalized detuning changes faster than the bare one at resonance.
#[test]
fn detuning_slope_exceeds_one_at_resonance() {
    let bath = fig_bath();
    let opts = RenormOptions::default();
    let r = DqdParams::resonant_bias(0.3);
    let solve = |bias: f64| {
        let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
        let s = solve_self_consistent(&bare, bare.theta, &bath, &opts, None).unwrap();
        (bare.detuning, s.frame.detuning)
    };
    let (lo_b, lo) = solve(r - 1e-3);
    let (hi_b, hi) = solve(r + 1e-3);
    let slope = (hi - lo) / (hi_b - lo_b);
    assert!(slope > 1.0, "slope {slope}");
}
