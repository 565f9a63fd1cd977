//! Residue equations of the pole ansatz `ρ̄_s = Σ_ν ρ_ν / (s − iν)`.
//!
//! Matching residues at `s = iν′` on both sides of the Laplace-transformed
//! Born master equation gives, for every `ν′` in the pole set,
//!
//! ```text
//! iν′ ρ_ν′ = −i Σ_ν [h_{ν′−ν}, ρ_ν]
//!          + Σ_{ν, ω; ω′ = ω+ν−ν′} (Ĵ₊(ω−ν′) + Ĵ₋(ω+ν)) P_ω ρ_ν P_ω′†
//!                                 − Ĵ₊(ω−ν′) ρ_ν P_ω′† P_ω − Ĵ₋(ω+ν) P_ω′† P_ω ρ_ν
//! ```
//!
//! Stacking the vectorized residues turns this into a square homogeneous
//! system. Its one-dimensional kernel is fixed by `Tr ρ₀ = 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    check_distinct, identity, CouplingTable, DispersiveCoeffs, DressedFrame, FreqLabel, Op,
    COUPLING_LABELS, DEGENERACY_TOLERANCE,
};
use crate::spectral::{Branch, Spectrum};

/// Conditioning above which a solve is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Relative singular-value threshold for counting kernel directions.
pub const KERNEL_THRESHOLD: f64 = 1e-10;

/// `V = {0, ±Ω′}`.
pub fn dynamical_poles() -> Vec<FreqLabel> {
    vec![FreqLabel::ZERO, FreqLabel::new(0, 1), FreqLabel::new(0, -1)]
}

/// `V = {0}`.
pub fn stationary_pole() -> Vec<FreqLabel> {
    vec![FreqLabel::ZERO]
}

/// Which Hamiltonian components enter the `−i[h, ρ]` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Dressing {
    /// `h_ν := f_ν`, cancelling the dispersive shifts.
    #[default]
    Cancelled,
    /// Components of `H_S − H_D` computed from the bare and dressed frames.
    FromFrames,
}

#[derive(Clone, Debug)]
pub struct ResidueSystem {
    pub poles: Vec<FreqLabel>,
    pub rabi_prime: f64,
    /// Square operator acting on stacked row-major vectorized residues.
    pub matrix: DMatrix<Complex64>,
    pub singular_values: Vec<f64>,
    pub kernel_dimension: usize,
    /// Largest magnitude of the trace functional applied to each block row
    /// (excluding the `iν′` term). Zero up to rounding.
    pub trace_defect: f64,
}

impl ResidueSystem {
    /// Ratio of largest to smallest singular value after fixing the trace.
    pub fn conditioning(&self) -> f64 {
        let aug = augmented(&self.matrix, self.poles.len());
        let sv = aug.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// 4×4 superoperator of `ρ ↦ A ρ B` in row-major vectorization.
fn sandwich(a: &Op, b: &Op) -> [[Complex64; 4]; 4] {
    let mut s = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s[2 * i + j][2 * k + l] = a[(i, k)] * b[(l, j)];
                }
            }
        }
    }
    s
}

fn add_scaled(block: &mut [[Complex64; 4]; 4], s: &[[Complex64; 4]; 4], c: Complex64) {
    for i in 0..4 {
        for j in 0..4 {
            block[i][j] += c * s[i][j];
        }
    }
}

/// Dressing-frame component at `label` under the chosen convention.
fn hamiltonian_component(disp: &DispersiveCoeffs, label: FreqLabel, dressing: Dressing) -> Op {
    let (zero, plus, minus) = match dressing {
        Dressing::Cancelled => (disp.f0, disp.f_plus, disp.f_minus),
        Dressing::FromFrames => (disp.h0, disp.h_plus, disp.h_minus),
    };
    match (label.drive, label.rabi) {
        (0, 0) => zero,
        (0, 1) => plus,
        (0, -1) => minus,
        _ => Op::zeros(),
    }
}

/// The right-hand side of the residue equation as a map from the block `ν`
/// to the block `ν′`, without the `iν′ ρ_ν′` term.
fn rhs_block(
    table: &CouplingTable,
    disp: &DispersiveCoeffs,
    bath: &dyn Spectrum,
    rabi_prime: f64,
    target: FreqLabel,
    source: FreqLabel,
    dressing: Dressing,
) -> Result<[[Complex64; 4]; 4]> {
    let i = Complex64::new(0.0, 1.0);
    let one = identity();
    let mut block = [[Complex64::new(0.0, 0.0); 4]; 4];

    let h = hamiltonian_component(disp, target - source, dressing);
    // −i[h, ρ] = −i h ρ + i ρ h
    add_scaled(&mut block, &sandwich(&h, &one), -i);
    add_scaled(&mut block, &sandwich(&one, &h), i);

    for p in &table.entries {
        let partner = p.label + source - target;
        let q = match table.get(partner) {
            Some(q) => q.matrix.adjoint(),
            None => continue,
        };
        let jp = bath.jhat(Branch::Plus, (p.label - target).value(rabi_prime))?;
        let jm = bath.jhat(Branch::Minus, (p.label + source).value(rabi_prime))?;
        let x = q * p.matrix;
        add_scaled(&mut block, &sandwich(&p.matrix, &q), jp + jm);
        add_scaled(&mut block, &sandwich(&one, &x), -jp);
        add_scaled(&mut block, &sandwich(&x, &one), -jm);
    }
    Ok(block)
}

/// Assembles the residue system for the pole set `poles`.
pub fn assemble_system(
    table: &CouplingTable,
    disp: &DispersiveCoeffs,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
    poles: &[FreqLabel],
    dressing: Dressing,
) -> Result<ResidueSystem> {
    let w = frame.rabi_prime;
    check_distinct(&COUPLING_LABELS, w, DEGENERACY_TOLERANCE)?;
    let n = poles.len();
    let mut matrix = DMatrix::<Complex64>::zeros(4 * n, 4 * n);
    let mut trace_defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (bi, target) in poles.iter().enumerate() {
        for (bj, source) in poles.iter().enumerate() {
            let block = rhs_block(table, disp, bath, w, *target, *source, dressing)?;
            for col in 0..4 {
                let t = block[0][col] + block[3][col];
                trace_defect = trace_defect.max(t.norm());
                for row in 0..4 {
                    scale = scale.max(block[row][col].norm());
                    matrix[(4 * bi + row, 4 * bj + col)] = -block[row][col];
                }
            }
        }
        let nu = Complex64::new(0.0, target.value(w));
        for k in 0..4 {
            matrix[(4 * bi + k, 4 * bi + k)] += nu;
        }
    }
    let svd = matrix.clone().svd(false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let kernel_dimension = singular_values
        .iter()
        .filter(|s| **s <= KERNEL_THRESHOLD * smax)
        .count();
    Ok(ResidueSystem {
        poles: poles.to_vec(),
        rabi_prime: w,
        matrix,
        singular_values,
        kernel_dimension,
        trace_defect: if scale > 0.0 {
            trace_defect / scale
        } else {
            0.0
        },
    })
}

/// Operator with a trace-of-`ρ₀` row appended.
fn augmented(matrix: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
    let rows = matrix.nrows();
    let mut aug = DMatrix::<Complex64>::zeros(rows + 1, 4 * n);
    aug.view_mut((0, 0), (rows, 4 * n)).copy_from(matrix);
    aug[(rows, 0)] = Complex64::new(1.0, 0.0);
    aug[(rows, 3)] = Complex64::new(1.0, 0.0);
    aug
}

/// Pole residues of a steady state, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct ResidueSet {
    pub poles: Vec<FreqLabel>,
    pub frequencies: Vec<f64>,
    pub residues: Vec<Op>,
    pub relative_residual: f64,
    pub conditioning: f64,
    pub ill_conditioned: bool,
    pub kernel_dimension: usize,
}

impl ResidueSet {
    pub fn get(&self, label: FreqLabel) -> Option<&Op> {
        self.poles
            .iter()
            .position(|p| *p == label)
            .map(|i| &self.residues[i])
    }

    /// `ρ₀`, the time-averaged steady state.
    pub fn stationary(&self) -> &Op {
        self.get(FreqLabel::ZERO)
            .expect("pole set always contains 0")
    }

    /// Largest `‖ρ_{−ν} − ρ_ν†‖` over the pole set (includes `ρ₀ − ρ₀†`).
    pub fn hermiticity_defect(&self) -> f64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .filter_map(|(p, r)| self.get(-*p).map(|m| (m - r.adjoint()).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest `|Tr ρ_ν|` over the dynamical poles.
    pub fn dynamical_trace(&self) -> f64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .filter(|(p, _)| **p != FreqLabel::ZERO)
            .map(|(_, r)| r.trace().norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part of `ρ₀`, ascending.
    pub fn stationary_eigenvalues(&self) -> [f64; 2] {
        let r = self.stationary();
        let a = r[(0, 0)].re;
        let d = r[(1, 1)].re;
        let b = 0.5 * (r[(0, 1)] + r[(1, 0)].conj());
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        [mean - rad, mean + rad]
    }
}

fn solve_augmented(
    matrix: &DMatrix<Complex64>,
    poles: &[FreqLabel],
    rabi_prime: f64,
    kernel_dimension: usize,
) -> Result<ResidueSet> {
    if kernel_dimension != 1 {
        return Err(Error::SingularSystem { kernel_dimension });
    }
    let n = poles.len();
    // The kernel vector of the bare operator is far more accurate than the
    // least-squares solution of the augmented one; the augmented spectrum is
    // kept only as the conditioning estimate.
    let sv = augmented(matrix, n).singular_values();
    let conditioning = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    let svd = matrix.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right vectors");
    let null = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::SingularSystem { kernel_dimension })?;
    let x: DVector<Complex64> = v_t.row(null).adjoint();
    let residual = (matrix * &x).norm();
    let relative_residual = residual / (matrix.norm() * x.norm()).max(f64::MIN_POSITIVE);
    let mut residues: Vec<Op> = (0..n)
        .map(|k| Op::new(x[4 * k], x[4 * k + 1], x[4 * k + 2], x[4 * k + 3]))
        .collect();
    let zero = poles.iter().position(|p| *p == FreqLabel::ZERO).unwrap();
    let tr = residues[zero].trace();
    if tr.norm() == 0.0 {
        return Err(Error::SingularSystem { kernel_dimension });
    }
    for r in residues.iter_mut() {
        *r /= tr;
    }
    // Division leaves the trace an ulp or two off. The larger diagonal entry
    // lies in [1/2, 2], so `1 − big` is exact and the pair sums to one.
    let rho = &mut residues[zero];
    let (big, small) = if rho[(0, 0)].re >= rho[(1, 1)].re {
        (0, 1)
    } else {
        (1, 0)
    };
    rho[(big, big)].re = 1.0 - rho[(small, small)].re;
    rho[(small, small)].re = 1.0 - rho[(big, big)].re;
    rho[(big, big)].im = 0.0;
    rho[(small, small)].im = 0.0;
    Ok(ResidueSet {
        poles: poles.to_vec(),
        frequencies: poles.iter().map(|p| p.value(rabi_prime)).collect(),
        residues,
        relative_residual,
        conditioning,
        ill_conditioned: conditioning > ILL_CONDITIONED,
        kernel_dimension,
    })
}

/// Solves the assembled system for residues with `Tr ρ₀ = 1`.
pub fn solve_residues(system: &ResidueSystem) -> Result<ResidueSet> {
    if !system.poles.contains(&FreqLabel::ZERO) {
        return Err(Error::SingularSystem {
            kernel_dimension: 0,
        });
    }
    solve_augmented(
        &system.matrix,
        &system.poles,
        system.rabi_prime,
        system.kernel_dimension,
    )
}

/// Markovian steady state: kernel of `Σ_ω J(ω) D[P_ω]` with `Tr ρ₀ = 1`.
pub fn markov_steady(table: &CouplingTable, bath: &dyn Spectrum) -> Result<ResidueSet> {
    let one = identity();
    let mut block = [[Complex64::new(0.0, 0.0); 4]; 4];
    for p in &table.entries {
        let j = bath.density(p.frequency);
        if j == 0.0 {
            continue;
        }
        let a = p.matrix;
        let ad = a.adjoint();
        let ada = ad * a;
        let jc = Complex64::new(j, 0.0);
        add_scaled(&mut block, &sandwich(&a, &ad), jc);
        add_scaled(&mut block, &sandwich(&ada, &one), -0.5 * jc);
        add_scaled(&mut block, &sandwich(&one, &ada), -0.5 * jc);
    }
    let matrix = DMatrix::from_fn(4, 4, |r, c| block[r][c]);
    let sv = matrix.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let kernel_dimension = if smax == 0.0 {
        4
    } else {
        sv.iter().filter(|s| **s <= KERNEL_THRESHOLD * smax).count()
    };
    let rabi_prime = table
        .get(FreqLabel::new(0, 1))
        .map(|e| e.frequency)
        .unwrap_or(0.0);
    solve_augmented(&matrix, &[FreqLabel::ZERO], rabi_prime, kernel_dimension)
}

/// `Σ_ν Tr{M_ν† ρ_ν}` before taking the real part.
pub fn steady_observable_complex(residues: &ResidueSet, obs: &CouplingTable) -> Complex64 {
    residues
        .poles
        .iter()
        .zip(&residues.residues)
        .map(|(p, r)| (obs.matrix(*p).adjoint() * r).trace())
        .sum()
}

/// Time-averaged steady-state expectation `⟨M⟩₀`.
pub fn steady_observable(residues: &ResidueSet, obs: &CouplingTable) -> f64 {
    steady_observable_complex(residues, obs).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        bare_frame, coupling_table, dispersive_coeffs, observable_table, sigma_minus, sigma_plus,
        sigma_z, DqdParams,
    };
    use crate::spectral::BathSpectrum;
    use std::f64::consts::FRAC_PI_2;

    struct Synthetic<F: Fn(f64) -> f64 + Send + Sync>(F);

    impl<F: Fn(f64) -> f64 + Send + Sync> Spectrum for Synthetic<F> {
        fn density(&self, w: f64) -> f64 {
            (self.0)(w)
        }
        fn hilbert(&self, _: f64) -> Result<f64> {
            Ok(0.0)
        }
        fn hilbert_slope_at_zero(&self) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn setup(
        bias: f64,
        coupling: f64,
    ) -> (BathSpectrum, CouplingTable, DispersiveCoeffs, DressedFrame) {
        let bath = BathSpectrum::new(coupling, 20.0, 2.0).unwrap();
        let bare = bare_frame(&DqdParams::new(bias, 0.3, FRAC_PI_2, 0.2).unwrap());
        let frame = DressedFrame::from_bare(&bare);
        let table = coupling_table(bare.theta, &frame).unwrap();
        let disp = dispersive_coeffs(bare.theta, &frame, &bare, &bath).unwrap();
        (bath, table, disp, frame)
    }

    #[test]
    fn sandwich_matches_matrix_product() {
        let a = sigma_plus() + sigma_z() * Complex64::new(0.3, 0.1);
        let b = sigma_minus() + identity() * Complex64::new(0.0, 0.7);
        let rho = Op::new(
            Complex64::new(0.6, 0.0),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1, -0.2),
            Complex64::new(0.4, 0.0),
        );
        let s = sandwich(&a, &b);
        let v = [rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]];
        let direct = a * rho * b;
        for i in 0..2 {
            for j in 0..2 {
                let got: Complex64 = (0..4).map(|k| s[2 * i + j][k] * v[k]).sum();
                assert!((got - direct[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn trace_functional_annihilates_every_block() {
        let (bath, table, disp, frame) = setup(0.93, 0.2);
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &dynamical_poles(),
            Dressing::Cancelled,
        )
        .unwrap();
        assert!(sys.trace_defect < 1e-12, "{}", sys.trace_defect);
        assert_eq!(sys.kernel_dimension, 1);
    }

    #[test]
    fn dynamical_solve_invariants() {
        let (bath, table, disp, frame) = setup(0.93, 0.2);
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &dynamical_poles(),
            Dressing::Cancelled,
        )
        .unwrap();
        let res = solve_residues(&sys).unwrap();
        assert_eq!(res.stationary().trace(), Complex64::new(1.0, 0.0));
        assert!(res.dynamical_trace() < 1e-10);
        assert!(res.hermiticity_defect() < 1e-8);
        assert!(res.relative_residual < 1e-8);
        let m = steady_observable_complex(&res, &observable_table(0.3, &frame));
        assert!(m.im.abs() < 1e-10);
    }

    #[test]
    fn decoupled_resonant_system_is_degenerate() {
        let (bath, table, disp, frame) = setup(DqdParams::resonant_bias(0.3), 0.0);
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &dynamical_poles(),
            Dressing::Cancelled,
        )
        .unwrap();
        assert!(sys.kernel_dimension >= 2);
        assert!(matches!(
            solve_residues(&sys),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn markov_resonance_is_saturated() {
        let (bath, table, _, frame) = setup(DqdParams::resonant_bias(0.3), 0.2);
        let res = markov_steady(&table, &bath).unwrap();
        let m = steady_observable(&res, &observable_table(0.30469, &frame));
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_decay_channel_gives_pure_state() {
        let (_, table, _, _) = setup(0.93, 0.2);
        let w = table.get(FreqLabel::new(0, 1)).unwrap().frequency;
        let bath = Synthetic(move |x: f64| if (x + w).abs() < 1e-12 { 0.1 } else { 0.0 });
        let res = markov_steady(&table, &bath).unwrap();
        let rho = res.stationary();
        let purity = (rho * rho).trace().re;
        assert!((purity - 1.0).abs() < 1e-12);
        // Decay ends in the lower dressed state |+⟩.
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pumping_gives_maximally_mixed_state() {
        let (_, table, _, _) = setup(0.93, 0.2);
        let bath = Synthetic(|x: f64| if x != 0.0 { 0.05 * (1.0 + x * x) } else { 0.0 });
        let res = markov_steady(&table, &bath).unwrap();
        assert!((res.stationary() - identity() * Complex64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn markov_equals_single_pole_residue_system() {
        let (bath, table, disp, frame) = setup(0.9, 0.2);
        let a = markov_steady(&table, &bath).unwrap();
        let sys = assemble_system(
            &table,
            &disp,
            &frame,
            &bath,
            &stationary_pole(),
            Dressing::Cancelled,
        )
        .unwrap();
        let b = solve_residues(&sys).unwrap();
        assert!((a.stationary() - b.stationary()).norm() < 1e-10);
        let ev = a.stationary_eigenvalues();
        assert!(ev[0] >= -1e-10);
    }
}
