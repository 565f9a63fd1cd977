//! Self-consistent renormalization of the detuning and Rabi frequency.
//!
//! The dressing frame `(η, Ω)` is fixed by requiring that the dressing
//! Hamiltonian components equal the bath-induced dispersive shifts. Written
//! as a map on `(η, Ω)` this reads
//!
//! ```text
//! (η, Ω) = (η̃, Ω̃) + R(φ) · (a₀, a_Ω′)
//! ```
//!
//! with `R(φ)` the rotation by the dressed angle `φ = atan2(Ω, η)` and the
//! amplitudes `a₀, a_Ω′` evaluated in the current frame.

use crate::error::{Error, Result};
use crate::model::{dispersive_amplitudes, dispersive_coeffs, BareFrame, DressedFrame};
use crate::spectral::Spectrum;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormOptions {
    /// Euclidean residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Mixing factor of the damped fixed-point step.
    pub damping: f64,
    /// Finite-difference step for the quasi-Newton Jacobian.
    pub jacobian_step: f64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions {
            tolerance: 1e-10,
            max_iterations: 200,
            damping: 0.5,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormSolution {
    pub frame: DressedFrame,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Largest entrywise `|h_ν − f_ν|` at the solution.
    pub consistency_gap: f64,
}

/// Right side of the self-consistency map, `(η̃, Ω̃) + R(φ)(a₀, a_Ω′)`.
pub fn renormalization_map(
    bare: &BareFrame,
    theta: f64,
    x: [f64; 2],
    bath: &dyn Spectrum,
) -> Result<[f64; 2]> {
    let frame = DressedFrame::new(x[0], x[1]);
    let (a0, a_rabi) = dispersive_amplitudes(theta, &frame, bath)?;
    let (c, s) = frame.angle_cos_sin();
    Ok([
        bare.detuning + c * a0 - s * a_rabi,
        bare.rabi + s * a0 + c * a_rabi,
    ])
}

/// `(η, Ω)` minus the map; zero at a self-consistent frame.
pub fn residual(
    bare: &BareFrame,
    theta: f64,
    x: [f64; 2],
    bath: &dyn Spectrum,
) -> Result<[f64; 2]> {
    let g = renormalization_map(bare, theta, x, bath)?;
    Ok([x[0] - g[0], x[1] - g[1]])
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Near-resonance closed forms `η̃/(1 + F'(0))` and `Ω̃/(1 − F'(0))`.
pub fn approx_renorm(bare: &BareFrame, bath: &dyn Spectrum) -> Result<(f64, f64)> {
    let fp = bath.hilbert_slope_at_zero()?;
    approx_renorm_with_slope(bare, fp)
}

pub fn approx_renorm_with_slope(bare: &BareFrame, slope: f64) -> Result<(f64, f64)> {
    let gap = (1.0 + slope).abs();
    if gap < 1e-6 {
        return Err(Error::PolaronDivergence { gap });
    }
    Ok((bare.detuning / (1.0 + slope), bare.rabi / (1.0 - slope)))
}

/// Solves the self-consistency condition from `seed` (defaults to
/// `(η̃, Ω_approx)`).
///
/// Damped fixed-point iteration runs while it contracts quickly; once the
/// residual ratio stalls above one half the solver switches to a 2×2
/// quasi-Newton step with a finite-difference Jacobian and backtracking.
pub fn solve_self_consistent(
    bare: &BareFrame,
    theta: f64,
    bath: &dyn Spectrum,
    opts: &RenormOptions,
    seed: Option<[f64; 2]>,
) -> Result<RenormSolution> {
    if bath.is_decoupled() {
        return Ok(RenormSolution {
            frame: DressedFrame::from_bare(bare),
            residual_norm: 0.0,
            iterations: 0,
            consistency_gap: 0.0,
        });
    }
    if bare.rabi == 0.0 {
        return Err(Error::UndrivenDegenerate);
    }
    let mut x = match seed {
        Some(s) => s,
        None => {
            let (_, omega) = approx_renorm(bare, bath)?;
            [bare.detuning, omega]
        }
    };

    let mut r = residual(bare, theta, x, bath)?;
    let mut rn = norm(r);
    let mut newton = false;
    let mut slow = 0;
    let mut iterations = 0;

    while rn > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: rn,
            });
        }
        iterations += 1;
        let (nx, nr) = if newton {
            newton_step(bare, theta, bath, opts, x, r)?
        } else {
            let nx = [x[0] - opts.damping * r[0], x[1] - opts.damping * r[1]];
            (nx, residual(bare, theta, nx, bath)?)
        };
        let nrn = norm(nr);
        if !newton {
            if nrn > 0.5 * rn {
                slow += 1;
            } else {
                slow = 0;
            }
            if slow >= 2 || !nrn.is_finite() {
                newton = true;
            }
        }
        if nrn.is_finite() && (newton || nrn < rn || slow < 2) {
            x = nx;
            r = nr;
            rn = nrn;
        }
    }

    if x[1] * bare.rabi < 0.0 {
        // Root on the branch with reversed drive phase.
        return Err(Error::NoConvergence {
            iterations,
            residual: rn,
        });
    }

    let frame = DressedFrame::new(x[0], x[1]);
    let gap = dispersive_coeffs(theta, &frame, bare, bath)?.consistency_gap();
    Ok(RenormSolution {
        frame,
        residual_norm: rn,
        iterations,
        consistency_gap: gap,
    })
}

fn newton_step(
    bare: &BareFrame,
    theta: f64,
    bath: &dyn Spectrum,
    opts: &RenormOptions,
    x: [f64; 2],
    r: [f64; 2],
) -> Result<([f64; 2], [f64; 2])> {
    let mut jac = [[0.0; 2]; 2];
    for k in 0..2 {
        let h = opts.jacobian_step * x[k].abs().max(1e-2);
        let mut xp = x;
        xp[k] += h;
        let rp = residual(bare, theta, xp, bath)?;
        jac[0][k] = (rp[0] - r[0]) / h;
        jac[1][k] = (rp[1] - r[1]) / h;
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let step = if det.abs() > 1e-14 {
        [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ]
    } else {
        r
    };
    let rn = norm(r);
    let mut lambda = 1.0;
    let mut best = None;
    for _ in 0..12 {
        let nx = [x[0] - lambda * step[0], x[1] - lambda * step[1]];
        let nr = residual(bare, theta, nx, bath)?;
        if norm(nr) < rn {
            return Ok((nx, nr));
        }
        if best.is_none() {
            best = Some((nx, nr));
        }
        lambda *= 0.5;
    }
    Ok(best.unwrap())
}

/// Outcome of a solve that may have tried several seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SeededSolution {
    pub solution: RenormSolution,
    /// Other roots found from fallback seeds that differ by more than 1e−6.
    pub alternates: Vec<DressedFrame>,
}

/// Tries `seeds` in order. The first success is returned directly; if the
/// first seed fails, every remaining seed is tried and the root closest to
/// `previous` is kept.
pub fn solve_with_fallback(
    bare: &BareFrame,
    theta: f64,
    bath: &dyn Spectrum,
    opts: &RenormOptions,
    seeds: &[[f64; 2]],
    previous: Option<&DressedFrame>,
) -> Result<SeededSolution> {
    let mut last_err = None;
    let mut found: Vec<RenormSolution> = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        match solve_self_consistent(bare, theta, bath, opts, Some(*s)) {
            Ok(sol) if i == 0 => {
                return Ok(SeededSolution {
                    solution: sol,
                    alternates: Vec::new(),
                })
            }
            Ok(sol) => found.push(sol),
            Err(e @ (Error::NoConvergence { .. } | Error::QuadratureFailure { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    if found.is_empty() {
        return Err(last_err.unwrap_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        }));
    }
    let target = previous
        .map(|p| [p.detuning, p.rabi])
        .unwrap_or([bare.detuning, bare.rabi]);
    let dist = |s: &RenormSolution| (s.frame.detuning - target[0]).hypot(s.frame.rabi - target[1]);
    found.sort_by(|a, b| dist(a).total_cmp(&dist(b)));
    let best = found[0];
    let alternates = found[1..]
        .iter()
        .filter(|s| {
            (s.frame.detuning - best.frame.detuning).hypot(s.frame.rabi - best.frame.rabi) > 1e-6
        })
        .map(|s| s.frame)
        .collect();
    Ok(SeededSolution {
        solution: best,
        alternates,
    })
}
