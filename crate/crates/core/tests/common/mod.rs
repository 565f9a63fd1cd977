//! Reference implementations used only by the tests. They are written
//! directly from the defining formulas and share no code with the library
//! beyond its public types.

#![allow(dead_code)]

use std::f64::consts::PI;

use dqd_steady::{Result, Spectrum};

/// Bath geometry `(P, d, ω_c)`.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub coupling: f64,
    pub separation: f64,
    pub cutoff: f64,
}

pub const FIG: Geometry = Geometry {
    coupling: 0.2,
    separation: 20.0,
    cutoff: 2.0,
};

fn interference(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 / 6.0 - x2 * x2 / 120.0
    } else {
        1.0 - x.sin() / x
    }
}

/// `J(ω)` straight from its definition.
pub fn density(g: Geometry, w: f64) -> f64 {
    if w >= 0.0 {
        return 0.0;
    }
    PI * g.coupling * (-w) * interference(g.separation * w) / (1.0 + (w / g.cutoff).powi(2))
}

/// `J` without the interference factor; used only past the dense window.
fn density_smooth(g: Geometry, w: f64) -> f64 {
    if w >= 0.0 {
        0.0
    } else {
        PI * g.coupling * (-w) / (1.0 + (w / g.cutoff).powi(2))
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Dense-grid principal value `F(x) = −π⁻¹ ∫₀^∞ [J(x+s) − J(x−s)] / s ds`.
///
/// Symmetric pairing removes the pole. Simpson with step 5e-4 on
/// `s ∈ [0, 1000]`; beyond that `J(x+s) = 0` and the interference factor is
/// dropped (its contribution is below 1e-7), leaving a smooth tail that is
/// integrated after `u = 1/s`.
pub fn dense_hilbert(g: Geometry, x: f64) -> f64 {
    const L: f64 = 1000.0;
    const H: f64 = 5e-4;
    let pair = |s: f64| (density(g, x + s) - density(g, x - s)) / s;
    let n = (L / H) as usize;
    // The paired integrand is finite at s = 0; extrapolate to it.
    let at_zero = 2.0 * pair(H) - pair(2.0 * H);
    let body = simpson(|s| if s == 0.0 { at_zero } else { pair(s) }, 0.0, L, n);
    let tail = simpson(
        |u| {
            if u == 0.0 {
                PI * g.coupling * g.cutoff * g.cutoff
            } else {
                density_smooth(g, x - 1.0 / u) / u
            }
        },
        0.0,
        1.0 / L,
        2000,
    );
    -(body - tail) / PI
}

/// Frequency-flat spectral density around three channel groups, with no
/// dispersive part. Channels near zero see `j_zero`, those near `∓ω₀` see
/// `j_emit` / `j_absorb`.
#[derive(Clone, Copy, Debug)]
pub struct FlatBath {
    pub j_zero: f64,
    pub j_emit: f64,
    pub j_absorb: f64,
}

impl Spectrum for FlatBath {
    fn density(&self, omega: f64) -> f64 {
        if omega.abs() < 0.5 {
            self.j_zero
        } else if omega < 0.0 {
            self.j_emit
        } else {
            self.j_absorb
        }
    }

    fn hilbert(&self, _x: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn hilbert_slope_at_zero(&self) -> Result<f64> {
        Ok(0.0)
    }
}

/// Frequencies the coupling operator oscillates at, as
/// `(drive, rabi)` multiples, enumerated without the library's tables.
pub fn coupling_multiples() -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for drive in -1..=1 {
        for rabi in -1..=1 {
            out.push((drive, rabi));
        }
    }
    out
}

/// Smallest gap between distinct frequency labels at Rabi frequency `w`.
pub fn brute_min_separation(w: f64) -> f64 {
    let labels = coupling_multiples();
    let mut best = f64::INFINITY;
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let fa = a.0 as f64 + a.1 as f64 * w;
            let fb = b.0 as f64 + b.1 as f64 * w;
            best = best.min((fa - fb).abs());
        }
    }
    best
}

/// Deterministic generator for the randomized tests.
pub fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::SeedableRng::seed_from_u64(seed)
}
