//! Phonon spectral density, its Hilbert transform, and the bath correlation
//! function.
//!
//! Frequencies are measured in units of the drive frequency. The spectral
//! density follows the convention in which emission into the bath happens at
//! negative system frequencies, so `J(ω) = 0` for `ω ≥ 0`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::Adaptive;

/// Default absolute error target for `F`.
pub const DEFAULT_QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Numerical window for `F` and `F'(0)` is `[-TAIL_FACTOR * cutoff, 0]`;
/// beyond it the integrals are closed analytically.
const TAIL_FACTOR: f64 = 50.0;

/// Selects one of the two boundary values `Ĵ±(ω) = (J(ω) ± iF(ω)) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// A bath seen through its spectral density `J` and Hilbert transform `F`.
///
/// `BathSpectrum` is the physical model; tests and baselines plug in
/// synthetic spectra through the same trait.
pub trait Spectrum: Send + Sync {
    /// `J(ω)`.
    fn density(&self, omega: f64) -> f64;

    /// `F(x) = -π⁻¹ PV ∫ J(ω) / (ω - x) dω`.
    fn hilbert(&self, x: f64) -> Result<f64>;

    /// `F'(0)`.
    fn hilbert_slope_at_zero(&self) -> Result<f64>;

    /// True when the bath is decoupled, i.e. `J ≡ 0`.
    fn is_decoupled(&self) -> bool {
        false
    }

    /// `F_x = F(x) - F(-x)`.
    fn hilbert_odd(&self, x: f64) -> Result<f64> {
        Ok(self.hilbert(x)? - self.hilbert(-x)?)
    }

    fn jhat(&self, branch: Branch, omega: f64) -> Result<Complex64> {
        let j = self.density(omega);
        let f = self.hilbert(omega)?;
        Ok(match branch {
            Branch::Plus => Complex64::new(0.5 * j, 0.5 * f),
            Branch::Minus => Complex64::new(0.5 * j, -0.5 * f),
        })
    }
}

/// `1 - sin(x)/x`, accurate for small arguments.
pub fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        1.0 - x.sin() / x
    }
}

/// Bulk piezo-electric phonon bath coupled to a double dot.
#[derive(Clone)]
pub struct BathSpectrum {
    coupling: f64,
    separation: f64,
    cutoff: f64,
    quadrature_tolerance: f64,
    cache: Arc<Mutex<HashMap<u64, f64>>>,
}

impl fmt::Debug for BathSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BathSpectrum")
            .field("coupling", &self.coupling)
            .field("separation", &self.separation)
            .field("cutoff", &self.cutoff)
            .field("quadrature_tolerance", &self.quadrature_tolerance)
            .finish()
    }
}

impl PartialEq for BathSpectrum {
    fn eq(&self, other: &Self) -> bool {
        self.coupling == other.coupling
            && self.separation == other.separation
            && self.cutoff == other.cutoff
            && self.quadrature_tolerance == other.quadrature_tolerance
    }
}

impl BathSpectrum {
    /// `coupling` is the dimensionless strength `P`, `separation` the dot
    /// distance `d ω₀ / c_s`, `cutoff` the high-frequency cutoff `ω_c / ω₀`.
    pub fn new(coupling: f64, separation: f64, cutoff: f64) -> Result<Self> {
        Self::with_tolerance(coupling, separation, cutoff, DEFAULT_QUADRATURE_TOLERANCE)
    }

    pub fn with_tolerance(
        coupling: f64,
        separation: f64,
        cutoff: f64,
        quadrature_tolerance: f64,
    ) -> Result<Self> {
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coupling",
                reason: format!("must be finite and >= 0, got {coupling}"),
            });
        }
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "separation",
                reason: format!("must be finite and > 0, got {separation}"),
            });
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                reason: format!("must be finite and > 0, got {cutoff}"),
            });
        }
        if !(quadrature_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "quadrature_tolerance",
                reason: format!("must be > 0, got {quadrature_tolerance}"),
            });
        }
        Ok(BathSpectrum {
            coupling,
            separation,
            cutoff,
            quadrature_tolerance,
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn separation(&self) -> f64 {
        self.separation
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
    pub fn quadrature_tolerance(&self) -> f64 {
        self.quadrature_tolerance
    }

    /// Same geometry with a different coupling strength (fresh cache).
    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::with_tolerance(
            coupling,
            self.separation,
            self.cutoff,
            self.quadrature_tolerance,
        )
    }

    /// `J(ω) = πP|ω|(1 - sinc(d ω)) / (1 + (ω/ω_c)²)` for `ω < 0`, zero otherwise.
    pub fn eval_j(&self, omega: f64) -> f64 {
        if omega >= 0.0 || self.coupling == 0.0 {
            return 0.0;
        }
        let u = -omega;
        let r = 1.0 / (1.0 + (u / self.cutoff).powi(2));
        PI * self.coupling * u * one_minus_sinc(self.separation * u) * r
    }

    fn window(&self, x: f64) -> f64 {
        TAIL_FACTOR * self.cutoff + 2.0 * x.abs()
    }

    fn initial_panels(&self, len: f64) -> usize {
        // About one panel per oscillation of the interference factor.
        let per_unit = (self.separation / (2.0 * PI)).max(1.0);
        ((len * per_unit).ceil() as usize).clamp(4, 200_000)
    }

    fn integrator(&self) -> Adaptive {
        // Panels are split in halves until the summed estimate is below tol;
        // a margin keeps the result smooth in its argument.
        Adaptive::new(0.1 * self.quadrature_tolerance)
    }

    /// `F(x)` by singularity subtraction on `[-L, 0]` plus a closed-form tail.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        if self.coupling == 0.0 {
            return Ok(0.0);
        }
        if !x.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x",
                reason: "frequency must be finite".into(),
            });
        }
        let key = x.to_bits();
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = self.compute_f(x)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    fn compute_f(&self, x: f64) -> Result<f64> {
        let l = self.window(x);
        let quad = self.integrator();
        let inside = x > -l && x < 0.0;
        let jx = if inside { self.eval_j(x) } else { 0.0 };
        let integrand = |w: f64| {
            let d = w - x;
            if d == 0.0 {
                0.0
            } else {
                (self.eval_j(w) - jx) / d
            }
        };
        let body = if inside {
            quad.integrate(
                integrand,
                &[-l, x, 0.0],
                &[self.initial_panels(x + l), self.initial_panels(-x)],
            )?
        } else {
            quad.integrate(integrand, &[-l, 0.0], &[self.initial_panels(l)])?
        };
        let log_term = if inside {
            jx * ((-x) / (l + x)).ln()
        } else {
            0.0
        };
        // ∫_{-∞}^{-L} J(ω)/(ω - x) dω = -∫_L^∞ J(-u)/(u + x) du
        let tail = -self.tail_over_shifted(x, l);
        Ok(-(body + log_term + tail) / PI)
    }

    /// `∫_L^∞ J(-u) / (u + x) du` in closed form, with the oscillatory part
    /// by asymptotic integration by parts.
    fn tail_over_shifted(&self, x: f64, l: f64) -> f64 {
        let c = self.cutoff;
        let p = self.coupling;
        let d = self.separation;
        let c2 = c * c;
        let s = c2 + x * x;
        // Non-oscillatory part: πP c² ∫ u / ((u² + c²)(u + x)) du.
        let smooth = PI
            * p
            * c2
            * ((x / s) * ((l + x).ln() - 0.5 * (l * l + c2).ln()) + (c / s) * (c / l).atan());
        // Oscillatory part: -(πP/d) ∫ sin(d u) g(u) du, g = 1/((1 + u²/c²)(u + x)).
        let q = 1.0 + l * l / c2;
        let r = l + x;
        let g = 1.0 / (q * r);
        let lg = -(2.0 * l / c2) / q - 1.0 / r;
        let dlg = -(2.0 / c2) / q + (2.0 * l / c2).powi(2) / (q * q) + 1.0 / (r * r);
        let g1 = g * lg;
        let g2 = g * (lg * lg + dlg);
        let (sn, cs) = (d * l).sin_cos();
        let osc_int = g * cs / d - g1 * sn / (d * d) - g2 * cs / (d * d * d);
        smooth - PI * p / d * osc_int
    }

    /// `F'(0) = -π⁻¹ ∫ J(ω)/ω² dω`.
    pub fn eval_fprime0(&self) -> Result<f64> {
        if self.coupling == 0.0 {
            return Ok(0.0);
        }
        let l = TAIL_FACTOR * self.cutoff;
        let body = self.integrator().integrate(
            |w: f64| {
                if w == 0.0 {
                    0.0
                } else {
                    self.eval_j(w) / (w * w)
                }
            },
            &[-l, 0.0],
            &[self.initial_panels(l)],
        )?;
        let c = self.cutoff;
        let c2 = c * c;
        let d = self.separation;
        let p = self.coupling;
        // ∫_L^∞ J(-u)/u² du: smooth part in closed form, oscillatory part by
        // parts with g(u) = 1/(u (1 + u²/c²)).
        let smooth = 0.5 * PI * p * (1.0 + c2 / (l * l)).ln();
        let q = 1.0 + l * l / c2;
        let g = 1.0 / (l * q);
        let lg = -1.0 / l - (2.0 * l / c2) / q;
        let g1 = g * lg;
        let (sn, cs) = (d * l).sin_cos();
        let osc = g * cs / d - g1 * sn / (d * d);
        let tail = smooth - PI * p / d * osc;
        Ok(-(body + tail) / PI)
    }

    /// Logarithmic estimate `-P ln(d ω_c)`.
    pub fn fprime0_estimate(&self) -> f64 {
        -self.coupling * (self.separation * self.cutoff).ln()
    }

    /// Zero-temperature correlation `C(τ) = (2π)⁻¹ ∫₀^∞ J(-ω) e^{-iωτ} dω`.
    ///
    /// `J` decays like `1/ω`, so `C` has a logarithmic singularity at the
    /// origin; `C(0)` is reported as `+∞` for a coupled bath.
    pub fn bath_correlation(&self, tau: f64) -> Result<Complex64> {
        if self.coupling == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if tau == 0.0 {
            return Ok(Complex64::new(f64::INFINITY, 0.0));
        }
        if tau < 0.0 {
            return Ok(self.bath_correlation(-tau)?.conj());
        }
        let c = self.cutoff;
        let d = self.separation;
        let p = self.coupling;
        let c2 = c * c;
        let norm = 1.0 / (2.0 * PI);
        // The sinc echo needs L|τ − d| ≫ 1 for its asymptotic tail; the
        // smooth part is expanded in (c/ω)² and only needs L ≫ c.
        let mut l = TAIL_FACTOR * c;
        let beat = (tau - d).abs();
        let near_echo = beat * 1e5 < 40.0;
        if !near_echo {
            l = l.max(40.0 / beat);
        }
        l = l.min(1e5);

        let quad = Adaptive::new(0.1 * self.quadrature_tolerance);
        let panels = ((l * (tau.max(d)) / (2.0 * PI)).ceil() as usize).clamp(4, 400_000);
        let re = quad.integrate(
            |w: f64| self.eval_j(-w) * (w * tau).cos(),
            &[0.0, l],
            &[panels],
        )?;
        let im = quad.integrate(
            |w: f64| -self.eval_j(-w) * (w * tau).sin(),
            &[0.0, l],
            &[panels],
        )?;

        // J(-ω) = A ω r(ω) - B r(ω), r = c²/(c² + ω²), A = πP, B = πP/d.
        let r = c2 / (c2 + l * l);
        let r1 = -2.0 * l * c2 / (c2 + l * l).powi(2);
        let r2 = c2 * (6.0 * l * l - 2.0 * c2) / (c2 + l * l).powi(3);
        let a = PI * p;
        let b = PI * p / d;
        let go = [b * r, b * r1, b * r2];
        // A ω r = A (c²/ω − c⁴/ω³ + c⁶/ω⁵) + O(ω⁻⁷), and
        // ∫_L^∞ ω⁻ⁿ e^{-iωτ} dω = L^{1-n} Eₙ(iLτ), Eₙ₊₁ = (e^{-z} − z Eₙ)/n.
        let z = Complex64::new(0.0, l * tau);
        let ez = (-z).exp();
        let mut e = [exp_integral_imag(l * tau); 5];
        for n in 1..5 {
            e[n] = (ez - z * e[n - 1]) / n as f64;
        }
        let q = c2 / (l * l);
        let mut tail = a * c2 * (e[0] - q * e[2] + q * q * e[4]);
        // sin(dω) e^{-iωτ} = (e^{i(d-τ)ω} - e^{-i(d+τ)ω}) / 2i
        let far = oscillatory_tail(&go, -(d + tau), l);
        let near = if near_echo {
            // Non-oscillating: ∫_L^∞ B c²/(c² + ω²) dω.
            Complex64::new(b * c * (c / l).atan(), 0.0)
        } else {
            oscillatory_tail(&go, d - tau, l)
        };
        // J contributes -B r sin(dω); the smooth part was already +A ω r.
        tail -= (near - far) / Complex64::new(0.0, 2.0);
        Ok((Complex64::new(re, im) + tail) * norm)
    }
}

/// `E₁(ix) = ∫_x^∞ e^{-is}/s ds = −Ci(x) + i(Si(x) − π/2)` for `x > 0`.
/// Power series below 2, Lentz continued fraction above.
fn exp_integral_imag(x: f64) -> Complex64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x > 2.0 {
        let tiny = 1e-300;
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 2..1000 {
            let a = -((i - 1) as f64).powi(2);
            b += 2.0;
            d = (a * d + b).inv();
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        return Complex64::from_polar(1.0, -x) * h;
    }
    let x2 = x * x;
    let (mut ci, mut si) = (EULER + x.ln(), 0.0);
    let mut term = x; // x^(2k+1)/(2k+1)! with sign
    for k in 0..40 {
        let n = (2 * k + 1) as f64;
        si += term / n;
        term *= -x2 / ((n + 1.0) * (n + 2.0));
        // x^(2k+2)/(2k+2)! with sign, from the sine term times x/(2k+2)
        let even = term * (n + 2.0) / x;
        ci += even / (n + 1.0);
        if term.abs() < 1e-18 {
            break;
        }
    }
    Complex64::new(-ci, si - PI / 2.0)
}

/// `∫_L^∞ g(ω) e^{iκω} dω` from the derivatives `g, g', g''` at `L`.
fn oscillatory_tail(derivs: &[f64], kappa: f64, l: f64) -> Complex64 {
    let ik = Complex64::new(0.0, kappa);
    let phase = Complex64::from_polar(1.0, kappa * l);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut denom = ik;
    let mut sign = 1.0;
    for g in derivs {
        sum += sign * g / denom;
        denom *= ik;
        sign = -sign;
    }
    -phase * sum
}

impl Spectrum for BathSpectrum {
    fn density(&self, omega: f64) -> f64 {
        self.eval_j(omega)
    }

    fn hilbert(&self, x: f64) -> Result<f64> {
        self.eval_f(x)
    }

    fn hilbert_slope_at_zero(&self) -> Result<f64> {
        self.eval_fprime0()
    }

    fn is_decoupled(&self) -> bool {
        self.coupling == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig_bath() -> BathSpectrum {
        BathSpectrum::new(0.2, 20.0, 2.0).unwrap()
    }

    #[test]
    fn density_support_and_reference_value() {
        let b = fig_bath();
        assert_eq!(b.eval_j(1.0), 0.0);
        assert_eq!(b.eval_j(0.0), 0.0);
        let expected = 0.2 * PI * (1.0 - (-20.0f64).sin() / -20.0) / 1.25;
        assert_relative_eq!(b.eval_j(-1.0), expected, max_relative = 1e-14);
        assert!((b.eval_j(-1.0) - 0.4797).abs() < 1e-4);
    }

    #[test]
    fn density_vanishes_faster_than_linear_at_origin() {
        let b = fig_bath();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let w = -(10f64).powi(-k);
            let ratio = b.eval_j(w) / w.abs();
            assert!(ratio < prev);
            prev = ratio;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(BathSpectrum::new(-0.1, 20.0, 2.0).is_err());
        assert!(BathSpectrum::new(0.1, 0.0, 2.0).is_err());
        assert!(BathSpectrum::new(0.1, 20.0, -1.0).is_err());
    }

    #[test]
    fn decoupled_bath_is_silent() {
        let b = BathSpectrum::new(0.0, 20.0, 2.0).unwrap();
        for x in [-3.0, -0.5, 0.0, 0.7] {
            assert_eq!(b.eval_j(x), 0.0);
            assert_eq!(b.eval_f(x).unwrap(), 0.0);
        }
        assert_eq!(b.eval_fprime0().unwrap(), 0.0);
        assert_eq!(b.bath_correlation(0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hilbert_is_positive_at_origin() {
        assert!(fig_bath().eval_f(0.0).unwrap() > 0.0);
    }

    #[test]
    fn slope_at_origin_is_negative_and_logarithmic() {
        let b = fig_bath();
        let fp = b.eval_fprime0().unwrap();
        assert!(fp < 0.0);
        let est = b.fprime0_estimate();
        assert!((est + 0.2 * 40f64.ln()).abs() < 1e-12);
        assert!(fp / est > 0.5 && fp / est < 2.0, "{fp} vs {est}");
    }

    #[test]
    fn jhat_branches_are_conjugate() {
        let b = fig_bath();
        for w in [-1.3, -0.2, 0.4, 1.0] {
            let p = b.jhat(Branch::Plus, w).unwrap();
            let m = b.jhat(Branch::Minus, w).unwrap();
            assert_eq!(p, m.conj());
            assert_relative_eq!((p + m).re, b.eval_j(w), max_relative = 1e-15);
        }
        let p = b.jhat(Branch::Plus, 1.0).unwrap();
        assert_eq!(p.re, 0.0);
        assert_relative_eq!(p.im, 0.5 * b.eval_f(1.0).unwrap());
    }

    #[test]
    fn hilbert_is_linear_in_coupling() {
        let a = BathSpectrum::new(0.1, 20.0, 2.0).unwrap();
        let b = BathSpectrum::new(0.3, 20.0, 2.0).unwrap();
        for x in [-1.7, -0.4, 0.0, 0.9] {
            let fa = a.eval_f(x).unwrap();
            let fb = b.eval_f(x).unwrap();
            assert!((3.0 * fa - fb).abs() < 1e-8);
            assert_relative_eq!(3.0 * a.eval_j(x), b.eval_j(x), max_relative = 1e-14);
        }
    }

    #[test]
    fn exponential_integral_matches_tables() {
        // Ci and Si at 1 and 5, and continuity across the branch switch.
        let e = exp_integral_imag(1.0);
        assert!((e.re + 0.337_403_922_900_968_1).abs() < 1e-14);
        assert!((e.im - (0.946_083_070_367_183_0 - PI / 2.0)).abs() < 1e-14);
        let e = exp_integral_imag(5.0);
        assert!((e.re - 0.190_029_749_656_643_9).abs() < 1e-13);
        assert!((e.im - (1.549_931_244_944_674 - PI / 2.0)).abs() < 1e-13);
        let below = exp_integral_imag(2.0);
        let above = exp_integral_imag(2.0 + 1e-12);
        assert!((below - above).norm() < 1e-11);
    }

    #[test]
    fn cached_value_is_reused() {
        let b = fig_bath();
        let v1 = b.eval_f(-0.3).unwrap();
        let v2 = b.clone().eval_f(-0.3).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
    }

    #[test]
    fn correlation_is_hermitian_in_time() {
        let b = fig_bath();
        let c = b.bath_correlation(0.7).unwrap();
        let cm = b.bath_correlation(-0.7).unwrap();
        assert_eq!(c, cm.conj());
        let c0 = b.bath_correlation(0.0).unwrap();
        assert!(c0.re > 0.0 && c0.im == 0.0);
    }

    #[test]
    fn correlation_decays() {
        let b = fig_bath();
        let early = b.bath_correlation(0.5).unwrap().norm();
        let late = b.bath_correlation(80.0).unwrap().norm();
        assert!(late < 1e-4 * early, "{early} {late}");
    }
}
