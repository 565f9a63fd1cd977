//! Bare and dressed frames of the driven double dot and the Fourier tables of
//! the bath coupling operator in the dressed interaction picture.
//!
//! Operators are 2×2 matrices in the dressed basis ordered `(|+⟩, |−⟩)`, where
//! the dressing Hamiltonian `H_D = −Ω′ σ_z/2` gives `|+⟩` energy `−Ω′/2` and
//! `|−⟩` energy `+Ω′/2`. With `A(t) = e^{iH_D t} A e^{−iH_D t}`, the
//! energy-raising ladder `|−⟩⟨+|` carries frequency `+Ω′`; it is the `σ₊`
//! of the coupling tables.

use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

pub type Op = Matrix2<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity() -> Op {
    Op::identity()
}

/// `σ_z` in the dressed basis.
pub fn sigma_z() -> Op {
    Op::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn sigma_x() -> Op {
    Op::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

/// Energy-raising ladder `|−⟩⟨+|`.
pub fn sigma_plus() -> Op {
    Op::new(c(0.0), c(0.0), c(1.0), c(0.0))
}

/// Energy-lowering ladder `|+⟩⟨−|`.
pub fn sigma_minus() -> Op {
    Op::new(c(0.0), c(1.0), c(0.0), c(0.0))
}

/// Double-dot parameters; frequencies in units of the drive frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DqdParams {
    pub bias: f64,
    pub tunneling: f64,
    pub drive_angle: f64,
    pub drive_amplitude: f64,
}

impl DqdParams {
    pub fn new(bias: f64, tunneling: f64, drive_angle: f64, drive_amplitude: f64) -> Result<Self> {
        let p = DqdParams {
            bias,
            tunneling,
            drive_angle,
            drive_amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tunneling > 0.0 && self.tunneling.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tunneling",
                reason: format!("must be > 0, got {}", self.tunneling),
            });
        }
        if !(self.drive_amplitude >= 0.0 && self.drive_amplitude.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "drive_amplitude",
                reason: format!("must be >= 0, got {}", self.drive_amplitude),
            });
        }
        if !self.bias.is_finite() || !self.drive_angle.is_finite() {
            return Err(Error::InvalidParameter {
                name: "bias",
                reason: "bias and drive angle must be finite".into(),
            });
        }
        Ok(())
    }

    /// Bias at which the qubit splitting equals the drive frequency.
    pub fn resonant_bias(tunneling: f64) -> f64 {
        (1.0 - tunneling * tunneling).sqrt()
    }
}

/// Parameters of the rotating-frame Hamiltonian `−(η̃ σ_z^e + Ω̃ σ_x^e)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BareFrame {
    /// Mixing angle `θ = atan2(Δ, ε)` between localized and energy bases.
    pub theta: f64,
    pub splitting: f64,
    pub detuning: f64,
    /// Signed bare Rabi frequency `Ω₀ sin(θ − δ)`.
    pub rabi: f64,
    pub rabi_prime: f64,
    /// `atan2(Ω̃, η̃)`.
    pub angle: f64,
}

pub fn bare_frame(params: &DqdParams) -> BareFrame {
    let theta = params.tunneling.atan2(params.bias);
    let splitting = params.bias.hypot(params.tunneling);
    let detuning = splitting - 1.0;
    let rabi = params.drive_amplitude * (theta - params.drive_angle).sin();
    BareFrame {
        theta,
        splitting,
        detuning,
        rabi,
        rabi_prime: detuning.hypot(rabi),
        angle: rabi.atan2(detuning),
    }
}

/// Renormalized detuning and Rabi frequency defining the dressing Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedFrame {
    pub detuning: f64,
    pub rabi: f64,
    pub rabi_prime: f64,
    pub angle: f64,
}

impl DressedFrame {
    pub fn new(detuning: f64, rabi: f64) -> Self {
        DressedFrame {
            detuning,
            rabi,
            rabi_prime: detuning.hypot(rabi),
            angle: rabi.atan2(detuning),
        }
    }

    /// `(cos φ, sin φ)` as `(η, Ω)/Ω′`.
    pub fn angle_cos_sin(&self) -> (f64, f64) {
        if self.rabi_prime > 0.0 {
            (self.detuning / self.rabi_prime, self.rabi / self.rabi_prime)
        } else {
            (self.angle.cos(), self.angle.sin())
        }
    }

    /// The frame with no renormalization, `(η, Ω) = (η̃, Ω̃)`.
    pub fn from_bare(bare: &BareFrame) -> Self {
        Self::new(bare.detuning, bare.rabi)
    }
}

/// Frequency `drive·ω₀ + rabi·Ω′` kept as exact integer labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreqLabel {
    pub drive: i32,
    pub rabi: i32,
}

impl FreqLabel {
    pub const ZERO: FreqLabel = FreqLabel { drive: 0, rabi: 0 };

    pub const fn new(drive: i32, rabi: i32) -> Self {
        FreqLabel { drive, rabi }
    }

    pub fn value(&self, rabi_prime: f64) -> f64 {
        self.drive as f64 + self.rabi as f64 * rabi_prime
    }
}

impl std::ops::Add for FreqLabel {
    type Output = FreqLabel;
    fn add(self, o: FreqLabel) -> FreqLabel {
        FreqLabel::new(self.drive + o.drive, self.rabi + o.rabi)
    }
}

impl std::ops::Sub for FreqLabel {
    type Output = FreqLabel;
    fn sub(self, o: FreqLabel) -> FreqLabel {
        FreqLabel::new(self.drive - o.drive, self.rabi - o.rabi)
    }
}

impl std::ops::Neg for FreqLabel {
    type Output = FreqLabel;
    fn neg(self) -> FreqLabel {
        FreqLabel::new(-self.drive, -self.rabi)
    }
}

impl fmt::Display for FreqLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.drive, self.rabi) {
            (0, 0) => write!(f, "0"),
            (d, 0) => write!(f, "{d}ω₀"),
            (0, r) => write!(f, "{r}Ω′"),
            (d, r) if r > 0 => write!(f, "{d}ω₀+{r}Ω′"),
            (d, r) => write!(f, "{d}ω₀{r}Ω′"),
        }
    }
}

/// The nine Floquet frequencies of the coupling operator.
pub const COUPLING_LABELS: [FreqLabel; 9] = [
    FreqLabel::new(0, 0),
    FreqLabel::new(0, 1),
    FreqLabel::new(0, -1),
    FreqLabel::new(1, 0),
    FreqLabel::new(-1, 0),
    FreqLabel::new(1, 1),
    FreqLabel::new(-1, -1),
    FreqLabel::new(1, -1),
    FreqLabel::new(-1, 1),
];

/// Fails if two distinct labels evaluate to frequencies closer than `tol`.
pub fn check_distinct(labels: &[FreqLabel], rabi_prime: f64, tol: f64) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let sep = (a.value(rabi_prime) - b.value(rabi_prime)).abs();
            if a != b && sep < tol {
                return Err(Error::DegenerateFrequencies {
                    first: a.to_string(),
                    second: b.to_string(),
                    separation: sep,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub label: FreqLabel,
    pub frequency: f64,
    pub alpha: f64,
    pub matrix: Op,
}

/// Fourier table `Σ_ω A_ω e^{iωt}` over the coupling frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTable {
    pub entries: Vec<Coupling>,
}

impl CouplingTable {
    pub fn get(&self, label: FreqLabel) -> Option<&Coupling> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Matrix at `label`, zero if absent.
    pub fn matrix(&self, label: FreqLabel) -> Op {
        self.get(label).map(|e| e.matrix).unwrap_or_else(Op::zeros)
    }

    /// `Σ_ω A_ω e^{iωt}`.
    pub fn at_time(&self, t: f64) -> Op {
        self.entries.iter().fold(Op::zeros(), |acc, e| {
            acc + e.matrix * Complex64::from_polar(1.0, e.frequency * t)
        })
    }
}

/// Coefficients `α_ω` of the coupling operator `σ_z` (localized basis).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alphas {
    pub zero: f64,
    pub rabi: f64,
    pub drive: f64,
    pub drive_plus_rabi: f64,
    pub drive_minus_rabi: f64,
}

impl Alphas {
    pub fn new(theta: f64, angle: f64) -> Self {
        let (sp, cp) = angle.sin_cos();
        Self::from_cos_sin(theta, cp, sp)
    }

    /// Takes `cos φ = η/Ω′` and `sin φ = Ω/Ω′` from the frame directly, so
    /// zero detuning gives an exactly vanishing `α₀`.
    pub fn for_frame(theta: f64, frame: &DressedFrame) -> Self {
        let (cp, sp) = frame.angle_cos_sin();
        Self::from_cos_sin(theta, cp, sp)
    }

    fn from_cos_sin(theta: f64, cp: f64, sp: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        Alphas {
            zero: ct * cp,
            rabi: -ct * sp,
            drive: -st * sp / 2.0,
            drive_plus_rabi: -st * (1.0 + cp) / 2.0,
            drive_minus_rabi: st * (1.0 - cp) / 2.0,
        }
    }
}

fn table_unchecked(theta: f64, frame: &DressedFrame) -> CouplingTable {
    let a = Alphas::for_frame(theta, frame);
    let w = frame.rabi_prime;
    let rows = [
        (FreqLabel::new(0, 0), a.zero, sigma_z()),
        (FreqLabel::new(0, 1), a.rabi, sigma_plus()),
        (FreqLabel::new(0, -1), a.rabi, sigma_minus()),
        (FreqLabel::new(1, 0), a.drive, sigma_z()),
        (FreqLabel::new(-1, 0), a.drive, sigma_z()),
        (FreqLabel::new(1, 1), a.drive_plus_rabi, sigma_plus()),
        (FreqLabel::new(-1, -1), a.drive_plus_rabi, sigma_minus()),
        (FreqLabel::new(1, -1), a.drive_minus_rabi, sigma_minus()),
        (FreqLabel::new(-1, 1), a.drive_minus_rabi, sigma_plus()),
    ];
    CouplingTable {
        entries: rows
            .into_iter()
            .map(|(label, alpha, op)| Coupling {
                label,
                frequency: label.value(w),
                alpha,
                matrix: op * c(alpha),
            })
            .collect(),
    }
}

/// Smallest separation between distinct labels of `W` before they count as
/// coincident.
pub const DEGENERACY_TOLERANCE: f64 = 1e-6;

/// Fourier table `P_ω` of the bath coupling operator `Z_S(t)`.
pub fn coupling_table(theta: f64, frame: &DressedFrame) -> Result<CouplingTable> {
    check_distinct(&COUPLING_LABELS, frame.rabi_prime, DEGENERACY_TOLERANCE)?;
    Ok(table_unchecked(theta, frame))
}

/// Fourier table of the right-dot population `M = (1 − σ_z)/2`.
pub fn observable_table(theta: f64, frame: &DressedFrame) -> CouplingTable {
    let mut t = table_unchecked(theta, frame);
    for e in t.entries.iter_mut() {
        e.alpha *= -0.5;
        e.matrix = if e.label == FreqLabel::ZERO {
            (identity() - e.matrix) * c(0.5)
        } else {
            e.matrix * c(-0.5)
        };
    }
    t
}

/// Dispersive shifts `f_ν` and dressing-frame Hamiltonian components `h_ν`
/// for `ν ∈ {0, ±Ω′}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersiveCoeffs {
    pub a0: f64,
    pub a_rabi: f64,
    pub f0: Op,
    pub f_plus: Op,
    pub f_minus: Op,
    pub h0: Op,
    pub h_plus: Op,
    pub h_minus: Op,
}

impl DispersiveCoeffs {
    /// Largest entrywise gap between `h_ν` and `f_ν`.
    pub fn consistency_gap(&self) -> f64 {
        [
            self.h0 - self.f0,
            self.h_plus - self.f_plus,
            self.h_minus - self.f_minus,
        ]
        .iter()
        .flat_map(|m| m.iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
    }
}

/// `a₀` and `a_Ω′` for a dressed frame.
pub fn dispersive_amplitudes(
    theta: f64,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
) -> Result<(f64, f64)> {
    let a = Alphas::for_frame(theta, frame);
    let w = frame.rabi_prime;
    let f_minus = bath.hilbert_odd(1.0 - w)?;
    let f_plus = bath.hilbert_odd(1.0 + w)?;
    let f_rabi = bath.hilbert_odd(w)?;
    let a0 = 0.5
        * (-a.drive_minus_rabi.powi(2) * f_minus
            + a.drive_plus_rabi.powi(2) * f_plus
            + a.rabi.powi(2) * f_rabi);
    let a_rabi = a.drive * (a.drive_minus_rabi * f_minus - a.drive_plus_rabi * f_plus)
        - a.zero * a.rabi * f_rabi;
    Ok((a0, a_rabi))
}

pub fn dispersive_coeffs(
    theta: f64,
    frame: &DressedFrame,
    bare: &BareFrame,
    bath: &dyn Spectrum,
) -> Result<DispersiveCoeffs> {
    check_distinct(&COUPLING_LABELS, frame.rabi_prime, DEGENERACY_TOLERANCE)?;
    let (a0, a_rabi) = dispersive_amplitudes(theta, frame, bath)?;
    let rel = bare.angle - frame.angle;
    let h_diag = -(bare.rabi_prime * rel.cos() - frame.rabi_prime) / 2.0;
    let h_off = -bare.rabi_prime * rel.sin() / 2.0;
    Ok(DispersiveCoeffs {
        a0,
        a_rabi,
        f0: sigma_z() * c(a0 / 2.0),
        f_plus: sigma_plus() * c(a_rabi / 2.0),
        f_minus: sigma_minus() * c(a_rabi / 2.0),
        h0: sigma_z() * c(h_diag),
        h_plus: sigma_plus() * c(h_off),
        h_minus: sigma_minus() * c(h_off),
    })
}
