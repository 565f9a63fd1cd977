//! Direct time integration of the second-order time-convolution master
//! equation
//!
//! ```text
//! ρ̇(t) = −i[H_S(t), ρ(t)]
//!        − ∫₀ᵗ dt′ { C(t−t′)[Z(t), Z(t′)ρ(t′)] − C*(t−t′)[Z(t), ρ(t′)Z(t′)] }
//! ```
//!
//! in the interaction picture of the dressing Hamiltonian `H_D`. All
//! operators here are built from the localized-basis Hamiltonian by
//! eigenprojection, independently of the coupling tables in [`crate::model`],
//! so that agreement with [`crate::poles`] checks conventions as well as
//! numerics.
//!
//! The memory integral is evaluated by product integration: `ρ(t′)` is
//! linear between grid points and `C` is kept in its spectral form, so the
//! logarithmic singularity of `C` at zero lag is integrated exactly.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{identity, sigma_x, sigma_z, DqdParams, DressedFrame, Op};
use crate::quad::GaussLegendre;
use crate::spectral::{BathSpectrum, Spectrum};

/// Largest tolerated drift between consecutive averaging windows.
pub const SETTLE_LIMIT: f64 = 1e-4;

/// Largest tolerated change of the averaged observable under step halving.
pub const HALVING_LIMIT: f64 = 1e-3;

const FREQ_MERGE: f64 = 1e-12;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `Σ_k A_k e^{i f_k t}`.
#[derive(Clone, Debug, Default)]
pub struct FourierOperator {
    pub terms: Vec<(f64, Op)>,
}

impl FourierOperator {
    pub fn constant(op: Op) -> Self {
        FourierOperator {
            terms: vec![(0.0, op)],
        }
    }

    pub fn at(&self, t: f64) -> Op {
        self.terms
            .iter()
            .map(|(f, a)| a * Complex64::from_polar(1.0, f * t))
            .sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.terms.iter().map(|(f, _)| *f).collect()
    }

    pub fn component(&self, freq: f64) -> Op {
        self.terms
            .iter()
            .filter(|(f, _)| (f - freq).abs() < 1e-9)
            .map(|(_, a)| *a)
            .sum()
    }

    /// `e^{iHt} A(t) e^{−iHt}` for a constant Hermitian `H`.
    pub fn in_picture(&self, h: &Op) -> Self {
        let proj = spectral_projectors(h);
        let mut terms: Vec<(f64, Op)> = Vec::new();
        for (f, a) in &self.terms {
            let scale = a.norm();
            for (ec, pc) in &proj {
                for (ed, pd) in &proj {
                    let b = pc * a * pd;
                    if b.norm() <= 1e-14 * scale {
                        continue;
                    }
                    terms.push((f + ec - ed, b));
                }
            }
        }
        terms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, Op)> = Vec::new();
        for (f, b) in terms {
            match merged.last_mut() {
                Some((g, acc)) if (f - *g).abs() < FREQ_MERGE => *acc += b,
                _ => merged.push((f, b)),
            }
        }
        FourierOperator { terms: merged }
    }
}

/// Eigenvalues and eigenprojectors of a 2×2 Hermitian matrix, ascending.
pub fn spectral_projectors(h: &Op) -> Vec<(f64, Op)> {
    let m = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let k = h - identity() * c(m);
    let r = (k[(0, 0)].re.powi(2) + k[(0, 1)].norm_sqr()).sqrt();
    if r <= 1e-14 * (1.0 + m.abs()) {
        return vec![(m, identity())];
    }
    let u = k / c(r);
    vec![
        (m - r, (identity() - u) * c(0.5)),
        (m + r, (identity() + u) * c(0.5)),
    ]
}

/// The driven dot in the dressing-frame interaction picture, expressed in
/// the localized `{|l⟩, |r⟩}` basis.
#[derive(Clone, Debug)]
pub struct DrivenDot {
    /// Bath coupling `Z(t)`.
    pub coupling: FourierOperator,
    /// Residual system Hamiltonian `H_S(t)` after removing `H_D`.
    pub hamiltonian: FourierOperator,
    /// Right-dot population `|r⟩⟨r|` in the interaction picture.
    pub population: FourierOperator,
    /// `H_D` in the rotating frame.
    pub dressing: Op,
    /// Rotating-wave system Hamiltonian.
    pub rotating: Op,
    pub rabi_prime: f64,
}

impl DrivenDot {
    /// Lower eigenprojector of `H_D`.
    pub fn dressed_ground(&self) -> Op {
        spectral_projectors(&self.dressing)[0].1
    }
}

/// Builds the interaction-picture operators for the drive `params` and the
/// dressing frame `frame`.
pub fn interaction_picture(params: &DqdParams, frame: &DressedFrame) -> Result<DrivenDot> {
    params.validate()?;
    let sz = sigma_z();
    let sx = sigma_x();
    let h_dqd = -(sz * c(params.bias) + sx * c(params.tunneling)) * c(0.5);
    let proj = spectral_projectors(&h_dqd);
    if proj.len() != 2 {
        return Err(Error::InvalidParameter {
            name: "tunneling",
            reason: "dot levels are degenerate".into(),
        });
    }
    let (ground, excited) = (proj[0].1, proj[1].1);
    let sz_e = ground - excited;
    let h_rot = -sz_e * c(0.5);

    let drive = sz * c(params.drive_angle.cos()) + sx * c(params.drive_angle.sin());
    let transverse = ground * drive * excited + excited * drive * ground;
    let theta = params.tunneling.atan2(params.bias);
    let s = (theta - params.drive_angle).sin();
    if s.abs() < 1e-12 {
        return Err(Error::InvalidParameter {
            name: "drive_angle",
            reason: "drive has no transverse component".into(),
        });
    }
    let sx_e = -transverse / c(s);
    let rotating = h_dqd - h_rot + transverse * c(params.drive_amplitude / 2.0);
    let dressing = -(sz_e * c(frame.detuning) + sx_e * c(frame.rabi)) * c(0.5);

    let lift = |op: Op| {
        FourierOperator::constant(op)
            .in_picture(&h_rot)
            .in_picture(&dressing)
    };
    Ok(DrivenDot {
        coupling: lift(sz),
        population: lift((identity() - sz) * c(0.5)),
        hamiltonian: FourierOperator::constant(rotating - dressing).in_picture(&dressing),
        dressing,
        rotating,
        rabi_prime: frame.rabi_prime,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// Lower eigenstate of `H_D`.
    DressedGround,
    MaximallyMixed,
    Custom(Op),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub t_max: f64,
    pub dt: f64,
    /// History truncation `τ_max`.
    pub kernel_window: f64,
    /// Tail window for averaging; `None` picks the shortest whole number of
    /// Rabi periods above 400.
    pub average_window: Option<f64>,
    pub initial: InitialState,
    /// Second RK4 pass with the memory source interpolated across the step.
    pub predictor_corrector: bool,
    /// Upper end of the spectral grid used to build the memory weights.
    pub spectral_cutoff: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            t_max: 3000.0,
            dt: 0.1,
            kernel_window: 100.0,
            average_window: None,
            initial: InitialState::DressedGround,
            predictor_corrector: true,
            spectral_cutoff: 100.0,
        }
    }
}

impl TrajectoryConfig {
    /// Largest step allowed for a bare Rabi frequency `rabi_prime`.
    pub fn max_step(rabi_prime: f64) -> f64 {
        (0.02 / rabi_prime).min(0.02 * 2.0 * PI)
    }

    pub fn validate(&self, bare_rabi_prime: f64) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive".into());
        }
        let limit = Self::max_step(bare_rabi_prime);
        if self.dt > limit * (1.0 + 1e-12) {
            return bad(
                "dt",
                format!("{} exceeds the resolution limit {limit}", self.dt),
            );
        }
        if !(self.kernel_window >= self.dt) {
            return bad("kernel_window", "must cover at least one step".into());
        }
        if !(self.t_max > self.kernel_window) {
            return bad("t_max", "must exceed the kernel window".into());
        }
        if !(self.spectral_cutoff > 0.0) {
            return bad("spectral_cutoff", "must be positive".into());
        }
        Ok(())
    }

    /// `|C(τ_max)| / |C(dt)|`. `C` diverges at zero lag, so the first grid
    /// lag stands in for the reference scale.
    pub fn kernel_tail_ratio(&self, bath: &BathSpectrum) -> Result<f64> {
        let near = bath.bath_correlation(self.dt)?.norm();
        if near == 0.0 {
            return Ok(0.0);
        }
        Ok(bath.bath_correlation(self.kernel_window)?.norm() / near)
    }

    pub fn halved(&self) -> Self {
        TrajectoryConfig {
            dt: self.dt / 2.0,
            ..*self
        }
    }
}

/// Segment integrals `∫₀¹ (1−s) e^{−ias} ds` and `∫₀¹ s e^{−ias} ds`.
fn segment_weights(a: f64) -> (Complex64, Complex64) {
    let z = Complex64::new(0.0, -a);
    if a.abs() < 0.5 {
        let mut term = c(1.0);
        let mut wa = Complex64::new(0.0, 0.0);
        let mut wb = Complex64::new(0.0, 0.0);
        for n in 0..24 {
            let nf = n as f64;
            wa += term / ((nf + 1.0) * (nf + 2.0));
            wb += term / (nf + 2.0);
            term *= z / (nf + 1.0);
        }
        (wa, wb)
    } else {
        let ez = z.exp();
        let z2 = z * z;
        ((ez - 1.0 - z) / z2, (ez * (z - 1.0) + 1.0) / z2)
    }
}

/// History weights: `A(t_n) = Σ_ω P_ω e^{iωt_n} Σ_k w_k(ω) ρ_{n−k}`.
#[derive(Clone, Debug)]
pub struct MemoryKernel {
    pub frequencies: Vec<f64>,
    pub dt: f64,
    /// Number of history segments in the window.
    pub len: usize,
    /// Interior weights `w_k`, `k = 0..=len−1`, per frequency.
    interior: Vec<Vec<Complex64>>,
    /// Weight of the oldest point when the history is cut at segment `k`.
    boundary: Vec<Vec<Complex64>>,
    /// `Sa_0`, the weight of the newest point.
    newest: Vec<Complex64>,
}

const NEAR_SEGMENTS: usize = 4;
const FAR_CUTOFF: f64 = 1e4;
const FAR_PANEL: f64 = 0.1;

impl MemoryKernel {
    /// Per segment `[kh, (k+1)h]` of lag `τ`,
    ///
    /// ```text
    /// Sa_k(ω) = (h/2π) e^{−iωkh} ∫ du J(−u) e^{−iukh} I_a((u+ω)h)
    /// ```
    ///
    /// and likewise `Sb_k` with `I_b`; `Sa_k` multiplies `ρ_{n−k}` and
    /// `Sb_k` multiplies `ρ_{n−k−1}`.
    pub fn build(
        bath: &dyn Spectrum,
        frequencies: &[f64],
        dt: f64,
        window: f64,
        spectral_cutoff: f64,
    ) -> Result<Self> {
        let len = ((window / dt).round() as usize).max(1);
        let nf = frequencies.len();
        let rule = GaussLegendre::new(8);
        let panel = 0.025f64.min(2.5 / window.max(1.0));
        let panels = (spectral_cutoff / panel).ceil() as usize;
        let width = spectral_cutoff / panels as f64;
        let mut nodes = Vec::with_capacity(panels * rule.nodes.len());
        let mut dens = Vec::with_capacity(nodes.capacity());
        for p in 0..panels {
            let a = p as f64 * width;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let u = a + 0.5 * width * (x + 1.0);
                nodes.push(u);
                dens.push(0.5 * width * w * bath.density(-u) * dt / (2.0 * PI));
            }
        }
        let mut ga = vec![Vec::with_capacity(nodes.len()); nf];
        let mut gb = vec![Vec::with_capacity(nodes.len()); nf];
        for (i, w) in frequencies.iter().enumerate() {
            for (u, d) in nodes.iter().zip(&dens) {
                let (ia, ib) = segment_weights((u + w) * dt);
                ga[i].push(ia * d);
                gb[i].push(ib * d);
            }
        }
        let step: Vec<Complex64> = nodes
            .iter()
            .map(|u| Complex64::from_polar(1.0, -u * dt))
            .collect();
        let mut phase = vec![c(1.0); nodes.len()];
        let mut sa = vec![vec![Complex64::new(0.0, 0.0); len]; nf];
        let mut sb = vec![vec![Complex64::new(0.0, 0.0); len]; nf];
        for k in 0..len {
            for i in 0..nf {
                let mut acc_a = Complex64::new(0.0, 0.0);
                let mut acc_b = Complex64::new(0.0, 0.0);
                for ((p, a), b) in phase.iter().zip(&ga[i]).zip(&gb[i]) {
                    acc_a += a * p;
                    acc_b += b * p;
                }
                let rot = Complex64::from_polar(1.0, -frequencies[i] * k as f64 * dt);
                sa[i][k] = acc_a * rot;
                sb[i][k] = acc_b * rot;
            }
            for (p, s) in phase.iter_mut().zip(&step) {
                *p *= s;
            }
        }

        // Beyond the grid the integrand decays like 1/u²; it matters only
        // for the first few segments. Past FAR_CUTOFF the remainder is
        // imaginary to leading order and cancels in the memory commutator.
        if spectral_cutoff < FAR_CUTOFF {
            let near = NEAR_SEGMENTS.min(len);
            let far_panels = ((FAR_CUTOFF - spectral_cutoff) / FAR_PANEL).ceil() as usize;
            let far_width = (FAR_CUTOFF - spectral_cutoff) / far_panels as f64;
            let scale = dt / (2.0 * PI);
            for p in 0..far_panels {
                let a = spectral_cutoff + p as f64 * far_width;
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let u = a + 0.5 * far_width * (x + 1.0);
                    let d = 0.5 * far_width * wt * bath.density(-u) * scale;
                    for (i, w) in frequencies.iter().enumerate() {
                        let (ia, ib) = segment_weights((u + w) * dt);
                        let step = Complex64::from_polar(1.0, -(u + w) * dt);
                        let mut ph = c(d);
                        for k in 0..near {
                            sa[i][k] += ia * ph;
                            sb[i][k] += ib * ph;
                            ph *= step;
                        }
                    }
                }
            }
        }

        let mut interior = vec![Vec::with_capacity(len); nf];
        let mut boundary = vec![Vec::with_capacity(len + 1); nf];
        for i in 0..nf {
            for k in 0..len {
                let prev = if k == 0 { c(0.0) } else { sb[i][k - 1] };
                interior[i].push(sa[i][k] + prev);
            }
            boundary[i].push(c(0.0));
            for k in 0..len {
                boundary[i].push(sb[i][k]);
            }
        }
        let newest = (0..nf).map(|i| sa[i][0]).collect();
        Ok(MemoryKernel {
            frequencies: frequencies.to_vec(),
            dt,
            len,
            interior,
            boundary,
            newest,
        })
    }

    /// Full weight of `ρ_{n−k}` for an interior lag, `Sa_k + Sb_{k−1}`.
    pub fn weight(&self, freq_index: usize, k: usize) -> Complex64 {
        self.interior[freq_index][k]
    }
}

type Packed = [Complex64; 4];

fn pack(m: &Op) -> Packed {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn unpack(p: &Packed) -> Op {
    Op::new(p[0], p[1], p[2], p[3])
}

/// Density-matrix history on the step grid.
struct History {
    ring: Vec<Packed>,
}

impl History {
    fn new(len: usize) -> Self {
        History {
            ring: vec![[Complex64::new(0.0, 0.0); 4]; len + 1],
        }
    }
    fn get(&self, n: usize) -> &Packed {
        &self.ring[n % self.ring.len()]
    }
    fn set(&mut self, n: usize, p: Packed) {
        let l = self.ring.len();
        self.ring[n % l] = p;
    }
}

/// `B_ω(t_n) = Σ_k w_k(ω) ρ_{n−k}` with `ρ_n` supplied separately.
fn history_sums(kernel: &MemoryKernel, hist: &History, n: usize, newest: &Packed) -> Vec<Packed> {
    let nf = kernel.frequencies.len();
    let zero = [Complex64::new(0.0, 0.0); 4];
    let mut out = vec![zero; nf];
    let m = n.min(kernel.len);
    if m == 0 {
        return out;
    }
    for k in 0..=m {
        let rho = if k == 0 { newest } else { hist.get(n - k) };
        for i in 0..nf {
            let w = if k == m {
                kernel.boundary[i][m]
            } else {
                kernel.interior[i][k]
            };
            let o = &mut out[i];
            o[0] += w * rho[0];
            o[1] += w * rho[1];
            o[2] += w * rho[2];
            o[3] += w * rho[3];
        }
    }
    out
}

/// Memory source `−[Z(t), A − A†]` with `A = Σ_ω P_ω e^{iωt} B_ω`.
fn memory_source(coupling: &FourierOperator, sums: &[Packed], t: f64) -> Op {
    let mut a = Op::zeros();
    for ((f, p), b) in coupling.terms.iter().zip(sums) {
        a += p * unpack(b) * Complex64::from_polar(1.0, f * t);
    }
    let z = coupling.at(t);
    let k = a - a.adjoint();
    -(z * k - k * z)
}

fn commutator_rhs(h: &Op, rho: &Op, source: &Op) -> Op {
    let i = Complex64::new(0.0, 1.0);
    (h * rho - rho * h) * (-i) + source
}

fn rk4(rho: &Op, hs: &[Op; 3], sources: &[Op; 3], dt: f64) -> Op {
    let k1 = commutator_rhs(&hs[0], rho, &sources[0]);
    let k2 = commutator_rhs(&hs[1], &(rho + k1 * c(dt / 2.0)), &sources[1]);
    let k3 = commutator_rhs(&hs[1], &(rho + k2 * c(dt / 2.0)), &sources[1]);
    let k4 = commutator_rhs(&hs[2], &(rho + k3 * c(dt)), &sources[2]);
    rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Op>,
    pub rabi_prime: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

impl Trajectory {
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// `Tr{M(t_n) ρ(t_n)}` at every step.
    pub fn observable(&self, obs: &FourierOperator) -> Vec<f64> {
        self.states
            .iter()
            .enumerate()
            .map(|(n, r)| (obs.at(self.time(n)) * r).trace().re)
            .collect()
    }

    /// Writes `t, ρ_00, ρ_11, Re ρ_01, Im ρ_01, ⟨M⟩` every `stride` steps.
    pub fn write_csv<W: Write>(&self, obs: &FourierOperator, stride: usize, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidParameter {
            name: "output",
            reason: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "rho_00",
            "rho_11",
            "re_rho_01",
            "im_rho_01",
            "observable",
        ])
        .map_err(io)?;
        for (n, r) in self.states.iter().enumerate().step_by(stride.max(1)) {
            let t = self.time(n);
            let m = (obs.at(t) * r).trace().re;
            let row = [t, r[(0, 0)].re, r[(1, 1)].re, r[(0, 1)].re, r[(0, 1)].im, m];
            w.write_record(row.iter().map(|x| format!("{x:.11e}")))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter {
            name: "output",
            reason: e.to_string(),
        })
    }
}

/// Integrates the master equation from the configured initial state.
pub fn propagate_tc2(
    params: &DqdParams,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory> {
    let dot = interaction_picture(params, frame)?;
    let bare_rabi_prime = {
        let theta = params.tunneling.atan2(params.bias);
        let eta = params.bias.hypot(params.tunneling) - 1.0;
        let rabi = params.drive_amplitude * (theta - params.drive_angle).sin();
        eta.hypot(rabi)
    };
    cfg.validate(bare_rabi_prime)?;
    let freqs = dot.coupling.frequencies();
    let kernel = MemoryKernel::build(bath, &freqs, cfg.dt, cfg.kernel_window, cfg.spectral_cutoff)?;
    Ok(integrate(&dot, &kernel, cfg))
}

fn integrate(dot: &DrivenDot, kernel: &MemoryKernel, cfg: &TrajectoryConfig) -> Trajectory {
    let h = cfg.dt;
    let steps = (cfg.t_max / h).round() as usize;
    let mut rho = match cfg.initial {
        InitialState::DressedGround => dot.dressed_ground(),
        InitialState::MaximallyMixed => identity() * c(0.5),
        InitialState::Custom(r) => r,
    };
    let mut hist = History::new(kernel.len);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(rho);
    hist.set(0, pack(&rho));
    let mut sums = history_sums(kernel, &hist, 0, &pack(&rho));
    let mut source = memory_source(&dot.coupling, &sums, 0.0);
    let (mut trace_err, mut herm_err) = (0.0f64, 0.0f64);

    for n in 0..steps {
        let t = n as f64 * h;
        let hs = [
            dot.hamiltonian.at(t),
            dot.hamiltonian.at(t + h / 2.0),
            dot.hamiltonian.at(t + h),
        ];
        let predicted = rk4(&rho, &hs, &[source; 3], h);
        let p_packed = pack(&predicted);
        let mut next_sums = history_sums(kernel, &hist, n + 1, &p_packed);
        let next = if cfg.predictor_corrector {
            let s_next = memory_source(&dot.coupling, &next_sums, t + h);
            let mid = (source + s_next) * c(0.5);
            let corrected = rk4(&rho, &hs, &[source, mid, s_next], h);
            let diff = pack(&(corrected - predicted));
            for (i, s) in next_sums.iter_mut().enumerate() {
                let w = kernel.newest[i];
                for j in 0..4 {
                    s[j] += w * diff[j];
                }
            }
            corrected
        } else {
            predicted
        };
        rho = next;
        sums = next_sums;
        source = memory_source(&dot.coupling, &sums, t + h);
        hist.set(n + 1, pack(&rho));
        trace_err = trace_err.max((rho.trace() - 1.0).norm());
        herm_err = herm_err.max((rho - rho.adjoint()).norm());
        states.push(rho);
    }
    Trajectory {
        dt: h,
        states,
        rabi_prime: dot.rabi_prime,
        max_trace_error: trace_err,
        max_hermiticity_error: herm_err,
    }
}

/// The shortest whole number of periods `2π/Ω′` at least `min_length` long.
pub fn rabi_window(rabi_prime: f64, min_length: f64) -> f64 {
    let period = 2.0 * PI / rabi_prime;
    (min_length / period).ceil().max(1.0) * period
}

/// Twice-integrated series, `Q(t) = ∫₀ᵗ ∫₀^{t′} s`, on the step grid.
struct DoubleIntegral {
    dt: f64,
    q: Vec<f64>,
}

impl DoubleIntegral {
    fn new(series: &[f64], dt: f64) -> Self {
        let mut q = Vec::with_capacity(series.len());
        let (mut i1, mut i2) = (0.0, 0.0);
        q.push(0.0);
        for w in series.windows(2) {
            let next = i1 + 0.5 * dt * (w[0] + w[1]);
            // I is piecewise quadratic; Simpson is exact on each step.
            let mid = i1 + dt * (3.0 * w[0] + w[1]) / 8.0;
            i2 += dt * (i1 + 4.0 * mid + next) / 6.0;
            i1 = next;
            q.push(i2);
        }
        DoubleIntegral { dt, q }
    }

    fn at(&self, t: f64) -> f64 {
        let x = t / self.dt;
        let n = (x.floor() as usize).min(self.q.len() - 2);
        let f = x - n as f64;
        self.q[n] * (1.0 - f) + self.q[n + 1] * f
    }

    /// Mean over `[end − window, end]` of the running mean over one drive
    /// period.
    fn smoothed_mean(&self, end: f64, window: f64) -> f64 {
        let p = 2.0 * PI;
        (self.at(end) - self.at(end - window) - self.at(end - p) + self.at(end - window - p))
            / (p * window)
    }
}

/// Mean of `Tr{M(t)ρ(t)}` over the tail window, checked against the
/// window before it.
///
/// The signal is first averaged over one drive period, which removes the
/// drive-frequency components exactly; the window itself spans whole
/// periods `2π/Ω′`.
pub fn time_average_observable(
    traj: &Trajectory,
    obs: &FourierOperator,
    cfg: &TrajectoryConfig,
) -> Result<f64> {
    let series = traj.observable(obs);
    let window = cfg
        .average_window
        .unwrap_or_else(|| rabi_window(traj.rabi_prime, 400.0));
    let end = (series.len() - 1) as f64 * traj.dt;
    if 2.0 * window + 2.0 * PI > end {
        return Err(Error::InvalidParameter {
            name: "average_window",
            reason: format!("two windows of {window} do not fit in the trajectory"),
        });
    }
    let q = DoubleIntegral::new(&series, traj.dt);
    let last = q.smoothed_mean(end, window);
    let prev = q.smoothed_mean(end - window, window);
    let drift = (last - prev).abs();
    if drift > SETTLE_LIMIT {
        return Err(Error::NotSettled {
            drift,
            limit: SETTLE_LIMIT,
        });
    }
    Ok(last)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    pub halved: f64,
    /// `|value − halved|`.
    pub change: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

/// Time-averaged right-dot population, checked by rerunning at half the
/// step.
pub fn converged_population(
    params: &DqdParams,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
    cfg: &TrajectoryConfig,
) -> Result<OracleEstimate> {
    let dot = interaction_picture(params, frame)?;
    let coarse = propagate_tc2(params, frame, bath, cfg)?;
    let fine_cfg = cfg.halved();
    let fine = propagate_tc2(params, frame, bath, &fine_cfg)?;
    let value = time_average_observable(&coarse, &dot.population, cfg)?;
    let halved = time_average_observable(&fine, &dot.population, &fine_cfg)?;
    let change = (value - halved).abs();
    if change > HALVING_LIMIT {
        return Err(Error::StepTooCoarse {
            change,
            limit: HALVING_LIMIT,
        });
    }
    Ok(OracleEstimate {
        value: halved,
        halved,
        change,
        max_trace_error: coarse.max_trace_error.max(fine.max_trace_error),
        max_hermiticity_error: coarse.max_hermiticity_error.max(fine.max_hermiticity_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn fig2(bias: f64, drive: f64) -> DqdParams {
        DqdParams::new(bias, 0.3, FRAC_PI_2, drive).unwrap()
    }

    #[test]
    fn projectors_resolve_identity() {
        let h = Op::new(
            c(0.3),
            Complex64::new(0.1, -0.2),
            Complex64::new(0.1, 0.2),
            c(-0.7),
        );
        let p = spectral_projectors(&h);
        assert_eq!(p.len(), 2);
        assert!((p[0].1 + p[1].1 - identity()).norm() < 1e-14);
        let rebuilt = p[0].1 * c(p[0].0) + p[1].1 * c(p[1].0);
        assert!((rebuilt - h).norm() < 1e-14);
        assert!(p[0].0 < p[1].0);
    }

    #[test]
    fn segment_weights_branches_agree() {
        for a in [0.499_999, 0.5] {
            let (x, y) = segment_weights(a);
            let (u, v) = segment_weights(a + 1e-9);
            assert!((x - u).norm() < 1e-8 && (y - v).norm() < 1e-8);
        }
        let (wa, wb) = segment_weights(0.0);
        assert!((wa - 0.5).norm() < 1e-15 && (wb - 0.5).norm() < 1e-15);
    }

    #[test]
    fn coupling_frequencies_match_floquet_set() {
        let frame = DressedFrame::new(0.02, -0.18);
        let dot = interaction_picture(&fig2(0.93, 0.2), &frame).unwrap();
        let w = frame.rabi_prime;
        let mut expected = vec![0.0, w, -w, 1.0, -1.0, 1.0 + w, -1.0 - w, 1.0 - w, w - 1.0];
        expected.sort_by(f64::total_cmp);
        let got = dot.coupling.frequencies();
        assert_eq!(got.len(), 9);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
        // Z(0) is σ_z and Z(t) stays involutory.
        assert!((dot.coupling.at(0.0) - sigma_z()).norm() < 1e-12);
        let z = dot.coupling.at(3.7);
        assert!((z * z - identity()).norm() < 1e-12);
    }

    #[test]
    fn residual_hamiltonian_vanishes_in_bare_frame() {
        let p = fig2(0.93, 0.2);
        let theta = p.tunneling.atan2(p.bias);
        let eta = p.bias.hypot(p.tunneling) - 1.0;
        let rabi = -0.2 * theta.cos();
        let dot = interaction_picture(&p, &DressedFrame::new(eta, rabi)).unwrap();
        assert!(dot.hamiltonian.at(1.3).norm() < 1e-14);
    }

    #[test]
    fn kernel_weights_track_correlation() {
        let bath = BathSpectrum::new(0.2, 20.0, 2.0).unwrap();
        let dt = 0.1;
        let k = MemoryKernel::build(&bath, &[0.0], dt, 30.0, 100.0).unwrap();
        let rule = GaussLegendre::new(20);
        for lag in [2usize, 10, 57, 200] {
            // Hat-weighted lag integral of C around kh. The spectral grid stops
            // at u = 100; the dropped tail is of order P·dt/(100·kh).
            let center = lag as f64 * dt;
            let part = |re: bool| {
                let mut f = |tau: f64| {
                    let v = bath.bath_correlation(tau).unwrap() * (1.0 - (tau - center).abs() / dt);
                    if re {
                        v.re
                    } else {
                        v.im
                    }
                };
                rule.apply(&mut f, center - dt, center) + rule.apply(&mut f, center, center + dt)
            };
            let expect = Complex64::new(part(true), part(false));
            let got = k.weight(0, lag);
            assert!(
                (got - expect).norm() < 2e-3 * expect.norm() + 5e-6,
                "lag {lag}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn window_is_whole_rabi_periods() {
        let w = rabi_window(0.17, 400.0);
        let periods = w * 0.17 / (2.0 * PI);
        assert!((periods - periods.round()).abs() < 1e-9);
        assert!(w >= 400.0);
    }

    #[test]
    fn closed_resonant_dynamics_average_to_half() {
        let bath = BathSpectrum::new(0.0, 20.0, 2.0).unwrap();
        let p = fig2(DqdParams::resonant_bias(0.3), 0.2);
        let theta = p.tunneling.atan2(p.bias);
        let frame = DressedFrame::new(0.0, -0.2 * theta.cos());
        let dot = interaction_picture(&p, &frame).unwrap();
        // Start in |g⟩: symmetric Rabi flopping.
        let g = spectral_projectors(&(-(sigma_z() * c(p.bias) + sigma_x() * c(0.3)) * c(0.5)))[0].1;
        let cfg = TrajectoryConfig {
            t_max: 2000.0,
            kernel_window: 1.0,
            initial: InitialState::Custom(g),
            ..Default::default()
        };
        let traj = propagate_tc2(&p, &frame, &bath, &cfg).unwrap();
        assert!(traj.max_trace_error < 1e-12);
        let m = time_average_observable(&traj, &dot.population, &cfg).unwrap();
        assert!((m - 0.5).abs() < 1e-3, "{m}");
    }
}
