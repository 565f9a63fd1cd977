//! Bias sweeps over the approximation modes, and tabulation of the bath
//! spectrum.
//!
//! The grid is cut into fixed contiguous segments. Each segment starts from
//! the default renormalization seed and warm-starts point to point inside,
//! so the result does not depend on how segments are scheduled.

use std::io::Write;

use rayon::prelude::*;

use crate::config::{Mode, SweepConfig};
use crate::error::{Error, Result};
use crate::model::{
    bare_frame, coupling_table, dispersive_coeffs, observable_table, BareFrame, DressedFrame,
};
use crate::oracle::{converged_population, OracleEstimate, TrajectoryConfig};
use crate::poles::{
    assemble_system, dynamical_poles, markov_steady, solve_residues, steady_observable, Dressing,
    ResidueSet,
};
use crate::renorm::{approx_renorm, solve_with_fallback, RenormOptions, RenormSolution};
use crate::spectral::{BathSpectrum, Spectrum};

/// Points per warm-start chain.
pub const SEGMENT: usize = 25;

/// Solver diagnostics of one dynamical solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub kernel_dimension: usize,
    pub conditioning: f64,
    pub relative_residual: f64,
    pub hermiticity_defect: f64,
    pub dynamical_trace: f64,
    pub ill_conditioned: bool,
}

impl SolveDiagnostics {
    fn from_residues(r: &ResidueSet) -> Self {
        SolveDiagnostics {
            kernel_dimension: r.kernel_dimension,
            conditioning: r.conditioning,
            relative_residual: r.relative_residual,
            hermiticity_defect: r.hermiticity_defect(),
            dynamical_trace: r.dynamical_trace(),
            ill_conditioned: r.ill_conditioned,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub bias: f64,
    pub bare_detuning: f64,
    pub bare_rabi: f64,
    /// Self-consistent frame; present when full mode ran and converged.
    pub renorm: Option<RenormSolution>,
    /// Other roots met on fallback seeds.
    pub alternate_roots: usize,
    pub full: Option<f64>,
    pub bare_dynamical: Option<f64>,
    pub markov: Option<f64>,
    pub no_drive: Option<f64>,
    pub full_diagnostics: Option<SolveDiagnostics>,
    pub bare_diagnostics: Option<SolveDiagnostics>,
    /// Every requested observable was produced.
    pub valid: bool,
    /// Per-mode failures, `mode: error` separated by `; `.
    pub note: String,
}

impl SweepRow {
    pub fn observable(&self, mode: Mode) -> Option<f64> {
        match mode {
            Mode::Full => self.full,
            Mode::BareDynamical => self.bare_dynamical,
            Mode::Markov => self.markov,
            Mode::NoDrive => self.no_drive,
            Mode::All => None,
        }
    }
}

/// Dynamical-pole steady state in `frame`.
pub fn dynamical_observable(
    bare: &BareFrame,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
    dressing: Dressing,
) -> Result<(f64, ResidueSet)> {
    let table = coupling_table(bare.theta, frame)?;
    let disp = dispersive_coeffs(bare.theta, frame, bare, bath)?;
    let system = assemble_system(&table, &disp, frame, bath, &dynamical_poles(), dressing)?;
    let residues = solve_residues(&system)?;
    let m = steady_observable(&residues, &observable_table(bare.theta, frame));
    Ok((m, residues))
}

/// Markovian steady state in `frame`.
pub fn markov_observable(
    bare: &BareFrame,
    frame: &DressedFrame,
    bath: &dyn Spectrum,
) -> Result<f64> {
    let table = coupling_table(bare.theta, frame)?;
    let residues = markov_steady(&table, bath)?;
    Ok(steady_observable(
        &residues,
        &observable_table(bare.theta, frame),
    ))
}

/// Right-dot weight of the undriven ground state, `sin²(θ/2)`.
pub fn no_drive_observable(theta: f64) -> f64 {
    (0.5 * theta).sin().powi(2)
}

/// `(η̃, Ω_approx)`, the frame of the bare-detuning modes.
pub fn bare_scaled_frame(bare: &BareFrame, bath: &dyn Spectrum) -> Result<DressedFrame> {
    let (_, omega) = approx_renorm(bare, bath)?;
    Ok(DressedFrame::new(bare.detuning, omega))
}

fn note(row: &mut SweepRow, mode: Mode, err: &Error) {
    if !row.note.is_empty() {
        row.note.push_str("; ");
    }
    row.note.push_str(&format!("{mode}: {err}"));
}

fn evaluate_point(
    cfg: &SweepConfig,
    bath: &BathSpectrum,
    bias: f64,
    previous: Option<&DressedFrame>,
) -> SweepRow {
    let mut row = SweepRow {
        bias,
        bare_detuning: f64::NAN,
        bare_rabi: f64::NAN,
        renorm: None,
        alternate_roots: 0,
        full: None,
        bare_dynamical: None,
        markov: None,
        no_drive: None,
        full_diagnostics: None,
        bare_diagnostics: None,
        valid: false,
        note: String::new(),
    };
    let params = match cfg.params(bias) {
        Ok(p) => p,
        Err(e) => {
            row.note = e.to_string();
            return row;
        }
    };
    let bare = bare_frame(&params);
    row.bare_detuning = bare.detuning;
    row.bare_rabi = bare.rabi;
    let opts = RenormOptions {
        tolerance: cfg.tol,
        ..Default::default()
    };

    if cfg.mode.includes(Mode::Full) {
        let mut seeds = Vec::with_capacity(3);
        if let Some(p) = previous {
            seeds.push([p.detuning, p.rabi]);
        }
        let scaled = approx_renorm(&bare, bath);
        if let Ok((eta, omega)) = scaled {
            seeds.push([bare.detuning, omega]);
            seeds.push([eta, omega]);
        }
        seeds.push([bare.detuning, bare.rabi]);
        let solved = solve_with_fallback(&bare, bare.theta, bath, &opts, &seeds, previous);
        match solved {
            Ok(s) => {
                row.renorm = Some(s.solution);
                row.alternate_roots = s.alternates.len();
                match dynamical_observable(&bare, &s.solution.frame, bath, Dressing::Cancelled) {
                    Ok((m, r)) => {
                        row.full = Some(m);
                        row.full_diagnostics = Some(SolveDiagnostics::from_residues(&r));
                    }
                    Err(e) => note(&mut row, Mode::Full, &e),
                }
            }
            Err(e) => note(&mut row, Mode::Full, &e),
        }
    }

    let needs_scaled = cfg.mode.includes(Mode::BareDynamical) || cfg.mode.includes(Mode::Markov);
    if needs_scaled {
        match bare_scaled_frame(&bare, bath) {
            Ok(frame) => {
                if cfg.mode.includes(Mode::BareDynamical) {
                    let dressing = if cfg.retain_mismatch {
                        Dressing::FromFrames
                    } else {
                        Dressing::Cancelled
                    };
                    match dynamical_observable(&bare, &frame, bath, dressing) {
                        Ok((m, r)) => {
                            row.bare_dynamical = Some(m);
                            row.bare_diagnostics = Some(SolveDiagnostics::from_residues(&r));
                        }
                        Err(e) => note(&mut row, Mode::BareDynamical, &e),
                    }
                }
                if cfg.mode.includes(Mode::Markov) {
                    match markov_observable(&bare, &frame, bath) {
                        Ok(m) => row.markov = Some(m),
                        Err(e) => note(&mut row, Mode::Markov, &e),
                    }
                }
            }
            Err(e) => {
                for m in [Mode::BareDynamical, Mode::Markov] {
                    if cfg.mode.includes(m) {
                        note(&mut row, m, &e);
                    }
                }
            }
        }
    }

    if cfg.mode.includes(Mode::NoDrive) {
        row.no_drive = Some(no_drive_observable(bare.theta));
    }

    row.valid = Mode::SINGLE
        .iter()
        .filter(|m| cfg.mode.includes(**m))
        .all(|m| row.observable(*m).is_some());
    row
}

fn run_segment(cfg: &SweepConfig, bath: &BathSpectrum, biases: &[f64]) -> Vec<SweepRow> {
    let mut previous: Option<DressedFrame> = None;
    biases
        .iter()
        .map(|&b| {
            let row = evaluate_point(cfg, bath, b, previous.as_ref());
            previous = row.renorm.map(|s| s.frame);
            row
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// One row per grid point, in bias order. Per-point failures are recorded
/// in the rows; only an invalid config is an error.
pub fn run_sweep_with(cfg: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let bath = cfg.bath()?;
    let grid = cfg.bias_grid();
    let chunks: Vec<&[f64]> = grid.chunks(SEGMENT).collect();
    let parts: Vec<Vec<SweepRow>> = match exec {
        Execution::Serial => chunks.iter().map(|c| run_segment(cfg, &bath, c)).collect(),
        Execution::Parallel => chunks
            .par_iter()
            .map(|c| run_segment(cfg, &bath, c))
            .collect(),
    };
    Ok(parts.into_iter().flatten().collect())
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    run_sweep_with(cfg, Execution::Parallel)
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Config {
        key: "output".into(),
        reason: e.to_string(),
    }
}

/// `# key = value` lines echoing the resolved config.
pub fn config_header(cfg: &SweepConfig) -> String {
    let mut s = String::from("# dqd-steady sweep\n");
    for (k, v) in cfg.pairs() {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}

/// Writes the rows as CSV behind a comment block with the resolved config.
pub fn write_sweep_csv<W: Write>(cfg: &SweepConfig, rows: &[SweepRow], mut out: W) -> Result<()> {
    out.write_all(config_header(cfg).as_bytes())
        .map_err(io_error)?;
    let modes: Vec<Mode> = Mode::SINGLE
        .into_iter()
        .filter(|m| cfg.mode.includes(*m))
        .collect();
    let mut header = vec![
        "bias".to_string(),
        "bare_detuning".into(),
        "bare_rabi".into(),
        "detuning".into(),
        "rabi".into(),
        "rabi_prime".into(),
    ];
    for m in &modes {
        header.push(format!("m_{}", m.name().replace('-', "_")));
    }
    header.extend(
        [
            "renorm_residual",
            "renorm_iterations",
            "consistency_gap",
            "alternate_roots",
            "kernel_dimension",
            "conditioning",
            "system_residual",
            "hermiticity_defect",
            "ill_conditioned",
            "valid",
            "note",
        ]
        .map(String::from),
    );
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(io_error)?;
    for r in rows {
        let frame = r.renorm.map(|s| s.frame);
        let mut rec = vec![
            num(r.bias),
            num(r.bare_detuning),
            // Rabi frequencies carry the drive phase internally; the table
            // reports magnitudes.
            num(r.bare_rabi.abs()),
            opt(frame.map(|f| f.detuning)),
            opt(frame.map(|f| f.rabi.abs())),
            opt(frame.map(|f| f.rabi_prime)),
        ];
        for m in &modes {
            rec.push(opt(r.observable(*m)));
        }
        let diag = r.full_diagnostics.or(r.bare_diagnostics);
        rec.push(opt(r.renorm.map(|s| s.residual_norm)));
        rec.push(
            r.renorm
                .map(|s| s.iterations.to_string())
                .unwrap_or_default(),
        );
        rec.push(opt(r.renorm.map(|s| s.consistency_gap)));
        rec.push(r.alternate_roots.to_string());
        rec.push(
            diag.map(|d| d.kernel_dimension.to_string())
                .unwrap_or_default(),
        );
        rec.push(opt(diag.map(|d| d.conditioning)));
        rec.push(opt(diag.map(|d| d.relative_residual)));
        rec.push(opt(diag.map(|d| d.hermiticity_defect)));
        rec.push(
            diag.map(|d| d.ill_conditioned.to_string())
                .unwrap_or_default(),
        );
        rec.push(r.valid.to_string());
        rec.push(r.note.clone());
        w.write_record(&rec).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub omega: f64,
    pub density: f64,
    /// `None` when the principal-value quadrature failed.
    pub hilbert: Option<f64>,
    pub note: String,
}

/// `(ω, J(ω), F(ω))` on `points` evenly spaced frequencies.
pub fn emit_spectrum(
    bath: &dyn Spectrum,
    omega_min: f64,
    omega_max: f64,
    points: usize,
) -> Result<Vec<SpectrumRow>> {
    if points < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least 2".into(),
        });
    }
    if !(omega_min < omega_max) {
        return Err(Error::InvalidParameter {
            name: "omega_min",
            reason: "must be below omega_max".into(),
        });
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| omega_min + (omega_max - omega_min) * i as f64 / (points - 1) as f64)
        .collect();
    Ok(grid
        .par_iter()
        .map(|&w| match bath.hilbert(w) {
            Ok(f) => SpectrumRow {
                omega: w,
                density: bath.density(w),
                hilbert: Some(f),
                note: String::new(),
            },
            Err(e) => SpectrumRow {
                omega: w,
                density: bath.density(w),
                hilbert: None,
                note: e.to_string(),
            },
        })
        .collect())
}

pub fn write_spectrum_csv<W: Write>(
    bath: &BathSpectrum,
    rows: &[SpectrumRow],
    mut out: W,
) -> Result<()> {
    let head = format!(
        "# dqd-steady spectrum\n# coupling = {:e}\n# d-star = {:e}\n# omega-c = {:e}\n# quad-tol = {:e}\n",
        bath.coupling(),
        bath.separation(),
        bath.cutoff(),
        bath.quadrature_tolerance()
    );
    out.write_all(head.as_bytes()).map_err(io_error)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "J", "F", "note"])
        .map_err(io_error)?;
    for r in rows {
        w.write_record([num(r.omega), num(r.density), opt(r.hilbert), r.note.clone()])
            .map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

/// Pole-ansatz and time-domain values at a single bias.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleComparison {
    pub bias: f64,
    pub frame: DressedFrame,
    pub poles: f64,
    pub oracle: OracleEstimate,
    /// `|C(τ_max)| / |C(dt)|` for the trajectory settings used.
    pub kernel_tail_ratio: f64,
}

impl OracleComparison {
    pub fn difference(&self) -> f64 {
        (self.poles - self.oracle.value).abs()
    }
}

/// Runs the full-mode solve at `bias` and integrates the time-domain
/// master equation in the same renormalized frame.
pub fn compare_with_oracle(
    cfg: &SweepConfig,
    bias: f64,
    trajectory: &TrajectoryConfig,
) -> Result<OracleComparison> {
    let full = SweepConfig {
        mode: Mode::Full,
        ..cfg.clone()
    };
    let bath = cfg.bath()?;
    let params = cfg.params(bias)?;
    let row = evaluate_point(&full, &bath, bias, None);
    let (Some(solution), Some(poles)) = (row.renorm, row.full) else {
        return Err(Error::Config {
            key: "bias".into(),
            reason: format!("full-mode solve failed at {bias}: {}", row.note),
        });
    };
    let kernel_tail_ratio = trajectory.kernel_tail_ratio(&bath)?;
    let oracle = converged_population(&params, &solution.frame, &bath, trajectory)?;
    Ok(OracleComparison {
        bias,
        frame: solution.frame,
        poles,
        oracle,
        kernel_tail_ratio,
    })
}

/// Outcome of one invariant check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

/// Runs the sweep in `cfg` (all modes) and checks solver invariants on
/// every row, plus exact saturation of the Markov mode at zero detuning.
pub fn check_invariants(cfg: &SweepConfig) -> Result<Vec<CheckOutcome>> {
    let all = SweepConfig {
        mode: Mode::All,
        ..cfg.clone()
    };
    let rows = run_sweep(&all)?;
    let mut out = Vec::new();

    let invalid: Vec<f64> = rows.iter().filter(|r| !r.valid).map(|r| r.bias).collect();
    out.push(outcome(
        "all points valid",
        invalid.is_empty(),
        format!("{} of {} invalid {:?}", invalid.len(), rows.len(), invalid),
    ));

    let diags: Vec<SolveDiagnostics> = rows
        .iter()
        .flat_map(|r| [r.full_diagnostics, r.bare_diagnostics])
        .flatten()
        .collect();
    let worst = |f: fn(&SolveDiagnostics) -> f64| diags.iter().map(f).fold(0.0, f64::max);
    let t = worst(|d| d.dynamical_trace);
    out.push(outcome(
        "Tr ρ_{±Ω′} ≤ 1e-10",
        t <= 1e-10,
        format!("max {t:e}"),
    ));
    let h = worst(|d| d.hermiticity_defect);
    out.push(outcome(
        "Hermiticity closure ≤ 1e-8",
        h <= 1e-8,
        format!("max {h:e}"),
    ));
    let r = worst(|d| d.relative_residual);
    out.push(outcome(
        "relative residual ≤ 1e-8",
        r <= 1e-8,
        format!("max {r:e}"),
    ));
    let bad_kernel = diags.iter().filter(|d| d.kernel_dimension != 1).count();
    out.push(outcome(
        "kernel dimension 1",
        bad_kernel == 0,
        format!("{bad_kernel} solves differ"),
    ));

    let mut worst_res = 0.0f64;
    let mut worst_gap = 0.0f64;
    for row in &rows {
        if let Some(s) = row.renorm {
            worst_res = worst_res.max(s.residual_norm);
            let scale = row.bare_detuning.hypot(row.bare_rabi).max(1.0);
            worst_gap = worst_gap.max(s.consistency_gap / scale);
        }
    }
    out.push(outcome(
        "renormalization residual ≤ tol",
        worst_res <= cfg.tol,
        format!("max {worst_res:e}"),
    ));
    out.push(outcome(
        "h = f consistency ≤ 1e-8",
        worst_gap <= 1e-8,
        format!("max scaled gap {worst_gap:e}"),
    ));

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &rows {
        for m in Mode::SINGLE {
            if let Some(v) = row.observable(m) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    out.push(outcome(
        "0 ≤ ⟨M⟩₀ ≤ 1",
        lo >= -1e-6 && hi <= 1.0 + 1e-6,
        format!("range [{lo:.6}, {hi:.6}]"),
    ));

    let bath = cfg.bath()?;
    let resonance = (1.0 - cfg.tunneling * cfg.tunneling).sqrt();
    let sat = cfg
        .params(resonance)
        .map(|p| bare_frame(&p))
        .and_then(|bare| {
            let frame = bare_scaled_frame(&bare, &bath)?;
            markov_observable(&bare, &frame, &bath)
        });
    match sat {
        Ok(m) => out.push(outcome(
            "Markov saturation at zero detuning",
            (m - 0.5).abs() <= 1e-10,
            format!("⟨M⟩₀ = {m:.12}"),
        )),
        Err(e) => out.push(outcome(
            "Markov saturation at zero detuning",
            false,
            e.to_string(),
        )),
    }
    Ok(out)
}
