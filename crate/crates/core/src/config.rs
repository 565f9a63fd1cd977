//! Sweep configuration: flat `key = value` files with `#` comments, keys
//! matching the command-line flags. Flags override file values.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::DqdParams;
use crate::spectral::BathSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Dynamical poles with the self-consistent frame.
    Full,
    /// Dynamical poles with the bare detuning and polaron-scaled Rabi
    /// frequency.
    BareDynamical,
    /// Stationary pole only, same frame as `BareDynamical`.
    Markov,
    /// Undriven ground state.
    NoDrive,
    All,
}

impl Mode {
    pub const SINGLE: [Mode; 4] = [Mode::Full, Mode::BareDynamical, Mode::Markov, Mode::NoDrive];

    pub fn includes(self, other: Mode) -> bool {
        self == other || self == Mode::All
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::BareDynamical => "bare-dynamical",
            Mode::Markov => "markov",
            Mode::NoDrive => "no-drive",
            Mode::All => "all",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Mode::Full,
            Mode::BareDynamical,
            Mode::Markov,
            Mode::NoDrive,
            Mode::All,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Config {
            key: "mode".into(),
            reason: format!("`{s}` is not one of full, bare-dynamical, markov, no-drive, all"),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub tunneling: f64,
    pub drive_angle: f64,
    pub drive_amplitude: f64,
    pub coupling: f64,
    pub separation: f64,
    pub cutoff: f64,
    pub bias_min: f64,
    pub bias_max: f64,
    pub steps: usize,
    pub mode: Mode,
    /// Renormalization residual target.
    pub tol: f64,
    pub quad_tol: f64,
    pub output: Option<PathBuf>,
    /// Keep `h_ν − f_ν` in the residue equations for the bare-frame modes.
    pub retain_mismatch: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tunneling: 0.3,
            drive_angle: FRAC_PI_2,
            drive_amplitude: 0.2,
            coupling: 0.2,
            separation: 20.0,
            cutoff: 2.0,
            bias_min: 0.7,
            bias_max: 1.2,
            steps: 400,
            mode: Mode::Full,
            tol: 1e-10,
            quad_tol: 1e-9,
            output: None,
            retain_mismatch: false,
        }
    }
}

/// Every accepted key, in the order used when echoing a config.
pub const KEYS: [&str; 14] = [
    "delta",
    "delta-angle",
    "drive",
    "coupling",
    "d-star",
    "omega-c",
    "bias-min",
    "bias-max",
    "steps",
    "mode",
    "tol",
    "quad-tol",
    "output",
    "retain-mismatch",
];

fn number(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| Error::Config {
        key: key.into(),
        reason: format!("`{value}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Config {
            key: key.into(),
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

fn range_error(key: &str, accepted: &str, got: impl fmt::Display) -> Error {
    Error::Config {
        key: key.into(),
        reason: format!("{got} outside accepted range {accepted}"),
    }
}

impl SweepConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "delta" => self.tunneling = number(key, value)?,
            "delta-angle" => self.drive_angle = number(key, value)?,
            "drive" => self.drive_amplitude = number(key, value)?,
            "coupling" => self.coupling = number(key, value)?,
            "d-star" => self.separation = number(key, value)?,
            "omega-c" => self.cutoff = number(key, value)?,
            "bias-min" => self.bias_min = number(key, value)?,
            "bias-max" => self.bias_max = number(key, value)?,
            "steps" => {
                self.steps = value.parse().map_err(|_| Error::Config {
                    key: key.into(),
                    reason: format!("`{value}` is not a non-negative integer"),
                })?
            }
            "mode" => self.mode = value.parse()?,
            "tol" => self.tol = number(key, value)?,
            "quad-tol" => self.quad_tol = number(key, value)?,
            "output" => {
                self.output = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "retain-mismatch" => {
                self.retain_mismatch = value.parse().map_err(|_| Error::Config {
                    key: key.into(),
                    reason: format!("`{value}` is not true or false"),
                })?
            }
            _ => {
                return Err(Error::Config {
                    key: key.into(),
                    reason: format!("unknown key; accepted keys are {}", KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tunneling > 0.0) {
            return Err(range_error("delta", "(0, ∞)", self.tunneling));
        }
        if !(self.drive_amplitude >= 0.0) {
            return Err(range_error("drive", "[0, ∞)", self.drive_amplitude));
        }
        if !(self.coupling >= 0.0) {
            return Err(range_error("coupling", "[0, ∞)", self.coupling));
        }
        if !(self.separation > 0.0) {
            return Err(range_error("d-star", "(0, ∞)", self.separation));
        }
        if !(self.cutoff > 0.0) {
            return Err(range_error("omega-c", "(0, ∞)", self.cutoff));
        }
        if self.steps < 2 {
            return Err(range_error("steps", "[2, ∞)", self.steps));
        }
        if !(self.bias_min < self.bias_max) {
            return Err(Error::Config {
                key: "bias-min".into(),
                reason: format!(
                    "bias-min ({}) must be below bias-max ({})",
                    self.bias_min, self.bias_max
                ),
            });
        }
        if !(self.tol > 0.0) {
            return Err(range_error("tol", "(0, ∞)", self.tol));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return Err(range_error("quad-tol", "(0, 1)", self.quad_tol));
        }
        Ok(())
    }

    /// Evenly spaced, strictly increasing bias grid.
    pub fn bias_grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.bias_max
                } else {
                    self.bias_min + (self.bias_max - self.bias_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn bath(&self) -> Result<BathSpectrum> {
        BathSpectrum::with_tolerance(self.coupling, self.separation, self.cutoff, self.quad_tol)
    }

    pub fn params(&self, bias: f64) -> Result<DqdParams> {
        DqdParams::new(bias, self.tunneling, self.drive_angle, self.drive_amplitude)
    }

    /// `(key, value)` for every key, values formatted to round-trip.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("delta", format!("{:e}", self.tunneling)),
            ("delta-angle", format!("{:e}", self.drive_angle)),
            ("drive", format!("{:e}", self.drive_amplitude)),
            ("coupling", format!("{:e}", self.coupling)),
            ("d-star", format!("{:e}", self.separation)),
            ("omega-c", format!("{:e}", self.cutoff)),
            ("bias-min", format!("{:e}", self.bias_min)),
            ("bias-max", format!("{:e}", self.bias_max)),
            ("steps", self.steps.to_string()),
            ("mode", self.mode.to_string()),
            ("tol", format!("{:e}", self.tol)),
            ("quad-tol", format!("{:e}", self.quad_tol)),
            (
                "output",
                self.output
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("retain-mismatch", self.retain_mismatch.to_string()),
        ]
    }

    /// The resolved config in file syntax.
    pub fn to_file_text(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses config-file text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            key: line.into(),
            reason: format!("line {}: expected `key = value`", lineno + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Defaults, then `file` contents, then `flags`, then validation.
pub fn parse_config(flags: &[(String, String)], file: Option<&str>) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::default();
    if let Some(text) = file {
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
    }
    for (k, v) in flags {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
