use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dqd_steady::config::{parse_config, SweepConfig};
use dqd_steady::oracle::{interaction_picture, propagate_tc2, InitialState, TrajectoryConfig};
use dqd_steady::sweep::{
    check_invariants, compare_with_oracle, emit_spectrum, run_sweep, write_spectrum_csv,
    write_sweep_csv,
};

#[derive(Parser)]
#[command(
    name = "dqd-steady",
    version,
    about = "Periodic steady states of a driven double dot in a phonon bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bias sweep, one CSV row per grid point.
    Sweep(Shared),
    /// Bath density J and its Hilbert transform F on a frequency grid.
    Spectrum {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        omega_min: f64,
        #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
        omega_max: f64,
        #[arg(long, default_value_t = 801)]
        points: usize,
    },
    /// Compare the pole solution with direct time integration at one bias.
    Oracle {
        #[command(flatten)]
        shared: Shared,
        /// Defaults to the bias of zero bare detuning.
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long, default_value_t = 3000.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 100.0)]
        kernel_window: f64,
        /// Start from the maximally mixed state instead of the dressed ground state.
        #[arg(long)]
        mixed_start: bool,
        /// Also write the coarse-step trajectory here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Run the solver invariant suite over the configured sweep.
    Check(Shared),
}

#[derive(Args, Clone, Default)]
struct Shared {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_angle: Option<f64>,
    #[arg(long)]
    drive: Option<f64>,
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    d_star: Option<f64>,
    #[arg(long)]
    omega_c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    bias_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    bias_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    quad_tol: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, hide = true)]
    retain_mismatch: bool,
}

impl Shared {
    fn resolve(&self) -> Result<SweepConfig, String> {
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        put("delta", self.delta.map(|x| x.to_string()));
        put("delta-angle", self.delta_angle.map(|x| x.to_string()));
        put("drive", self.drive.map(|x| x.to_string()));
        put("coupling", self.coupling.map(|x| x.to_string()));
        put("d-star", self.d_star.map(|x| x.to_string()));
        put("omega-c", self.omega_c.map(|x| x.to_string()));
        put("bias-min", self.bias_min.map(|x| x.to_string()));
        put("bias-max", self.bias_max.map(|x| x.to_string()));
        put("steps", self.steps.map(|x| x.to_string()));
        put("mode", self.mode.clone());
        put("tol", self.tol.map(|x| x.to_string()));
        put("quad-tol", self.quad_tol.map(|x| x.to_string()));
        put(
            "output",
            self.output.as_ref().map(|p| p.display().to_string()),
        );
        if self.retain_mismatch {
            put("retain-mismatch", Some("true".into()));
        }
        let text = match &self.config {
            Some(path) => Some(
                std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?,
            ),
            None => None,
        };
        parse_config(&flags, text.as_deref()).map_err(|e| e.to_string())
    }
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>, String> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Sweep(shared) => {
            let cfg = shared.resolve()?;
            let rows = run_sweep(&cfg).map_err(|e| e.to_string())?;
            let invalid = rows.iter().filter(|r| !r.valid).count();
            write_sweep_csv(&cfg, &rows, sink(cfg.output.as_ref())?).map_err(|e| e.to_string())?;
            if invalid > 0 {
                eprintln!("{invalid} of {} points flagged invalid", rows.len());
            }
            Ok(true)
        }
        Command::Spectrum {
            shared,
            omega_min,
            omega_max,
            points,
        } => {
            let cfg = shared.resolve()?;
            let bath = cfg.bath().map_err(|e| e.to_string())?;
            let rows =
                emit_spectrum(&bath, omega_min, omega_max, points).map_err(|e| e.to_string())?;
            write_spectrum_csv(&bath, &rows, sink(cfg.output.as_ref())?)
                .map_err(|e| e.to_string())?;
            Ok(true)
        }
        Command::Oracle {
            shared,
            bias,
            t_max,
            dt,
            kernel_window,
            mixed_start,
            trajectory,
            stride,
        } => {
            let cfg = shared.resolve()?;
            let bias = bias.unwrap_or_else(|| (1.0 - cfg.tunneling * cfg.tunneling).sqrt());
            let traj = TrajectoryConfig {
                t_max,
                dt,
                kernel_window,
                initial: if mixed_start {
                    InitialState::MaximallyMixed
                } else {
                    InitialState::DressedGround
                },
                ..Default::default()
            };
            let cmp = compare_with_oracle(&cfg, bias, &traj).map_err(|e| e.to_string())?;
            let mut out = sink(cfg.output.as_ref())?;
            let lines = [
                format!("bias            {:.12}", cmp.bias),
                format!("detuning        {:.12e}", cmp.frame.detuning),
                format!("rabi            {:.12e}", cmp.frame.rabi),
                format!("poles           {:.12}", cmp.poles),
                format!("oracle          {:.12}", cmp.oracle.value),
                format!("difference      {:.3e}", cmp.difference()),
                format!("step halving    {:.3e}", cmp.oracle.change),
                format!("kernel tail     {:.3e}", cmp.kernel_tail_ratio),
                format!("trace error     {:.3e}", cmp.oracle.max_trace_error),
            ];
            for l in lines {
                writeln!(out, "{l}").map_err(|e| e.to_string())?;
            }
            if let Some(path) = trajectory {
                let params = cfg.params(bias).map_err(|e| e.to_string())?;
                let bath = cfg.bath().map_err(|e| e.to_string())?;
                let dot = interaction_picture(&params, &cmp.frame).map_err(|e| e.to_string())?;
                let t =
                    propagate_tc2(&params, &cmp.frame, &bath, &traj).map_err(|e| e.to_string())?;
                t.write_csv(&dot.population, stride, sink(Some(&path))?)
                    .map_err(|e| e.to_string())?;
            }
            Ok(true)
        }
        Command::Check(shared) => {
            let cfg = shared.resolve()?;
            let outcomes = check_invariants(&cfg).map_err(|e| e.to_string())?;
            let mut out = sink(cfg.output.as_ref())?;
            let mut ok = true;
            for o in &outcomes {
                ok &= o.passed;
                let tag = if o.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag}  {:<36} {}", o.name, o.detail).map_err(|e| e.to_string())?;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
