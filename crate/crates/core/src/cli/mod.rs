//! `jpa-sim <command> --config <path> [overrides]`.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 data, 4 convergence.

mod commands;
pub mod config;
#[cfg(test)]
mod tests;

pub use commands::{
    cmd_bifurcation, cmd_calibrate, cmd_compression, cmd_fit, cmd_freqmap, cmd_gain, cmd_noise,
    cmd_s11, cmd_synth, cmd_tune, Outcome, Overrides,
};
pub use config::RunConfig;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::dynamics::Direction;
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "JPA_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "jpa-sim",
    version,
    about = "Kerr-resonator parametric amplifier simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct PumpArgs {
    /// Gate voltage; takes the resonator from the device model.
    #[arg(long, allow_negative_numbers = true)]
    pub gate: Option<f64>,
    #[arg(long)]
    pub pump_freq: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonance frequency against gate voltage.
    Freqmap {
        #[command(flatten)]
        common: Common,
    },
    /// Reflection traces at several drive powers.
    S11 {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        gate: Option<f64>,
        /// Drive power in dBm; repeat for several traces.
        #[arg(long = "power", allow_negative_numbers = true)]
        powers: Vec<f64>,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Signal and idler gain around the pump.
    Gain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pump: PumpArgs,
    },
    /// Bistability onset and fold powers.
    Bifurcation {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        gate: Option<f64>,
    },
    /// Gain against signal power.
    Compression {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pump: PumpArgs,
        #[arg(long, allow_negative_numbers = true)]
        signal_offset: Option<f64>,
    },
    /// Added-noise spectrum and two-stage budget.
    Noise {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pump: PumpArgs,
        #[arg(long)]
        hemt_quanta: Option<f64>,
    },
    /// Shot-noise junction calibration fit.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        psd_table: Option<PathBuf>,
    },
    /// Fit resonator parameters to a reflection dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Generate a noisy synthetic reflection dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        gate: Option<f64>,
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Gate and pump settings for a target frequency and gain.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        target_freq: Option<f64>,
        #[arg(long)]
        target_gain: Option<f64>,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::NotFound(_)
        | Error::Conditioning(_) => EXIT_DATA,
        Error::Convergence { .. }
        | Error::GainUnreachable { .. }
        | Error::NoBifurcation(_)
        | Error::Unavailable(_) => EXIT_CONVERGENCE,
        Error::Domain(_)
        | Error::OutOfRange { .. }
        | Error::Infeasible(_)
        | Error::Arity { .. }
        | Error::Precondition(_)
        | Error::InvalidParams(_)
        | Error::Config(_) => EXIT_USAGE,
    }
}

fn configure_threads(requested: Option<usize>) {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| match v.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                warn!("ignoring {THREADS_ENV}={v}: expected a positive integer");
                None
            }
        });
    let n = match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    };
    if let Some(n) = n {
        // a pool may already exist when running in-process more than once
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            warn!("worker pool already initialised; thread setting ignored");
        }
    }
}

fn prepare(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    if let Some(f) = common.format {
        cfg.output.format = match f {
            Format::Csv => config::OutputFormat::Csv,
            Format::Json => config::OutputFormat::Json,
        };
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    configure_threads(cfg.solver.threads);
    Ok(cfg)
}

fn direction(d: DirectionArg) -> Direction {
    match d {
        DirectionArg::Up => Direction::Up,
        DirectionArg::Down => Direction::Down,
    }
}

fn execute(cmd: Command) -> Result<Outcome, Error> {
    let pump = |p: &PumpArgs| Overrides {
        gate: p.gate,
        pump_frequency: p.pump_freq,
        fraction: p.fraction,
        ..Overrides::default()
    };
    match cmd {
        Command::Freqmap { common } => cmd_freqmap(&prepare(&common)?),
        Command::S11 {
            common,
            gate,
            powers,
            direction: d,
        } => cmd_s11(
            &prepare(&common)?,
            &Overrides {
                gate,
                powers_dbm: powers,
                direction: d.map(direction),
                ..Overrides::default()
            },
        ),
        Command::Gain { common, pump: p } => cmd_gain(&prepare(&common)?, &pump(&p)),
        Command::Bifurcation { common, gate } => cmd_bifurcation(
            &prepare(&common)?,
            &Overrides {
                gate,
                ..Overrides::default()
            },
        ),
        Command::Compression {
            common,
            pump: p,
            signal_offset,
        } => cmd_compression(
            &prepare(&common)?,
            &Overrides {
                signal_offset,
                ..pump(&p)
            },
        ),
        Command::Noise {
            common,
            pump: p,
            hemt_quanta,
        } => cmd_noise(
            &prepare(&common)?,
            &Overrides {
                hemt_quanta,
                ..pump(&p)
            },
        ),
        Command::Calibrate { common, psd_table } => cmd_calibrate(
            &prepare(&common)?,
            &Overrides {
                psd_table,
                ..Overrides::default()
            },
        ),
        Command::Fit { common, manifest } => cmd_fit(
            &prepare(&common)?,
            &Overrides {
                manifest,
                ..Overrides::default()
            },
        ),
        Command::Synth { common, gate, snr } => cmd_synth(
            &prepare(&common)?,
            &Overrides {
                gate,
                snr_db: snr,
                ..Overrides::default()
            },
        ),
        Command::Tune {
            common,
            target_freq,
            target_gain,
        } => cmd_tune(
            &prepare(&common)?,
            &Overrides {
                target_frequency: target_freq,
                target_gain,
                ..Overrides::default()
            },
        ),
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(outcome) => {
            for p in &outcome.written {
                println!("{}", p.display());
            }
            if outcome.converged {
                EXIT_OK
            } else {
                eprintln!("error: did not converge; best result written");
                EXIT_CONVERGENCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            info!("exit code {}", exit_code(&e));
            exit_code(&e)
        }
    }
}
