//! Command-line front end.
//!
//! Every command resolves a configuration (file, then flags), writes a
//! `manifest` into the output directory and runs a [`Job`]. `replay` re-runs a
//! manifest and reproduces the same CSV outputs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{digital_debug, replay, run_job, Job, Manifest, Report, MANIFEST};
pub use config::{ChannelSection, DataKind, DataSection, ExperimentConfig, ModelSection, Overrides, Profile, Resolved};

use crate::channel::{QuantizerSpec, TransmissionMode};
use crate::error::Error;
use crate::evalkit::{Axis, Method};

#[derive(Debug, Parser)]
#[command(name = "semedge", version, about = "Transferable multi-device semantic edge inference")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. They override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Step-1 adaptation weight.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub finetune_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// SNR (dB) of the source deployment.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub source_snr: Option<f64>,
    /// SNR (dB) of the target deployment.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub target_snr: Option<f64>,
    #[arg(long, global = true)]
    pub cr: Option<f64>,
    /// analog or digital.
    #[arg(long, global = true)]
    pub mode: Option<TransmissionMode>,
    /// Quantization bits (digital mode).
    #[arg(long, global = true)]
    pub q_b: Option<u32>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output: self.output.clone(),
            lambda: self.lambda,
            epochs: self.epochs,
            finetune_epochs: self.finetune_epochs,
            batch_size: self.batch_size,
            source_snr: self.source_snr,
            target_snr: self.target_snr,
            cr: self.cr,
            mode: self.mode,
            q_b: self.q_b,
        }
    }

    /// Config file (or defaults) with the flags applied.
    pub fn experiment(&self) -> crate::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&self.overrides());
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic transfer task and store it as an archive.
    Synth,
    /// Step 1: class-weighted adaptation at the source SNR.
    TrainUda,
    /// Step 2: distil a step-1 checkpoint to the target SNR.
    FinetuneKd {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Target accuracy of one method at the target SNR.
    Eval {
        #[arg(long, default_value = "dasein")]
        method: Method,
        /// Evaluate this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Accuracy over an SNR or CR grid for several methods and seeds.
    Sweep {
        #[arg(long)]
        axis: Axis,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, value_delimiter = ',', default_value = "dasein,dasein-s1,test-d")]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Suffix of the output files; defaults to the axis name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Trace values through quantizer, bits, QPSK, channel and DAC.
    DigitalDebug {
        #[arg(long, default_value_t = 2)]
        qb: u32,
        #[arg(long = "value", alias = "values", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Channel SNR (dB); noiseless when omitted.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 3)]
        r: u32,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        z_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        z_max: f64,
    },
    /// Re-run the job recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Format { .. } | Error::Empty(_) => 3,
        Error::NonFinite(_) => 4,
        _ => 1,
    }
}

/// Executes a parsed command line and returns the lines to print.
pub fn execute(cli: &Cli) -> crate::Result<Report> {
    let g = &cli.global;
    let job = match &cli.command {
        Command::Synth => Job::Synth,
        Command::TrainUda => Job::TrainUda,
        Command::FinetuneKd { checkpoint } => Job::FinetuneKd {
            checkpoint: checkpoint.clone(),
        },
        Command::Eval { method, checkpoint } => Job::Eval {
            method: *method,
            checkpoint: checkpoint.clone(),
        },
        Command::Sweep {
            axis,
            from,
            to,
            step,
            methods,
            seeds,
            jobs,
            name,
        } => Job::Sweep {
            axis: *axis,
            from: *from,
            to: *to,
            step: *step,
            methods: methods.clone(),
            seeds: seeds.clone(),
            jobs: *jobs,
            name: name.clone().unwrap_or_else(|| match axis {
                Axis::Snr => "snr".into(),
                Axis::Cr => "cr".into(),
            }),
        },
        Command::DigitalDebug {
            qb,
            values,
            snr,
            r,
            z_min,
            z_max,
        } => {
            let spec = QuantizerSpec {
                q_b: *qb,
                z_min: *z_min,
                z_max: *z_max,
                r: *r,
            };
            let table = digital_debug(values, &spec, *snr, g.seed.unwrap_or(1))?;
            return Ok(table.lines().map(str::to_string).collect());
        }
        Command::Replay { manifest } => return replay(manifest, g.output.clone()),
    };
    let config = g.experiment()?;
    run_job(&config, &job)
}

/// Entry point of the `semedge` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn parser_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_override_config() {
        let cli = Cli::try_parse_from(["semedge", "train-uda", "--lambda", "0", "--target-snr", "-15", "--epochs", "3"]).unwrap();
        let c = cli.global.experiment().unwrap();
        assert_eq!(c.train.weights.lambda, 0.0);
        assert_eq!(c.channel.target_snr_db, -15.0);
        assert_eq!(c.train.epochs, 3);
    }

    #[test]
    fn sweep_arguments_parse() {
        let cli = Cli::try_parse_from([
            "semedge", "sweep", "--axis", "snr", "--from", "-20", "--to", "5", "--step", "5", "--methods", "dasein,test-d",
            "--jobs", "4",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep { from, methods, jobs, .. } => {
                assert_eq!(from, -20.0);
                assert_eq!(methods, vec![Method::Dasein, Method::TestD]);
                assert_eq!(jobs, 4);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Data("x".into())), 3);
        assert_eq!(exit_code(&Error::NonFinite("x".into())), 4);
        assert_eq!(exit_code(&Error::Dimension("x".into())), 1);
    }

    #[test]
    fn digital_debug_noiseless_round_trip() {
        let spec = QuantizerSpec {
            q_b: 2,
            z_min: -1.0,
            z_max: 1.0,
            r: 3,
        };
        let table = digital_debug(&[-1.0, 0.2, 1.0], &spec, None, 1).unwrap();
        let rows: Vec<&str> = table.lines().skip(1).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].contains(" 00 ") && rows[0].trim_end().ends_with("-1.0000"));
        assert!(rows[2].contains(" 11 ") && rows[2].trim_end().ends_with("1.0000"));
    }
}
