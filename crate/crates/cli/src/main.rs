//! `triphoton`: simulate a pulsed three-photon cascade, detect it with
//! configurable arms, and analyze time-tag streams with second- and
//! third-order correlations.
//!
//! Every subcommand reads the same TOML run configuration (built-in
//! defaults when none is given) and derives all randomness from one
//! master seed, so identical invocations produce identical files.
//!
//! Exit codes: 0 success, 2 configuration or parameter problem,
//! 3 malformed input file, 4 inconsistent data, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use triphoton::correlator::TagFormat;
use triphoton::{Error, Result};

#[derive(Parser)]
#[command(
    name = "triphoton",
    version,
    about = "Three-photon cascade simulator and time-tag correlator"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for simulation and correlation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the pulsed cascade and write the detected tag stream.
    Simulate {
        /// Excitation cycles, overriding the configured count.
        #[arg(long)]
        cycles: Option<u64>,
        /// Output tag file; `.csv` selects text, anything else binary.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Force the output format regardless of the file extension.
        #[arg(long, value_enum)]
        format: Option<FileFormat>,
    },
    /// Histogram g2 (two channels) or g3 (three channels) from a tag file.
    Correlate {
        /// Input tag file, binary or CSV.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Channels to correlate, e.g. `1,2` or `0,1,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        channels: Vec<u8>,
        /// Half window in picoseconds, overriding the configuration.
        #[arg(long)]
        window_ps: Option<i64>,
        /// Bin width in picoseconds, overriding the configuration.
        #[arg(long)]
        bin_ps: Option<i64>,
        /// Re-run with the brute-force kernel and require identical counts.
        #[arg(long)]
        oracle: bool,
        /// Force the input format regardless of the file extension.
        #[arg(long, value_enum)]
        format: Option<FileFormat>,
        /// Directory for the histogram CSV files.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Event clustering window for the three-channel coincidence
        /// summary, overriding the configuration.
        #[arg(long)]
        event_window_ps: Option<u64>,
    },
    /// Render the fine-structure emission spectrum.
    Spectrum {
        /// CSV output: `energy_mev` plus one column per polarization.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// SVG plot of the same curves.
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolarizationArg::Both)]
        polarization: PolarizationArg,
    },
    /// Simulate a pulse-power sweep and fit the damped oscillation.
    Rabi {
        /// Sweep grid `min:max:count` in microwatts, overriding the
        /// configuration.
        #[arg(long)]
        powers: Option<String>,
        /// Cycles sampled per point (0 = noiseless model values).
        #[arg(long)]
        cycles_per_point: Option<u64>,
        /// CSV output: power, measured intensity, error, fitted model.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// One-shot pipeline: simulate, correlate, and summarize into a directory.
    Report {
        /// Excitation cycles, overriding the configured count.
        #[arg(long)]
        cycles: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FileFormat {
    Bin,
    Csv,
}

impl FileFormat {
    fn as_tag_format(self) -> TagFormat {
        match self {
            FileFormat::Bin => TagFormat::Binary,
            FileFormat::Csv => TagFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolarizationArg {
    H,
    V,
    Both,
}

/// Output format: an explicit flag wins, otherwise the file extension.
fn resolve_format(path: &std::path::Path, flag: Option<FileFormat>) -> TagFormat {
    match flag {
        Some(f) => f.as_tag_format(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => TagFormat::Csv,
            _ => TagFormat::Binary,
        },
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::config(format!("cannot size the worker pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Simulate {
            cycles,
            out,
            format,
        } => {
            let format = resolve_format(&out, format);
            commands::simulate(&config, cycles, &out, format)
        }
        Command::Correlate {
            input,
            channels,
            window_ps,
            bin_ps,
            oracle,
            format,
            out_dir,
            event_window_ps,
        } => {
            let format = resolve_format(&input, format);
            commands::correlate(
                &config,
                &commands::CorrelateArgs {
                    input,
                    channels,
                    window_ps,
                    bin_ps,
                    oracle,
                    format,
                    out_dir,
                    event_window_ps,
                },
            )
        }
        Command::Spectrum {
            out,
            svg,
            polarization,
        } => commands::spectrum(&config, out.as_deref(), svg.as_deref(), polarization),
        Command::Rabi {
            powers,
            cycles_per_point,
            out,
        } => commands::rabi(&config, powers.as_deref(), cycles_per_point, out.as_deref()),
        Command::Report { cycles, out_dir } => commands::report(&config, cycles, &out_dir),
    }
}

fn main() -> ExitCode {
    // Die quietly when stdout is closed early (`triphoton spectrum | head`)
    // instead of panicking on the broken pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Config(_) | Error::Parameter(_) => 2,
                Error::Format { .. } => 3,
                Error::Data { .. } | Error::Normalization(_) => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
