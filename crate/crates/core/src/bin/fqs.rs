use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fqs::commands::{self, Analysis, Representation};
use fqs::config::{CutoffSection, GuidanceSection, RunConfig, SamplerSection};
use fqs::{CutoffStrategy, ScheduleKind, Target};

#[derive(Parser)]
#[command(name = "fqs", version, about = "Frequency-band scaling of classifier-free guidance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Guidance flags shared by `scale` and `sample`; they override the config file.
#[derive(Args, Default)]
struct GuidanceFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named settings preset (e.g. generation, editing, depth-diode).
    #[arg(long)]
    preset: Option<String>,
    /// Cutoff ratio in [0, 1].
    #[arg(long)]
    r0: Option<f64>,
    /// Cutoff rule: spatial or energy.
    #[arg(long, value_parser = parse::<CutoffStrategy>)]
    strategy: Option<CutoffStrategy>,
    /// Low-band scale.
    #[arg(long)]
    l: Option<f64>,
    /// High-band scale for the constant schedule.
    #[arg(long)]
    h: Option<f64>,
    /// constant, linear-decay or linear-growth.
    #[arg(long, value_parser = parse::<ScheduleKind>)]
    schedule: Option<ScheduleKind>,
    /// Peak high-band scale for the linear schedules.
    #[arg(long)]
    h_max: Option<f64>,
    /// Guidance weight.
    #[arg(long)]
    omega: Option<f64>,
    /// What gets band-scaled: delta or epsilon.
    #[arg(long, value_parser = parse::<Target>)]
    target: Option<Target>,
}

impl GuidanceFlags {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            preset: self.preset.clone(),
            guidance: GuidanceSection {
                omega: self.omega,
                target: self.target,
                l: self.l,
                h: self.h,
                schedule: self.schedule,
                h_max: self.h_max,
                steps: None,
            },
            cutoff: CutoffSection {
                strategy: self.strategy,
                r0: self.r0,
            },
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split a tensor into low- and high-frequency bands.
    Decompose {
        /// FQS1 tensor file.
        input: PathBuf,
        /// Cutoff ratio in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        r0: f64,
        /// Cutoff rule: spatial or energy.
        #[arg(long, value_parser = parse::<CutoffStrategy>, default_value = "spatial")]
        strategy: CutoffStrategy,
        /// Where to write the low band.
        #[arg(long)]
        out_low: PathBuf,
        /// Where to write the high band.
        #[arg(long)]
        out_high: PathBuf,
    },
    /// Apply band-scaled guidance to a recorded trajectory.
    Scale {
        /// FQS1 trajectory file.
        trajectory: PathBuf,
        #[command(flatten)]
        flags: GuidanceFlags,
        /// Where to write the guided predictions.
        #[arg(long)]
        out: PathBuf,
        /// Also write the scaled difference terms here.
        #[arg(long)]
        delta_out: Option<PathBuf>,
    },
    /// Sample the analytic mixture with band-scaled guidance.
    Sample {
        #[command(flatten)]
        flags: GuidanceFlags,
        /// First seed of the batch.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds to run.
        #[arg(long)]
        batch: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export spectral diagnostics of a trajectory as CSV.
    Analyze {
        /// FQS1 trajectory file.
        trajectory: PathBuf,
        /// spectra, energy or timeavg.
        #[arg(long, value_parser = parse::<Analysis>)]
        which: Analysis,
        /// x, eps or delta.
        #[arg(long = "repr", value_parser = parse::<Representation>, default_value = "delta")]
        representation: Representation,
        /// Comma-separated energy thresholds whose per-step radii are printed.
        #[arg(long, value_delimiter = ',')]
        r0_sweep: Vec<f64>,
        /// CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a radial low-pass mask and print its bin counts.
    Mask {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        /// Explicit radius in frequency bins.
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<f64>,
        /// Cutoff ratio, used with --strategy spatial instead of --radius.
        #[arg(long)]
        r0: Option<f64>,
        /// Only spatial is meaningful without a spectrum.
        #[arg(long, value_parser = parse::<CutoffStrategy>)]
        strategy: Option<CutoffStrategy>,
        /// Mask tensor destination (1 for low bins, 0 for high).
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse<T: std::str::FromStr<Err = fqs::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: fqs::Error| e.to_string())
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("FQS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("FQS_THREADS={value:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(commands::EXIT_INPUT as u8);
    }
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Decompose {
            input,
            r0,
            strategy,
            out_low,
            out_high,
        } => commands::cmd_decompose(
            &commands::DecomposeArgs {
                input,
                r0,
                strategy,
                out_low,
                out_high,
            },
            &mut stdout,
        ),
        Command::Scale {
            trajectory,
            flags,
            out,
            delta_out,
        } => commands::cmd_scale(
            &commands::ScaleArgs {
                trajectory,
                config: flags.config.clone(),
                flags: flags.overrides(),
                out,
                delta_out,
            },
            &mut stdout,
        ),
        Command::Sample {
            flags,
            seed,
            batch,
            out,
        } => {
            let mut overrides = flags.overrides();
            overrides.sampler = SamplerSection {
                seed,
                batch,
                ..Default::default()
            };
            commands::cmd_sample(
                &commands::SampleArgs {
                    config: flags.config.clone(),
                    flags: overrides,
                    out_dir: out,
                },
                &mut stdout,
            )
        }
        Command::Analyze {
            trajectory,
            which,
            representation,
            r0_sweep,
            out,
        } => commands::cmd_analyze(
            &commands::AnalyzeArgs {
                trajectory,
                which,
                representation,
                out,
                r0_sweep,
            },
            &mut stdout,
        ),
        Command::Mask {
            height,
            width,
            radius,
            r0,
            strategy,
            out,
        } => commands::cmd_mask(
            &commands::MaskArgs {
                height,
                width,
                radius,
                r0,
                strategy,
                out,
            },
            &mut stdout,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(commands::exit_code(&err) as u8)
        }
    }
}
