//! Implementations behind the `fqs` binary's subcommands.
//!
//! Each command validates its inputs and computes every output before it
//! writes anything, so a failing command leaves no partial files. Human
//! readable reports go to the supplied writer.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::RunConfig;
use crate::container::{encode, read_tensor, read_trajectory, write_atomic, Container};
use crate::cutoff::{energy_radius, CutoffPolicy, CutoffStrategy};
use crate::diagnostics::{energy_curve, radial_profile, time_average, CsvTable};
use crate::error::{Error, Result};
use crate::guidance::{noise_difference, process_trajectory};
use crate::spectral::{build_radial_mask, decompose, fft2_centered};
use crate::tensor::{LatentTensor, Trajectory, TrajectoryRecord};
use crate::toy::sample_batch;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA_CONTRACT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::MissingBranch(_) => EXIT_DATA_CONTRACT,
        Error::ImaginaryResidue { .. } | Error::UndefinedReference | Error::ZeroSpectrum => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn report(out: &mut dyn Write, text: fmt::Arguments<'_>) -> Result<()> {
    match out.write_fmt(text) {
        // Output files are already written; a reader that stopped early is fine.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(|e| Error::io("<stdout>", e)),
    }
}

fn write_all(outputs: Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
    for (path, bytes) in outputs {
        write_atomic(&path, &bytes)?;
    }
    Ok(())
}

fn load_config(path: Option<&Path>, flags: RunConfig) -> Result<RunConfig> {
    let file = path.map(RunConfig::load).transpose()?;
    RunConfig::resolve(file, flags)
}

#[derive(Debug, Clone)]
pub struct DecomposeArgs {
    pub input: PathBuf,
    pub r0: f64,
    pub strategy: CutoffStrategy,
    pub out_low: PathBuf,
    pub out_high: PathBuf,
}

pub fn cmd_decompose(args: &DecomposeArgs, out: &mut dyn Write) -> Result<()> {
    let policy = CutoffPolicy::new(args.strategy, args.r0)?;
    let u = read_tensor(&args.input)?;
    let s = u.shape();
    let radius = policy.radius(&fft2_centered(&u));
    let mask = build_radial_mask(s.height, s.width, radius)?;
    let (low, high) = decompose(&u, &mask)?;
    write_all(vec![
        (args.out_low.clone(), encode(&low.into())?),
        (args.out_high.clone(), encode(&high.into())?),
    ])?;
    report(
        out,
        format_args!(
            "radius {radius} ({} r0 = {}), {} low / {} high bins\n",
            args.strategy,
            args.r0,
            mask.low_count(),
            mask.high_count()
        ),
    )
}

#[derive(Debug, Clone)]
pub struct ScaleArgs {
    pub trajectory: PathBuf,
    pub config: Option<PathBuf>,
    pub flags: RunConfig,
    pub out: PathBuf,
    /// Also write the scaled band tensors as a second trajectory.
    pub delta_out: Option<PathBuf>,
}

fn derived_trajectory(
    source: &Trajectory,
    tensors: Vec<LatentTensor>,
    content: &str,
    effective: &str,
    omega: f64,
) -> Result<Trajectory> {
    let records = source
        .records()
        .iter()
        .zip(tensors)
        .map(|(rec, t)| TrajectoryRecord {
            step_index: rec.step_index,
            timestep: rec.timestep,
            x_t: rec.x_t.clone(),
            eps_cond: Some(t),
            eps_uncond: None,
        })
        .collect();
    let mut metadata: BTreeMap<String, String> = source.metadata.clone();
    metadata.insert("content".into(), content.into());
    metadata.insert("config".into(), effective.into());
    metadata.insert("omega".into(), omega.to_string());
    Trajectory::new(records, metadata)
}

/// Rescales a recorded trajectory. The output trajectory carries the guided
/// prediction in its `eps_cond` slot (`content = "eps_hat"` in metadata).
pub fn cmd_scale(args: &ScaleArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.flags.clone())?;
    let traj = read_trajectory(&args.trajectory)?;
    let recorded_omega = match traj.metadata.get("omega") {
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| Error::BadMetadata(format!("omega = {v:?} is not a number")))?,
        ),
        None => None,
    };
    let guidance = cfg.guidance_config(traj.len(), recorded_omega)?;
    let steps = process_trajectory(&traj, &guidance)?;

    let effective = cfg.to_toml();
    let (eps_hat, deltas): (Vec<_>, Vec<_>) = steps
        .iter()
        .map(|s| (s.eps_hat.clone(), s.delta_scaled.clone()))
        .unzip();
    let mut outputs = vec![(
        args.out.clone(),
        encode(&derived_trajectory(&traj, eps_hat, "eps_hat", &effective, guidance.omega)?.into())?,
    )];
    if let Some(path) = &args.delta_out {
        let t = derived_trajectory(&traj, deltas, "delta_scaled", &effective, guidance.omega)?;
        outputs.push((path.clone(), encode(&t.into())?));
    }
    write_all(outputs)?;

    report(out, format_args!("step\ttimestep\tradius\tl\th\n"))?;
    for (rec, s) in traj.records().iter().zip(&steps) {
        report(
            out,
            format_args!(
                "{}\t{}\t{}\t{}\t{}\n",
                rec.step_index, rec.timestep, s.radius_used, s.scales.low, s.scales.high
            ),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SampleArgs {
    pub config: Option<PathBuf>,
    pub flags: RunConfig,
    pub out_dir: PathBuf,
}

pub fn sample_file_names(seed: u64) -> (String, String) {
    (format!("x0_seed{seed:05}.fqs"), format!("trajectory_seed{seed:05}.fqs"))
}

/// Runs the toy sampler for `batch` consecutive seeds starting at `seed`,
/// writing `x0_seedNNNNN.fqs` and `trajectory_seedNNNNN.fqs` per seed.
pub fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.flags.clone())?;
    let substeps = cfg.substeps();
    let guidance = cfg.guidance_config(substeps, Some(1.0))?;
    let schedule = cfg.noise_schedule()?;
    let gmm = cfg.mixture()?;
    let condition = cfg.condition();
    let first = cfg.sampler.seed.unwrap_or(0);
    let batch = cfg.sampler.batch.unwrap_or(1);
    if batch == 0 {
        return Err(Error::Config("batch must be at least 1".into()));
    }
    if !args.out_dir.is_dir() {
        return Err(Error::FileNotFound(args.out_dir.clone()));
    }
    let seeds: Vec<u64> = (0..batch as u64).map(|i| first + i).collect();
    let samples = sample_batch(&gmm, &schedule, &guidance, &condition, &seeds, substeps)?;

    let effective = cfg.to_toml();
    let mut outputs = Vec::with_capacity(2 * samples.len());
    for (seed, s) in seeds.iter().zip(samples) {
        let (x0_name, traj_name) = sample_file_names(*seed);
        let mut traj = s.trajectory;
        traj.metadata.insert("config".into(), effective.clone());
        outputs.push((args.out_dir.join(x0_name), encode(&Container::Tensor(s.x0))?));
        outputs.push((args.out_dir.join(traj_name), encode(&traj.into())?));
    }
    write_all(outputs)?;
    report(
        out,
        format_args!(
            "wrote {batch} sample(s), seeds {first}..={}, to {}\n",
            first + batch as u64 - 1,
            args.out_dir.display()
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Spectra,
    Energy,
    TimeAverage,
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectra" => Ok(Self::Spectra),
            "energy" => Ok(Self::Energy),
            "timeavg" => Ok(Self::TimeAverage),
            other => Err(Error::Config(format!(
                "unknown analysis {other:?} (expected spectra, energy or timeavg)"
            ))),
        }
    }
}

/// Which per-step sequence of a trajectory to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// The latents `x_t`.
    Latent,
    /// The conditional noise prediction.
    Eps,
    /// `eps_cond - eps_uncond`.
    Delta,
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Self::Latent),
            "eps" => Ok(Self::Eps),
            "delta" => Ok(Self::Delta),
            other => Err(Error::Config(format!(
                "unknown representation {other:?} (expected x, eps or delta)"
            ))),
        }
    }
}

/// The chosen per-step sequence of a trajectory.
pub fn representation_sequence(traj: &Trajectory, repr: Representation) -> Result<Vec<LatentTensor>> {
    traj.records()
        .iter()
        .map(|rec| {
            let tensor = match repr {
                Representation::Latent => rec.x_t.clone().ok_or(Error::MissingBranch("x_t")),
                Representation::Eps => rec.eps_cond.clone().ok_or(Error::MissingBranch("eps_cond")),
                Representation::Delta => {
                    let cond = rec.eps_cond.as_ref().ok_or(Error::MissingBranch("eps_cond"))?;
                    let uncond = rec.eps_uncond.as_ref().ok_or(Error::MissingBranch("eps_uncond"))?;
                    noise_difference(cond, uncond)
                }
            };
            tensor.map_err(|e| Error::at_step(rec.step_index, e))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub trajectory: PathBuf,
    pub which: Analysis,
    pub representation: Representation,
    pub out: PathBuf,
    /// Energy thresholds whose per-step cutoff radii are printed.
    pub r0_sweep: Vec<f64>,
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    for &r0 in &args.r0_sweep {
        CutoffPolicy::energy(r0)?;
    }
    let traj = read_trajectory(&args.trajectory)?;
    let seq = representation_sequence(&traj, args.representation)?;
    let step_err = |i: usize| move |e| Error::at_step(i, e);
    let csv = match args.which {
        Analysis::Spectra => {
            let profiles = seq
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    radial_profile(&fft2_centered(t))
                        .map(|p| p.at_step(i))
                        .map_err(step_err(i))
                })
                .collect::<Result<Vec<_>>>()?;
            CsvTable::Profiles(&profiles).render()
        }
        Analysis::Energy => {
            let spectra: Vec<_> = seq.iter().map(fft2_centered).collect();
            let curves = spectra
                .iter()
                .enumerate()
                .map(|(i, s)| energy_curve(s).map(|c| c.at_step(i)).map_err(step_err(i)))
                .collect::<Result<Vec<_>>>()?;
            if !args.r0_sweep.is_empty() {
                report(out, format_args!("step\tr0\tradius\n"))?;
                for (i, s) in spectra.iter().enumerate() {
                    for &r0 in &args.r0_sweep {
                        report(out, format_args!("{i}\t{r0}\t{}\n", energy_radius(s, r0)?))?;
                    }
                }
            }
            CsvTable::Curves(&curves).render()
        }
        Analysis::TimeAverage => CsvTable::Map(&time_average(&seq)?).render(),
    };
    write_atomic(&args.out, csv.as_bytes())?;
    report(
        out,
        format_args!("wrote {} steps to {}\n", seq.len(), args.out.display()),
    )
}

#[derive(Debug, Clone)]
pub struct MaskArgs {
    pub height: usize,
    pub width: usize,
    pub radius: Option<f64>,
    pub r0: Option<f64>,
    pub strategy: Option<CutoffStrategy>,
    pub out: PathBuf,
}

/// Writes the low-band mask as a `H x W x 1` tensor of zeros and ones.
pub fn cmd_mask(args: &MaskArgs, out: &mut dyn Write) -> Result<()> {
    let radius = match (args.radius, args.r0) {
        (Some(r), None) => r,
        (None, Some(r0)) => match args.strategy.unwrap_or(CutoffStrategy::Spatial) {
            CutoffStrategy::Spatial => crate::cutoff::spatial_ratio_radius(args.height, args.width, r0)?,
            CutoffStrategy::Energy => {
                return Err(Error::Config(
                    "the energy strategy needs a spectrum; use decompose or give --radius".into(),
                ))
            }
        },
        _ => return Err(Error::Config("give exactly one of --radius or --r0".into())),
    };
    let mask = build_radial_mask(args.height, args.width, radius)?;
    write_all(vec![(args.out.clone(), encode(&mask.low_tensor().into())?)])?;
    report(
        out,
        format_args!("radius {radius}: low {} high {}\n", mask.low_count(), mask.high_count()),
    )
}
