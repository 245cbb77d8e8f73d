//! Frequency-scaled classifier-free guidance.
//!
//! Plain guidance combines two noise predictions as
//! `eps = eps_uncond + omega * (eps_cond - eps_uncond)`. Here the noise
//! difference is split into a low and a high radial band, each band is
//! rescaled by its own factor, and the rescaled difference replaces the raw
//! one. With both factors equal to 1 this is ordinary guidance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{BandScales, CutoffPolicy, ScaleSchedule};
use crate::error::{Error, Result};
use crate::spectral::{build_radial_mask, fft2_centered, ifft2_centered, scale_bands, FrequencyMask};
use crate::tensor::{LatentTensor, Trajectory, TrajectoryRecord};

/// What the band scaling is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// The conditional-minus-unconditional difference inside CFG.
    Delta,
    /// A single (conditional) noise prediction, rescaled directly. No `omega`.
    Epsilon,
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "epsilon" => Ok(Self::Epsilon),
            other => Err(Error::Config(format!(
                "unknown target {other:?} (expected \"delta\" or \"epsilon\")"
            ))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Delta => "delta",
            Self::Epsilon => "epsilon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    pub omega: f64,
    pub schedule: ScaleSchedule,
    pub cutoff: CutoffPolicy,
    pub target: Target,
}

impl GuidanceConfig {
    pub fn new(omega: f64, schedule: ScaleSchedule, cutoff: CutoffPolicy, target: Target) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidGuidance(format!(
                "omega = {omega} must be finite and non-negative"
            )));
        }
        Ok(Self {
            omega,
            schedule,
            cutoff,
            target,
        })
    }

    /// Plain CFG: unit band scales.
    pub fn plain(omega: f64, cutoff: CutoffPolicy) -> Result<Self> {
        Self::new(omega, ScaleSchedule::constant(1.0, 1.0)?, cutoff, Target::Delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedStepOutput {
    /// Final guided noise prediction.
    pub eps_hat: LatentTensor,
    /// The tensor that was band-scaled: the noise difference in delta mode,
    /// the conditional prediction in epsilon mode.
    pub delta_raw: LatentTensor,
    pub delta_scaled: LatentTensor,
    pub radius_used: f64,
    pub scales: BandScales,
}

/// `eps_cond - eps_uncond`.
pub fn noise_difference(eps_cond: &LatentTensor, eps_uncond: &LatentTensor) -> Result<LatentTensor> {
    eps_cond.sub(eps_uncond)
}

/// `F^-1(l * M_l ⊙ F(delta) + h * M_h ⊙ F(delta))`.
pub fn freqscale(delta: &LatentTensor, mask: &FrequencyMask, low: f64, high: f64) -> Result<LatentTensor> {
    let spectrum = fft2_centered(delta);
    ifft2_centered(&scale_bands(&spectrum, mask, low, high)?)
}

/// Band-scales `target` with the cutoff chosen by `policy` on its own spectrum.
fn scale_with_policy(target: &LatentTensor, policy: &CutoffPolicy, scales: BandScales) -> Result<(LatentTensor, f64)> {
    let shape = target.shape();
    let spectrum = fft2_centered(target);
    let radius = policy.radius(&spectrum);
    let mask = build_radial_mask(shape.height, shape.width, radius)?;
    let scaled = ifft2_centered(&scale_bands(&spectrum, &mask, scales.low, scales.high)?)?;
    Ok((scaled, radius))
}

/// One guided prediction for the record at sampler call `step`.
pub fn guided_step(record: &TrajectoryRecord, cfg: &GuidanceConfig, step: usize) -> Result<GuidedStepOutput> {
    let scales = cfg.schedule.eval(step)?;
    match cfg.target {
        Target::Delta => {
            let cond = record.eps_cond.as_ref().ok_or(Error::MissingBranch("eps_cond"))?;
            let uncond = record.eps_uncond.as_ref().ok_or(Error::MissingBranch("eps_uncond"))?;
            let delta_raw = noise_difference(cond, uncond)?;
            let (delta_scaled, radius_used) = scale_with_policy(&delta_raw, &cfg.cutoff, scales)?;
            let eps_hat = uncond.add_scaled(cfg.omega, &delta_scaled)?;
            Ok(GuidedStepOutput {
                eps_hat,
                delta_raw,
                delta_scaled,
                radius_used,
                scales,
            })
        }
        Target::Epsilon => {
            let cond = record.eps_cond.as_ref().ok_or(Error::MissingBranch("eps_cond"))?;
            let (scaled, radius_used) = scale_with_policy(cond, &cfg.cutoff, scales)?;
            Ok(GuidedStepOutput {
                eps_hat: scaled.clone(),
                delta_raw: cond.clone(),
                delta_scaled: scaled,
                radius_used,
                scales,
            })
        }
    }
}

/// Applies [`guided_step`] to every record, in step order.
pub fn process_trajectory(traj: &Trajectory, cfg: &GuidanceConfig) -> Result<Vec<GuidedStepOutput>> {
    traj.records()
        .par_iter()
        .map(|rec| guided_step(rec, cfg, rec.step_index).map_err(|e| Error::at_step(rec.step_index, e)))
        .collect()
}
