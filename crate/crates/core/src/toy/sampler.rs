use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::mixture::{ConditionLabel, GaussianMixture};
use super::schedule::NoiseSchedule;
use crate::cutoff::ScheduleKind;
use crate::error::{Error, Result};
use crate::guidance::{guided_step, GuidanceConfig};
use crate::tensor::{LatentTensor, Trajectory, TrajectoryRecord};

/// Final sample plus the recorded trajectory of a sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x0: LatentTensor,
    pub trajectory: Trajectory,
}

/// `substeps` scheduler timesteps spaced evenly from `T` down to 1.
pub fn sampling_timesteps(train_steps: usize, substeps: usize) -> Result<Vec<usize>> {
    if substeps == 0 || substeps > train_steps {
        return Err(Error::InvalidNoiseSchedule(format!(
            "substeps must be in 1..={train_steps}, got {substeps}"
        )));
    }
    if substeps == 1 {
        return Ok(vec![train_steps]);
    }
    let span = train_steps - 1;
    let gaps = substeps - 1;
    // Round-half-up of i * span / gaps, in integers.
    Ok((0..substeps)
        .map(|i| train_steps - (2 * i * span + gaps) / (2 * gaps))
        .collect())
}

/// Deterministic DDIM (eta = 0) run from `N(0, I)` noise drawn with `seed`,
/// guided at every step by `cfg`.
pub fn sample(
    gmm: &GaussianMixture,
    schedule: &NoiseSchedule,
    cfg: &GuidanceConfig,
    condition: &ConditionLabel,
    seed: u64,
    substeps: usize,
) -> Result<Sample> {
    if !gmm.has_label(condition) {
        return Err(Error::EmptyCondition(condition.0.clone()));
    }
    if cfg.schedule.kind() != ScheduleKind::Constant && cfg.schedule.total_steps() != substeps {
        return Err(Error::InvalidSchedule(format!(
            "{} schedule spans {} steps but the sampler runs {substeps}",
            cfg.schedule.kind(),
            cfg.schedule.total_steps()
        )));
    }
    let timesteps = sampling_timesteps(schedule.len(), substeps)?;
    let shape = gmm.shape();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..shape.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = LatentTensor::from_parts(shape, noise);

    let mut records = Vec::with_capacity(substeps);
    for (step, &t) in timesteps.iter().enumerate() {
        let ab = schedule.alpha_bar(t);
        let ab_prev = timesteps.get(step + 1).map_or(1.0, |&tp| schedule.alpha_bar(tp));

        let eps_uncond = gmm.optimal_eps(&x, ab, None)?;
        let eps_cond = gmm.optimal_eps(&x, ab, Some(condition))?;
        let record = TrajectoryRecord {
            step_index: step,
            timestep: t as f64,
            x_t: Some(x),
            eps_cond: Some(eps_cond),
            eps_uncond: Some(eps_uncond),
        };
        let guided = guided_step(&record, cfg, step).map_err(|e| Error::at_step(step, e))?;
        let eps = guided.eps_hat;

        let x_t = record.x_t.as_ref().unwrap();
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let (sa_prev, sn_prev) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        let data = x_t
            .data()
            .iter()
            .zip(eps.data())
            .map(|(&xv, &e)| {
                let x0_hat = (xv - sn * e) / sa;
                sa_prev * x0_hat + sn_prev * e
            })
            .collect();
        x = LatentTensor::from_parts(shape, data);
        records.push(record);
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("model".into(), "toy-gmm".into());
    metadata.insert("condition".into(), condition.0.clone());
    metadata.insert("seed".into(), seed.to_string());
    metadata.insert("omega".into(), cfg.omega.to_string());
    metadata.insert("target".into(), cfg.target.to_string());
    metadata.insert("train_steps".into(), schedule.len().to_string());
    metadata.insert("substeps".into(), substeps.to_string());
    let trajectory = Trajectory::new(records, metadata)?;
    Ok(Sample { x0: x, trajectory })
}

/// [`sample`] for each seed, evaluated in parallel, returned in seed order.
pub fn sample_batch(
    gmm: &GaussianMixture,
    schedule: &NoiseSchedule,
    cfg: &GuidanceConfig,
    condition: &ConditionLabel,
    seeds: &[u64],
    substeps: usize,
) -> Result<Vec<Sample>> {
    seeds
        .par_iter()
        .map(|&seed| sample(gmm, schedule, cfg, condition, seed, substeps))
        .collect()
}
