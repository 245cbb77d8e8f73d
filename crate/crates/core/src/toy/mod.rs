//! Analytic diffusion backend.
//!
//! Data come from an isotropic Gaussian mixture, so the optimal noise
//! predictor has a closed form. Conditioning restricts the mixture to the
//! components carrying a label. A deterministic DDIM loop drives the
//! guidance engine end to end and records every step.

pub mod fixtures;
mod mixture;
mod sampler;
mod schedule;

pub use mixture::{ConditionLabel, GaussianMixture, MixtureComponent, RESPONSIBILITY_FLOOR};
pub use sampler::{sample, sample_batch, sampling_timesteps, Sample};
pub use schedule::{make_schedule, NoiseSchedule};
