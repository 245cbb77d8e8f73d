//! Frequency-band scaling of classifier-free guidance.
//!
//! The guidance difference `eps_cond - eps_uncond` is split into low and
//! high radial frequency bands with a centered 2D Fourier transform, each
//! band is rescaled independently, and the result replaces the raw
//! difference in the guidance combination. The cutoff between the bands is
//! either a fixed fraction of the grid half-size or the radius enclosing a
//! given share of the spectral magnitude, and the high-band factor may
//! follow a linear schedule over sampling steps.
//!
//! Modules:
//!
//! * [`tensor`] and [`container`]: the data model and the `FQS1` file format
//! * [`spectral`]: transforms, radial masks and band decomposition
//! * [`cutoff`]: cutoff radii and band-scale schedules
//! * [`guidance`]: the scaled guidance step and batch application
//! * [`toy`]: an analytic Gaussian-mixture diffusion backend and sampler
//! * [`diagnostics`]: radial profiles, energy curves, time averages, CSV
//! * [`config`] and [`commands`]: run configuration and the CLI verbs

pub mod commands;
pub mod config;
pub mod container;
pub mod cutoff;
pub mod diagnostics;
pub mod error;
pub mod guidance;
pub mod spectral;
pub mod tensor;
pub mod toy;

pub use container::{read_container, write_container, Container};
pub use cutoff::{
    energy_radius, schedule_eval, spatial_ratio_radius, BandScales, CutoffPolicy, CutoffStrategy, ScaleSchedule,
    ScheduleKind,
};
pub use error::{Error, Result};
pub use guidance::{
    freqscale, guided_step, noise_difference, process_trajectory, GuidanceConfig, GuidedStepOutput, Target,
};
pub use spectral::{build_radial_mask, decompose, fft2_centered, ifft2_centered, FrequencyMask, SpectralField};
pub use tensor::{LatentTensor, Shape, Trajectory, TrajectoryRecord};
