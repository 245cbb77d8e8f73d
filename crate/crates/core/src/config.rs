//! Run configuration: TOML file, named presets and command-line overrides.
//!
//! Precedence, lowest first: built-in defaults, preset, config file, flags.
//! Every field is optional so layers can be merged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::read_tensor;
use crate::cutoff::{CutoffPolicy, CutoffStrategy, ScaleSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::guidance::{GuidanceConfig, Target};
use crate::tensor::{LatentTensor, Shape};
use crate::toy::{fixtures, make_schedule, ConditionLabel, GaussianMixture, MixtureComponent, NoiseSchedule};

pub const DEFAULT_R0: f64 = 0.3;
pub const DEFAULT_TRAIN_STEPS: usize = 1000;
pub const DEFAULT_SUBSTEPS: usize = 50;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSection {
    pub omega: Option<f64>,
    pub target: Option<Target>,
    pub l: Option<f64>,
    pub h: Option<f64>,
    pub schedule: Option<ScheduleKind>,
    pub h_max: Option<f64>,
    /// Steps spanned by a linear schedule; defaults to the run length.
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub strategy: Option<CutoffStrategy>,
    pub r0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub train_steps: Option<usize>,
    pub substeps: Option<usize>,
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub seed: Option<u64>,
    pub batch: Option<usize>,
    pub condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// FQS1 tensor holding the component mean.
    pub mean: Option<PathBuf>,
    /// Constant mean, used when `mean` is absent.
    pub mean_value: Option<f64>,
    pub variance: f64,
    pub weight: f64,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    /// `two-tone`, `coarse-to-fine` or `point-mass`.
    pub fixture: Option<String>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub channels: Option<usize>,
    #[serde(default, rename = "component", skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub guidance: GuidanceSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub mixture: MixtureSection,
}

/// A row of the per-task settings table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub h: f64,
    pub l: f64,
    pub r0: f64,
    pub strategy: CutoffStrategy,
    pub target: Target,
    pub omega: Option<f64>,
}

const fn preset(
    name: &'static str,
    h: f64,
    r0: f64,
    strategy: CutoffStrategy,
    target: Target,
    omega: Option<f64>,
) -> Preset {
    Preset {
        name,
        h,
        l: 1.0,
        r0,
        strategy,
        target,
        omega,
    }
}

use CutoffStrategy::{Energy, Spatial};

pub const PRESETS: &[Preset] = &[
    preset("generation", 1.5, 0.9, Energy, Target::Delta, None),
    preset("generation-sdxl", 1.5, 0.9, Energy, Target::Delta, None),
    preset("generation-sd3", 1.2, 0.9, Energy, Target::Delta, None),
    preset("depth-diode", 1.5, 0.3, Spatial, Target::Epsilon, Some(1.0)),
    preset("depth-kitti", 1.2, 0.3, Spatial, Target::Epsilon, Some(1.0)),
    preset("depth-eth3d", 1.1, 0.3, Spatial, Target::Epsilon, Some(1.0)),
    preset("editing", 2.0, 0.3, Spatial, Target::Delta, None),
    preset("editing-ledits", 2.0, 0.3, Spatial, Target::Delta, None),
    preset("editing-ddpm-inversion", 1.2, 0.3, Spatial, Target::Delta, None),
    preset("video", 1.5, 0.9, Energy, Target::Delta, None),
];

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset {name:?} (known: {})", names.join(", ")))
    })
}

impl Preset {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            preset: Some(self.name.to_owned()),
            guidance: GuidanceSection {
                omega: self.omega,
                target: Some(self.target),
                l: Some(self.l),
                h: Some(self.h),
                schedule: Some(ScheduleKind::Constant),
                ..Default::default()
            },
            cutoff: CutoffSection {
                strategy: Some(self.strategy),
                r0: Some(self.r0),
            },
            ..Default::default()
        }
    }
}

fn or<T>(over: Option<T>, base: Option<T>) -> Option<T> {
    over.or(base)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative component paths are resolved against the config file.
        if let Some(dir) = path.parent() {
            for comp in &mut cfg.mixture.components {
                if let Some(mean) = &comp.mean {
                    if mean.is_relative() {
                        comp.mean = Some(dir.join(mean));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        let g = over.guidance;
        let c = over.cutoff;
        let s = over.sampler;
        let m = over.mixture;
        RunConfig {
            preset: or(over.preset, self.preset),
            guidance: GuidanceSection {
                omega: or(g.omega, self.guidance.omega),
                target: or(g.target, self.guidance.target),
                l: or(g.l, self.guidance.l),
                h: or(g.h, self.guidance.h),
                schedule: or(g.schedule, self.guidance.schedule),
                h_max: or(g.h_max, self.guidance.h_max),
                steps: or(g.steps, self.guidance.steps),
            },
            cutoff: CutoffSection {
                strategy: or(c.strategy, self.cutoff.strategy),
                r0: or(c.r0, self.cutoff.r0),
            },
            sampler: SamplerSection {
                train_steps: or(s.train_steps, self.sampler.train_steps),
                substeps: or(s.substeps, self.sampler.substeps),
                beta_start: or(s.beta_start, self.sampler.beta_start),
                beta_end: or(s.beta_end, self.sampler.beta_end),
                seed: or(s.seed, self.sampler.seed),
                batch: or(s.batch, self.sampler.batch),
                condition: or(s.condition, self.sampler.condition),
            },
            mixture: MixtureSection {
                fixture: or(m.fixture, self.mixture.fixture),
                height: or(m.height, self.mixture.height),
                width: or(m.width, self.mixture.width),
                channels: or(m.channels, self.mixture.channels),
                components: if m.components.is_empty() {
                    self.mixture.components
                } else {
                    m.components
                },
            },
        }
    }

    /// Layers preset (named in `flags` or the file), file and flags.
    pub fn resolve(file: Option<RunConfig>, flags: RunConfig) -> Result<RunConfig> {
        let file = file.unwrap_or_default();
        let preset_name = flags.preset.clone().or_else(|| file.preset.clone());
        let base = match preset_name {
            Some(name) => find_preset(&name)?.to_config(),
            None => RunConfig::default(),
        };
        Ok(base.merge(file).merge(flags))
    }

    pub fn cutoff_policy(&self) -> Result<CutoffPolicy> {
        CutoffPolicy::new(
            self.cutoff.strategy.unwrap_or(CutoffStrategy::Spatial),
            self.cutoff.r0.unwrap_or(DEFAULT_R0),
        )
    }

    /// Band-scale schedule over a run of `run_steps` sampler calls.
    pub fn scale_schedule(&self, run_steps: usize) -> Result<ScaleSchedule> {
        let g = &self.guidance;
        let l = g.l.unwrap_or(1.0);
        match g.schedule.unwrap_or(ScheduleKind::Constant) {
            ScheduleKind::Constant => {
                if g.h_max.is_some() {
                    return Err(Error::Config(
                        "h_max is only used by linear-decay / linear-growth schedules".into(),
                    ));
                }
                ScaleSchedule::constant(l, g.h.unwrap_or(1.0))
            }
            kind => {
                let h_max = g
                    .h_max
                    .ok_or_else(|| Error::Config(format!("{kind} schedule needs h_max")))?;
                ScaleSchedule::new(kind, l, h_max, g.steps.unwrap_or(run_steps))
            }
        }
    }

    /// Full guidance config. `fallback_omega` is used when neither preset,
    /// file nor flags set one (e.g. the value recorded with a trajectory).
    pub fn guidance_config(&self, run_steps: usize, fallback_omega: Option<f64>) -> Result<GuidanceConfig> {
        let target = self.guidance.target.unwrap_or(Target::Delta);
        let omega = match (self.guidance.omega.or(fallback_omega), target) {
            (Some(w), _) => w,
            (None, Target::Epsilon) => 1.0,
            (None, Target::Delta) => {
                return Err(Error::Config(
                    "omega is not set in the config, flags or trajectory metadata".into(),
                ))
            }
        };
        GuidanceConfig::new(omega, self.scale_schedule(run_steps)?, self.cutoff_policy()?, target)
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule> {
        let s = &self.sampler;
        make_schedule(
            s.train_steps.unwrap_or(DEFAULT_TRAIN_STEPS),
            s.beta_start.unwrap_or(DEFAULT_BETA_START),
            s.beta_end.unwrap_or(DEFAULT_BETA_END),
        )
    }

    pub fn substeps(&self) -> usize {
        self.sampler.substeps.unwrap_or(DEFAULT_SUBSTEPS)
    }

    pub fn mixture_shape(&self) -> Result<Shape> {
        let m = &self.mixture;
        let shape = Shape::new(
            m.height.unwrap_or(fixtures::DEFAULT_SHAPE.height),
            m.width.unwrap_or(fixtures::DEFAULT_SHAPE.width),
            m.channels.unwrap_or(fixtures::DEFAULT_SHAPE.channels),
        );
        shape.validate()?;
        Ok(shape)
    }

    pub fn mixture(&self) -> Result<GaussianMixture> {
        let shape = self.mixture_shape()?;
        if !self.mixture.components.is_empty() {
            if self.mixture.fixture.is_some() {
                return Err(Error::Config(
                    "set either mixture.fixture or mixture.component, not both".into(),
                ));
            }
            let comps = self
                .mixture
                .components
                .iter()
                .map(|spec| {
                    let mean = match (&spec.mean, spec.mean_value) {
                        (Some(path), None) => read_tensor(path)?,
                        (None, Some(v)) if v.is_finite() => LatentTensor::filled(shape, v),
                        _ => {
                            return Err(Error::Config(format!(
                                "component {:?} needs exactly one finite mean or mean_value",
                                spec.label
                            )))
                        }
                    };
                    Ok(MixtureComponent {
                        mean,
                        variance: spec.variance,
                        weight: spec.weight,
                        label: ConditionLabel::new(spec.label.clone()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return GaussianMixture::new(comps);
        }
        match self.mixture.fixture.as_deref().unwrap_or("two-tone") {
            "two-tone" => Ok(fixtures::two_tone(shape)),
            "coarse-to-fine" => Ok(fixtures::coarse_to_fine(shape)),
            "point-mass" => Ok(fixtures::point_mass(fixtures::point_mass_mean(shape))),
            other => Err(Error::Config(format!(
                "unknown fixture {other:?} (expected two-tone, coarse-to-fine or point-mass)"
            ))),
        }
    }

    /// Condition label; defaults to the fixture's conditioned class.
    pub fn condition(&self) -> ConditionLabel {
        let default = match self.mixture.fixture.as_deref() {
            Some("point-mass") => fixtures::TARGET,
            _ => fixtures::TEXTURED,
        };
        ConditionLabel::new(self.sampler.condition.clone().unwrap_or_else(|| default.to_owned()))
    }
}
