//! Cutoff radius selection and time schedules for the band scales.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ceil_sqrt, max_squared_radius, squared_radii, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffStrategy {
    /// `R_c = r0 * min(H / 2, W / 2)`.
    Spatial,
    /// Smallest integer radius enclosing a fraction `r0` of the total `|U|`.
    Energy,
}

impl FromStr for CutoffStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(Self::Spatial),
            "energy" => Ok(Self::Energy),
            other => Err(Error::Config(format!(
                "unknown cutoff strategy {other:?} (expected \"spatial\" or \"energy\")"
            ))),
        }
    }
}

impl fmt::Display for CutoffStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spatial => "spatial",
            Self::Energy => "energy",
        })
    }
}

fn check_ratio(r0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r0) {
        Ok(())
    } else {
        Err(Error::InvalidRatio(r0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPolicy {
    strategy: CutoffStrategy,
    r0: f64,
}

impl CutoffPolicy {
    pub fn new(strategy: CutoffStrategy, r0: f64) -> Result<Self> {
        check_ratio(r0)?;
        Ok(Self { strategy, r0 })
    }

    pub fn spatial(r0: f64) -> Result<Self> {
        Self::new(CutoffStrategy::Spatial, r0)
    }

    pub fn energy(r0: f64) -> Result<Self> {
        Self::new(CutoffStrategy::Energy, r0)
    }

    pub fn strategy(&self) -> CutoffStrategy {
        self.strategy
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Cutoff radius for the field whose spectrum is `spectrum`.
    pub fn radius(&self, spectrum: &SpectralField) -> f64 {
        let s = spectrum.shape();
        match self.strategy {
            CutoffStrategy::Spatial => spatial_radius_unchecked(s.height, s.width, self.r0),
            CutoffStrategy::Energy => energy_radius_unchecked(spectrum, self.r0) as f64,
        }
    }
}

fn spatial_radius_unchecked(height: usize, width: usize, r0: f64) -> f64 {
    r0 * (height as f64 / 2.0).min(width as f64 / 2.0)
}

/// `r0 * min(H / 2, W / 2)`, unrounded.
pub fn spatial_ratio_radius(height: usize, width: usize, r0: f64) -> Result<f64> {
    check_ratio(r0)?;
    Ok(spatial_radius_unchecked(height, width, r0))
}

/// Cumulative `|U|` (all channels) inside integer radius `R`, for
/// `R = 0 ..= ceil(max grid radius)`. The last entry is the total.
pub(crate) fn cumulative_magnitude(spectrum: &SpectralField) -> Vec<f64> {
    let s = spectrum.shape();
    let radii = squared_radii(s.height, s.width);
    let max_r = ceil_sqrt(max_squared_radius(s.height, s.width)) as usize;
    // Bin each frequency under the smallest integer radius that contains it.
    let bucket: Vec<usize> = radii.iter().map(|&d2| ceil_sqrt(d2) as usize).collect();
    let mut per_radius = vec![0.0; max_r + 1];
    for plane in spectrum.data().chunks_exact(s.plane_len()) {
        for (z, &b) in plane.iter().zip(&bucket) {
            per_radius[b] += z.norm();
        }
    }
    let mut acc = 0.0;
    per_radius
        .into_iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn energy_radius_unchecked(spectrum: &SpectralField, r0: f64) -> u32 {
    let cumulative = cumulative_magnitude(spectrum);
    let total = *cumulative.last().expect("grid has at least one bin");
    let target = r0 * total;
    cumulative
        .iter()
        .position(|&c| c >= target)
        .unwrap_or(cumulative.len() - 1) as u32
}

/// Smallest integer `R >= 0` whose disc holds at least `r0` of the total
/// spectral magnitude, summed over channels. An all-zero spectrum gives 0.
pub fn energy_radius(spectrum: &SpectralField, r0: f64) -> Result<u32> {
    check_ratio(r0)?;
    Ok(energy_radius_unchecked(spectrum, r0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    LinearDecay,
    LinearGrowth,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear-decay" => Ok(Self::LinearDecay),
            "linear-growth" => Ok(Self::LinearGrowth),
            other => Err(Error::Config(format!(
                "unknown schedule {other:?} (expected constant, linear-decay or linear-growth)"
            ))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::LinearDecay => "linear-decay",
            Self::LinearGrowth => "linear-growth",
        })
    }
}

/// Band scales applied at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandScales {
    pub low: f64,
    pub high: f64,
}

/// Per-step `(l, h)`. Only the high-band factor varies over time.
///
/// For the linear schedules `high` is `h_max` and the step runs over
/// sampler calls `0..total_steps`:
///
/// * decay:  `h(t) = (T-1-t)/(T-1) * (h_max - 1) + 1`, from `h_max` down to 1
/// * growth: `h(t) = h_max - (T-1-t)/(T-1) * (h_max - 1)`, from 1 up to `h_max`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSchedule {
    kind: ScheduleKind,
    low: f64,
    high: f64,
    total_steps: usize,
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!(
            "{name} = {v} must be finite and non-negative"
        )))
    }
}

impl ScaleSchedule {
    pub fn new(kind: ScheduleKind, low: f64, high: f64, total_steps: usize) -> Result<Self> {
        check_scale("l", low)?;
        check_scale(if kind == ScheduleKind::Constant { "h" } else { "h_max" }, high)?;
        if kind != ScheduleKind::Constant && total_steps < 2 {
            return Err(Error::InvalidSchedule(format!(
                "{kind} needs at least 2 steps, got {total_steps}"
            )));
        }
        Ok(Self {
            kind,
            low,
            high,
            total_steps,
        })
    }

    /// Fixed `(l, h)` at every step.
    pub fn constant(low: f64, high: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant, low, high, 0)
    }

    pub fn linear_decay(low: f64, h_max: f64, total_steps: usize) -> Result<Self> {
        Self::new(ScheduleKind::LinearDecay, low, h_max, total_steps)
    }

    pub fn linear_growth(low: f64, h_max: f64, total_steps: usize) -> Result<Self> {
        Self::new(ScheduleKind::LinearGrowth, low, h_max, total_steps)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    /// `h` for the constant schedule, `h_max` otherwise.
    pub fn high(&self) -> f64 {
        self.high
    }

    /// Zero for the constant schedule, which accepts any step.
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_identity(&self) -> bool {
        self.low == 1.0 && self.high == 1.0
    }

    pub fn eval(&self, step: usize) -> Result<BandScales> {
        let high = match self.kind {
            ScheduleKind::Constant => self.high,
            kind => {
                if step >= self.total_steps {
                    return Err(Error::ScheduleStep {
                        step,
                        total: self.total_steps,
                    });
                }
                let last = (self.total_steps - 1) as f64;
                let remaining = (last - step as f64) / last;
                match kind {
                    ScheduleKind::LinearDecay => remaining * (self.high - 1.0) + 1.0,
                    _ => self.high - remaining * (self.high - 1.0),
                }
            }
        };
        Ok(BandScales { low: self.low, high })
    }
}

/// Free-function form of [`ScaleSchedule::eval`].
pub fn schedule_eval(schedule: &ScaleSchedule, step: usize) -> Result<BandScales> {
    schedule.eval(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use num_complex::Complex64;

    #[test]
    fn spatial_radius_values() {
        assert_eq!(spatial_ratio_radius(64, 64, 0.5).unwrap(), 16.0);
        assert_eq!(spatial_ratio_radius(17, 3, 0.0).unwrap(), 0.0);
        assert_eq!(spatial_ratio_radius(128, 64, 0.3).unwrap(), 9.6);
        assert!(matches!(spatial_ratio_radius(8, 8, 1.5), Err(Error::InvalidRatio(_))));
        assert!(spatial_ratio_radius(8, 8, -0.1).is_err());
        assert!(spatial_ratio_radius(8, 8, f64::NAN).is_err());
    }

    #[test]
    fn energy_radius_trivial_cases() {
        let mut dc = SpectralField::zeros(Shape::new(8, 8, 2));
        dc.set(1, 0, 0, Complex64::new(3.0, 0.0));
        for r0 in [0.1, 0.5, 1.0] {
            assert_eq!(energy_radius(&dc, r0).unwrap(), 0);
        }
        let zero = SpectralField::zeros(Shape::new(8, 8, 1));
        assert_eq!(energy_radius(&zero, 0.7).unwrap(), 0);
        let mut far = SpectralField::zeros(Shape::new(8, 8, 1));
        far.set(0, -4, -4, Complex64::new(1.0, 0.0));
        assert_eq!(energy_radius(&far, 0.0).unwrap(), 0);
        assert_eq!(energy_radius(&far, 0.5).unwrap(), 6);
        assert!(energy_radius(&far, 2.0).is_err());
    }

    #[test]
    fn schedule_endpoint_examples() {
        let decay = ScaleSchedule::linear_decay(1.0, 1.1, 50).unwrap();
        assert_eq!(decay.eval(0).unwrap().high, 1.1);
        assert_eq!(decay.eval(49).unwrap().high, 1.0);
        let growth = ScaleSchedule::linear_growth(1.0, 1.1, 50).unwrap();
        assert_eq!(growth.eval(0).unwrap().high, 1.0);
        assert_eq!(growth.eval(49).unwrap().high, 1.1);
        assert!(matches!(decay.eval(50), Err(Error::ScheduleStep { .. })));
    }

    #[test]
    fn constant_schedule_ignores_step() {
        let s = ScaleSchedule::constant(1.0, 1.5).unwrap();
        for t in [0, 7, 10_000] {
            assert_eq!(s.eval(t).unwrap(), BandScales { low: 1.0, high: 1.5 });
        }
    }

    #[test]
    fn ramps_need_two_steps() {
        assert!(ScaleSchedule::linear_decay(1.0, 1.5, 1).is_err());
        assert!(ScaleSchedule::linear_growth(1.0, 1.5, 0).is_err());
        assert!(ScaleSchedule::constant(-1.0, 1.0).is_err());
    }

    #[test]
    fn strategy_and_kind_parse() {
        assert_eq!("energy".parse::<CutoffStrategy>().unwrap(), CutoffStrategy::Energy);
        assert_eq!(
            "linear-decay".parse::<ScheduleKind>().unwrap(),
            ScheduleKind::LinearDecay
        );
        assert!("ratio".parse::<CutoffStrategy>().is_err());
    }
}
