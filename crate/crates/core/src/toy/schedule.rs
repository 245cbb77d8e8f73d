use crate::error::{Error, Result};

/// Cumulative signal levels `alpha_bar_t` for `t = 1..=T`; larger `t` is noisier.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Accepts any strictly decreasing sequence in `(0, 1]`.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::InvalidNoiseSchedule("no steps".into()));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidNoiseSchedule("alpha_bar must lie in (0, 1]".into()));
        }
        if let Some(i) = alpha_bar.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::InvalidNoiseSchedule(format!(
                "alpha_bar not strictly decreasing at t = {}",
                i + 2
            )));
        }
        Ok(Self { alpha_bar })
    }

    /// Number of training steps `T`.
    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }

    /// `alpha_bar_t` for `t` in `1..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        assert!((1..=self.len()).contains(&t), "timestep {t} outside 1..={}", self.len());
        self.alpha_bar[t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha_bar
    }
}

/// Variance-preserving schedule with `beta` linearly spaced from
/// `beta_start` to `beta_end` and `alpha_bar_t = prod_{s <= t} (1 - beta_s)`.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidNoiseSchedule(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidNoiseSchedule(format!(
            "need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let span = beta_end - beta_start;
    let last = (steps - 1) as f64;
    let mut acc = 1.0;
    let alpha_bar = (0..steps)
        .map(|s| {
            let beta = beta_start + span * s as f64 / last;
            acc *= 1.0 - beta;
            acc
        })
        .collect();
    NoiseSchedule::from_alpha_bar(alpha_bar)
}
