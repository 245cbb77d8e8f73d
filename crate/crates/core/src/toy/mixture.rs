use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{LatentTensor, Shape};

/// Responsibilities below this are flushed to zero.
pub const RESPONSIBILITY_FLOOR: f64 = 1e-300;

/// Opaque condition identifier; selects the mixture components carrying it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionLabel(pub String);

impl ConditionLabel {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConditionLabel {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mean: LatentTensor,
    /// Isotropic variance `sigma^2`; zero is a point mass.
    pub variance: f64,
    pub weight: f64,
    pub label: ConditionLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidMixture("no components".into()))?;
        let shape = first.mean.shape();
        let mut total = 0.0;
        for (k, comp) in components.iter().enumerate() {
            comp.mean.ensure_shape(shape)?;
            if !(comp.variance.is_finite() && comp.variance >= 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: variance {} must be finite and non-negative",
                    comp.variance
                )));
            }
            if !(comp.weight.is_finite() && comp.weight > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: weight {} must be positive",
                    comp.weight
                )));
            }
            total += comp.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn shape(&self) -> Shape {
        self.components[0].mean.shape()
    }

    pub fn has_label(&self, label: &ConditionLabel) -> bool {
        self.components.iter().any(|c| &c.label == label)
    }

    fn allowed<'a>(&'a self, condition: Option<&'a ConditionLabel>) -> Result<Vec<&'a MixtureComponent>> {
        let picked: Vec<_> = self
            .components
            .iter()
            .filter(|c| condition.is_none_or(|l| &c.label == l))
            .collect();
        if picked.is_empty() {
            let label = condition.map(|l| l.0.clone()).unwrap_or_default();
            return Err(Error::EmptyCondition(label));
        }
        Ok(picked)
    }

    /// `E[x_0 | x_t]` under `x_t = sqrt(alpha_bar) x_0 + sqrt(1 - alpha_bar) n`,
    /// restricted to the components allowed by `condition`.
    pub fn posterior_mean(
        &self,
        x_t: &LatentTensor,
        alpha_bar: f64,
        condition: Option<&ConditionLabel>,
    ) -> Result<LatentTensor> {
        if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
            return Err(Error::DegenerateAlphaBar(alpha_bar));
        }
        x_t.ensure_shape(self.shape())?;
        let comps = self.allowed(condition)?;
        let signal = alpha_bar.sqrt();
        let dim = x_t.shape().len() as f64;

        // Per component: noised variance, log weight and the residual x_t - sqrt(ab) mu.
        let mut log_w = Vec::with_capacity(comps.len());
        let mut residuals = Vec::with_capacity(comps.len());
        let mut variances = Vec::with_capacity(comps.len());
        for comp in &comps {
            let var = alpha_bar * comp.variance + (1.0 - alpha_bar);
            let residual: Vec<f64> = x_t
                .data()
                .iter()
                .zip(comp.mean.data())
                .map(|(x, m)| x - signal * m)
                .collect();
            let dist_sq: f64 = residual.iter().map(|r| r * r).sum();
            log_w.push(comp.weight.ln() - 0.5 * dim * var.ln() - 0.5 * dist_sq / var);
            residuals.push(residual);
            variances.push(var);
        }
        let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut resp: Vec<f64> = log_w.iter().map(|l| (l - peak).exp()).collect();
        let norm: f64 = resp.iter().sum();
        for r in &mut resp {
            *r /= norm;
            if *r < RESPONSIBILITY_FLOOR {
                *r = 0.0;
            }
        }

        let mut mean = vec![0.0; x_t.shape().len()];
        for (((comp, residual), var), r) in comps.iter().zip(&residuals).zip(&variances).zip(&resp) {
            if *r == 0.0 {
                continue;
            }
            let gain = signal * comp.variance / var;
            for ((m, mu), res) in mean.iter_mut().zip(comp.mean.data()).zip(residual) {
                *m += r * (mu + gain * res);
            }
        }
        Ok(LatentTensor::from_parts(x_t.shape(), mean))
    }

    /// Noise prediction of the Bayes-optimal denoiser:
    /// `(x_t - sqrt(alpha_bar) E[x_0 | x_t]) / sqrt(1 - alpha_bar)`.
    pub fn optimal_eps(
        &self,
        x_t: &LatentTensor,
        alpha_bar: f64,
        condition: Option<&ConditionLabel>,
    ) -> Result<LatentTensor> {
        let mean = self.posterior_mean(x_t, alpha_bar, condition)?;
        let signal = alpha_bar.sqrt();
        let inv_noise = 1.0 / (1.0 - alpha_bar).sqrt();
        let data = x_t
            .data()
            .iter()
            .zip(mean.data())
            .map(|(x, m)| (x - signal * m) * inv_noise)
            .collect();
        Ok(LatentTensor::from_parts(x_t.shape(), data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(value: f64, label: &str, weight: f64) -> MixtureComponent {
        MixtureComponent {
            mean: LatentTensor::filled(Shape::new(2, 2, 1), value),
            variance: 0.0,
            weight,
            label: label.into(),
        }
    }

    #[test]
    fn single_point_mass_closed_form() {
        let gmm = GaussianMixture::new(vec![point(0.7, "a", 1.0)]).unwrap();
        let x = LatentTensor::from_fn(Shape::new(2, 2, 1), |_, y, x| (y * 2 + x) as f64 * 0.3 - 0.4);
        let ab: f64 = 0.36;
        let eps = gmm.optimal_eps(&x, ab, None).unwrap();
        for (e, xv) in eps.data().iter().zip(x.data()) {
            let expected = (xv - ab.sqrt() * 0.7) / (1.0 - ab).sqrt();
            assert!((e - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn midpoint_is_symmetric() {
        let gmm = GaussianMixture::new(vec![point(1.0, "a", 0.5), point(-1.0, "b", 0.5)]).unwrap();
        let x = LatentTensor::zeros(Shape::new(2, 2, 1));
        let mean = gmm.posterior_mean(&x, 0.5, None).unwrap();
        assert!(mean.max_abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let gmm = GaussianMixture::new(vec![point(1.0, "a", 1.0)]).unwrap();
        let x = LatentTensor::zeros(Shape::new(2, 2, 1));
        assert!(matches!(
            gmm.optimal_eps(&x, 1.0, None),
            Err(Error::DegenerateAlphaBar(_))
        ));
        assert!(matches!(
            gmm.optimal_eps(&x, 0.5, Some(&"zzz".into())),
            Err(Error::EmptyCondition(_))
        ));
        assert!(GaussianMixture::new(vec![point(1.0, "a", 0.6)]).is_err());
        assert!(GaussianMixture::new(vec![]).is_err());
    }

    #[test]
    fn label_covering_everything_equals_unconditional() {
        let gmm = GaussianMixture::new(vec![point(1.0, "all", 0.3), point(-0.5, "all", 0.7)]).unwrap();
        let x = LatentTensor::from_fn(Shape::new(2, 2, 1), |_, y, x| y as f64 - x as f64 * 0.5);
        let u = gmm.optimal_eps(&x, 0.4, None).unwrap();
        let c = gmm.optimal_eps(&x, 0.4, Some(&"all".into())).unwrap();
        assert_eq!(u, c);
    }
}
