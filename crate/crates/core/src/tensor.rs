//! Tensor and trajectory data model.
//!
//! A [`LatentTensor`] is a real `H x W x C` field stored channel-outermost:
//! `C` contiguous planes of `H` rows by `W` columns. Values are `f64` in
//! memory and `f32` on disk (see [`crate::container`]).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    /// Number of elements in one channel plane.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::ZeroDimension(*self));
        }
        self.height
            .checked_mul(self.width)
            .and_then(|n| n.checked_mul(self.channels))
            .ok_or(Error::DimensionOverflow)?;
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// A real-valued `H x W x C` field: a latent, a noise prediction or a noise
/// difference at one sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl LatentTensor {
    /// Builds a tensor, checking the element count and that every value is finite.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                shape,
                expected: shape.len(),
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor from `f(channel, row, col)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self { shape, data }
    }

    /// Internal constructor for results of arithmetic on already valid tensors.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        let s = self.shape;
        self.data[channel * s.plane_len() + row * s.width + col]
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.shape.plane_len())
    }

    pub fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: self.shape,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        other.ensure_shape(self.shape)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_parts(self.shape, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_parts(self.shape, self.data.iter().map(|v| alpha * v).collect())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest elementwise absolute difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// One sampler call: the latent and the noise branches seen at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Sampler-call index, 0 for the first denoising call.
    pub step_index: usize,
    /// Scheduler timestep value at this call.
    pub timestep: f64,
    pub x_t: Option<LatentTensor>,
    pub eps_cond: Option<LatentTensor>,
    pub eps_uncond: Option<LatentTensor>,
}

impl TrajectoryRecord {
    pub fn shape(&self) -> Option<Shape> {
        self.tensors().next().map(LatentTensor::shape)
    }

    /// Present tensors in container order (x_t, eps_cond, eps_uncond).
    pub fn tensors(&self) -> impl Iterator<Item = &LatentTensor> {
        [&self.x_t, &self.eps_cond, &self.eps_uncond].into_iter().flatten()
    }
}

/// Ordered per-step records of a sampling run plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    records: Vec<TrajectoryRecord>,
    pub metadata: BTreeMap<String, String>,
}

impl Trajectory {
    /// Checks that step indices run `0..T` without gaps and that every tensor
    /// shares one shape.
    pub fn new(records: Vec<TrajectoryRecord>, metadata: BTreeMap<String, String>) -> Result<Self> {
        let mut shape: Option<Shape> = None;
        for (expected, rec) in records.iter().enumerate() {
            if rec.step_index != expected {
                return Err(Error::StepOrder {
                    expected,
                    found: rec.step_index,
                });
            }
            if !rec.timestep.is_finite() {
                return Err(Error::NonFinite { index: expected });
            }
            for t in rec.tensors() {
                match shape {
                    None => shape = Some(t.shape()),
                    Some(s) => t.ensure_shape(s)?,
                }
            }
        }
        Ok(Self { records, metadata })
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Common tensor shape, or `None` when no record carries a tensor.
    pub fn shape(&self) -> Option<Shape> {
        self.records.iter().find_map(TrajectoryRecord::shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length_and_nan() {
        let s = Shape::new(2, 2, 1);
        assert!(matches!(
            LatentTensor::new(s, vec![0.0; 3]),
            Err(Error::DataLength { .. })
        ));
        assert!(matches!(
            LatentTensor::new(s, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            LatentTensor::new(Shape::new(0, 2, 1), vec![]),
            Err(Error::ZeroDimension(_))
        ));
    }

    #[test]
    fn layout_is_channel_outermost() {
        let t = LatentTensor::from_fn(Shape::new(2, 3, 2), |c, y, x| (100 * c + 10 * y + x) as f64);
        assert_eq!(t.data()[..6], [0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(t.get(1, 1, 2), 112.0);
        assert_eq!(t.plane(1)[0], 100.0);
    }

    #[test]
    fn trajectory_rejects_gaps_and_mixed_shapes() {
        let a = LatentTensor::zeros(Shape::new(2, 2, 1));
        let b = LatentTensor::zeros(Shape::new(2, 2, 2));
        let rec = |i, t: &LatentTensor| TrajectoryRecord {
            step_index: i,
            timestep: 0.0,
            x_t: Some(t.clone()),
            eps_cond: None,
            eps_uncond: None,
        };
        assert!(matches!(
            Trajectory::new(vec![rec(0, &a), rec(2, &a)], Default::default()),
            Err(Error::StepOrder { expected: 1, found: 2 })
        ));
        assert!(matches!(
            Trajectory::new(vec![rec(0, &a), rec(1, &b)], Default::default()),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(Trajectory::new(vec![rec(0, &a), rec(1, &a)], Default::default()).is_ok());
    }
}
