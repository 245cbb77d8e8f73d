#![allow(dead_code)]

use fqs::{LatentTensor, Shape, SpectralField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: Shape, seed: u64) -> LatentTensor {
    let mut r = rng(seed);
    let data = (0..shape.len()).map(|_| r.sample(StandardNormal)).collect();
    LatentTensor::new(shape, data).unwrap()
}

/// Complex spectrum with independent normal real/imaginary parts (not Hermitian).
pub fn random_spectrum(shape: Shape, seed: u64) -> SpectralField {
    let mut r = rng(seed);
    let data = (0..shape.len())
        .map(|_| Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
        .collect();
    SpectralField::new(shape, data).unwrap()
}

/// Centered offsets `(ky, kx)` of every bin in row-major order.
pub fn offsets(height: usize, width: usize) -> Vec<(i64, i64)> {
    let (h2, w2) = ((height / 2) as i64, (width / 2) as i64);
    let mut out = Vec::with_capacity(height * width);
    for row in 0..height as i64 {
        for col in 0..width as i64 {
            out.push((row - h2, col - w2));
        }
    }
    out
}

pub fn max_abs_diff(a: &LatentTensor, b: &LatentTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
