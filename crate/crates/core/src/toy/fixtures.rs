//! Mixtures used by the examples, the CLI and the test suites.

use std::f64::consts::PI;

use super::mixture::{GaussianMixture, MixtureComponent};
use crate::tensor::{LatentTensor, Shape};

pub const DEFAULT_SHAPE: Shape = Shape::new(16, 16, 1);

pub const SMOOTH: &str = "smooth";
pub const TEXTURED: &str = "textured";
pub const TARGET: &str = "target";

/// Per-component variance of the shipped two-component mixture.
pub const TWO_TONE_VARIANCE: f64 = 0.05;
pub const CHECKER_AMPLITUDE: f64 = 0.5;

/// `cos(2 pi x / W) + cos(2 pi y / H)`: the two lowest nonzero modes.
pub fn low_modes(shape: Shape) -> LatentTensor {
    LatentTensor::from_fn(shape, |_, y, x| {
        (2.0 * PI * x as f64 / shape.width as f64).cos() + (2.0 * PI * y as f64 / shape.height as f64).cos()
    })
}

/// `(-1)^(x + y)`: the highest-frequency tone on the grid.
pub fn checkerboard(shape: Shape) -> LatentTensor {
    LatentTensor::from_fn(shape, |_, y, x| if (x + y) % 2 == 0 { 1.0 } else { -1.0 })
}

/// Single point mass at `mean`, labelled [`TARGET`].
pub fn point_mass(mean: LatentTensor) -> GaussianMixture {
    GaussianMixture::new(vec![MixtureComponent {
        mean,
        variance: 0.0,
        weight: 1.0,
        label: TARGET.into(),
    }])
    .expect("valid point mass")
}

/// Smooth mean used by [`point_mass`] in examples and tests.
pub fn point_mass_mean(shape: Shape) -> LatentTensor {
    LatentTensor::from_fn(shape, |c, y, x| {
        0.5 * (2.0 * PI * x as f64 / shape.width as f64).sin() - 0.25 * (c as f64 + 1.0)
            + 0.1 * y as f64 / shape.height as f64
    })
}

/// Equal-weight mixture of a smooth component (the two lowest cosine modes,
/// labelled [`SMOOTH`]) and the same plus a checkerboard (labelled [`TEXTURED`]).
pub fn two_tone(shape: Shape) -> GaussianMixture {
    let smooth = low_modes(shape);
    let textured = smooth
        .add_scaled(CHECKER_AMPLITUDE, &checkerboard(shape))
        .expect("same shape");
    GaussianMixture::new(vec![
        MixtureComponent {
            mean: smooth,
            variance: TWO_TONE_VARIANCE,
            weight: 0.5,
            label: SMOOTH.into(),
        },
        MixtureComponent {
            mean: textured,
            variance: TWO_TONE_VARIANCE,
            weight: 0.5,
            label: TEXTURED.into(),
        },
    ])
    .expect("valid two-tone mixture")
}

/// Three components where the conditioned class differs from the other in
/// coarse structure and, within itself, in fine texture:
///
/// * [`SMOOTH`]: the low modes
/// * [`TEXTURED`] (two components): low modes plus a coarse offset, plus or
///   minus a checkerboard
///
/// Under noise the coarse difference is resolved first and the texture
/// sign only later, so the guidance difference moves from low to high
/// frequencies as sampling proceeds.
pub fn coarse_to_fine(shape: Shape) -> GaussianMixture {
    const VARIANCE: f64 = 1.0;
    const OFFSET: f64 = 0.15;
    const TEXTURE: f64 = 0.35;
    let base = low_modes(shape);
    let coarse = LatentTensor::from_fn(shape, |_, y, _| {
        OFFSET * (1.0 + (2.0 * PI * y as f64 / shape.height as f64).cos())
    });
    let shifted = base.add(&coarse).expect("same shape");
    let checker = checkerboard(shape);
    let comp = |mean: LatentTensor, weight: f64, label: &str| MixtureComponent {
        mean,
        variance: VARIANCE,
        weight,
        label: label.into(),
    };
    GaussianMixture::new(vec![
        comp(base, 0.5, SMOOTH),
        comp(shifted.add_scaled(TEXTURE, &checker).unwrap(), 0.25, TEXTURED),
        comp(shifted.add_scaled(-TEXTURE, &checker).unwrap(), 0.25, TEXTURED),
    ])
    .expect("valid coarse-to-fine mixture")
}
