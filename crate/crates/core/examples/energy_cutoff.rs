//! Compare the spatial and energy cutoff rules on fields of different roughness.

use fqs::toy::fixtures;
use fqs::{energy_radius, fft2_centered, spatial_ratio_radius, LatentTensor, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> fqs::Result<()> {
    let shape = Shape::new(32, 32, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = LatentTensor::new(shape, (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect())?;
    let fields = [
        ("smooth", fixtures::low_modes(shape)),
        ("checkerboard", fixtures::checkerboard(shape)),
        ("white noise", noise),
    ];

    println!(
        "spatial r0 = 0.3 gives radius {} for every field",
        spatial_ratio_radius(32, 32, 0.3)?
    );
    println!("{:<14}{:>8}{:>8}{:>8}", "field", "r0=0.5", "r0=0.9", "r0=1");
    for (name, field) in &fields {
        let spectrum = fft2_centered(field);
        let radii: Vec<u32> = [0.5, 0.9, 1.0]
            .iter()
            .map(|&r0| energy_radius(&spectrum, r0))
            .collect::<fqs::Result<_>>()?;
        println!("{name:<14}{:>8}{:>8}{:>8}", radii[0], radii[1], radii[2]);
    }
    Ok(())
}
