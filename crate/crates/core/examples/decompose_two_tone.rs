//! Split a smooth field plus a checkerboard into its low and high bands.

use fqs::toy::fixtures;
use fqs::{build_radial_mask, decompose, spatial_ratio_radius, Shape};

fn main() -> fqs::Result<()> {
    let shape = Shape::new(16, 16, 1);
    let smooth = fixtures::low_modes(shape);
    let texture = fixtures::checkerboard(shape).scale(0.5);
    let field = smooth.add(&texture)?;

    let radius = spatial_ratio_radius(shape.height, shape.width, 0.3)?;
    let mask = build_radial_mask(shape.height, shape.width, radius)?;
    println!(
        "radius {radius}: {} low bins, {} high bins",
        mask.low_count(),
        mask.high_count()
    );

    let (low, high) = decompose(&field, &mask)?;
    println!("low band vs smooth part:  max error {:.2e}", low.max_abs_diff(&smooth));
    println!(
        "high band vs checkerboard: max error {:.2e}",
        high.max_abs_diff(&texture)
    );
    println!(
        "reconstruction error:      {:.2e}",
        low.add(&high)?.max_abs_diff(&field)
    );
    println!(
        "energy: total {:.3}, low {:.3}, high {:.3}",
        field.norm_sq(),
        low.norm_sq(),
        high.norm_sq()
    );
    Ok(())
}
