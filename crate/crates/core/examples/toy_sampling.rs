//! Sample the two-tone mixture with different high-band scales and measure
//! how much of each result sits above the cutoff.

use fqs::toy::{fixtures, make_schedule, sample_batch, ConditionLabel};
use fqs::{build_radial_mask, decompose, CutoffPolicy, GuidanceConfig, ScaleSchedule, Target};

fn main() -> fqs::Result<()> {
    let shape = fixtures::DEFAULT_SHAPE;
    let gmm = fixtures::two_tone(shape);
    let schedule = make_schedule(1000, 1e-4, 0.02)?;
    let label = ConditionLabel::new(fixtures::TEXTURED);
    let seeds: Vec<u64> = (0..32).collect();
    let mask = build_radial_mask(shape.height, shape.width, 0.3 * 8.0)?;

    for h in [0.5, 1.0, 1.5, 2.0] {
        let cfg = GuidanceConfig::new(
            2.0,
            ScaleSchedule::constant(1.0, h)?,
            CutoffPolicy::spatial(0.3)?,
            Target::Delta,
        )?;
        let runs = sample_batch(&gmm, &schedule, &cfg, &label, &seeds, 50)?;
        let mut fraction = 0.0;
        for run in &runs {
            let (_, high) = decompose(&run.x0, &mask)?;
            fraction += high.norm_sq() / run.x0.norm_sq();
        }
        println!(
            "h = {h:<4} mean high-band energy fraction {:.4}",
            fraction / runs.len() as f64
        );
    }
    Ok(())
}
