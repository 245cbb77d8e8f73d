//! Re-guide a recorded trajectory with band scaling, step by step.

use std::path::Path;

use fqs::container::read_trajectory;
use fqs::{process_trajectory, CutoffPolicy, GuidanceConfig, ScaleSchedule, Target};

fn main() -> fqs::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_trajectory.fqs");
    let traj = read_trajectory(&path)?;
    let omega: f64 = traj.metadata["omega"].parse().unwrap_or(3.0);
    println!("{} records, omega {omega}", traj.len());

    let plain = GuidanceConfig::plain(omega, CutoffPolicy::energy(0.5)?)?;
    let boosted = GuidanceConfig::new(
        omega,
        ScaleSchedule::linear_growth(1.0, 1.5, traj.len())?,
        CutoffPolicy::energy(0.5)?,
        Target::Delta,
    )?;
    let base = process_trajectory(&traj, &plain)?;
    let scaled = process_trajectory(&traj, &boosted)?;

    println!("{:>4}{:>8}{:>8}{:>14}", "step", "radius", "h", "|change|max");
    for (i, (a, b)) in base.iter().zip(&scaled).enumerate() {
        println!(
            "{i:>4}{:>8}{:>8.3}{:>14.3e}",
            b.radius_used,
            b.scales.high,
            b.eps_hat.max_abs_diff(&a.eps_hat)
        );
    }
    Ok(())
}
