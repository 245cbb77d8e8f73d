//! Track where the guidance difference concentrates over a sampling run.

use fqs::diagnostics::{energy_curve, radial_profile};
use fqs::toy::{fixtures, make_schedule, sample, ConditionLabel};
use fqs::{fft2_centered, CutoffPolicy, GuidanceConfig};

fn main() -> fqs::Result<()> {
    let gmm = fixtures::coarse_to_fine(fixtures::DEFAULT_SHAPE);
    let schedule = make_schedule(1000, 1e-4, 0.02)?;
    let cfg = GuidanceConfig::plain(2.0, CutoffPolicy::spatial(0.3)?)?;
    let run = sample(&gmm, &schedule, &cfg, &ConditionLabel::new(fixtures::TEXTURED), 0, 30)?;

    println!("{:>4}{:>8}{:>10}{:>12}", "step", "t", "E(R<=2)", "R(r0=0.9)");
    for rec in run.trajectory.records().iter().step_by(3) {
        let delta = rec.eps_cond.as_ref().unwrap().sub(rec.eps_uncond.as_ref().unwrap())?;
        let spectrum = fft2_centered(&delta);
        let curve = energy_curve(&spectrum)?;
        println!(
            "{:>4}{:>8}{:>10.3}{:>12}",
            rec.step_index,
            rec.timestep,
            curve.fraction_at(2),
            curve.crossing(0.9)
        );
    }

    let last = run.trajectory.records().last().unwrap();
    let delta = last.eps_cond.as_ref().unwrap().sub(last.eps_uncond.as_ref().unwrap())?;
    let profile = radial_profile(&fft2_centered(&delta))?;
    println!("final step, log amplitude relative to DC:");
    for (r, v) in profile.relative_log.iter().enumerate() {
        match v {
            Some(v) => println!("  r = {r:>2}: {v:>8.3}"),
            None => println!("  r = {r:>2}:   (zero)"),
        }
    }
    Ok(())
}
