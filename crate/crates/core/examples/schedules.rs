//! Print the high-band scale over a 50-step run for each schedule kind.

use fqs::ScaleSchedule;

fn main() -> fqs::Result<()> {
    let steps = 50;
    let schedules = [
        ("constant", ScaleSchedule::constant(1.0, 1.5)?),
        ("decay", ScaleSchedule::linear_decay(1.0, 1.5, steps)?),
        ("growth", ScaleSchedule::linear_growth(1.0, 1.5, steps)?),
    ];
    print!("{:>5}", "step");
    for (name, _) in &schedules {
        print!("{name:>10}");
    }
    println!();
    for step in (0..steps).filter(|s| s % 7 == 0 || *s == steps - 1) {
        print!("{step:>5}");
        for (_, s) in &schedules {
            print!("{:>10.4}", s.eval(step)?.high);
        }
        println!();
    }
    Ok(())
}
