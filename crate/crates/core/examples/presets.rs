//! List the built-in task presets and layer a user override on one.

use fqs::config::{find_preset, RunConfig, PRESETS};

fn main() -> fqs::Result<()> {
    println!(
        "{:<24}{:>5}{:>5}{:>6}  {:<8}{:<8}omega",
        "preset", "l", "h", "r0", "cutoff", "target"
    );
    for p in PRESETS {
        let omega = p.omega.map_or("-".to_owned(), |w| w.to_string());
        println!(
            "{:<24}{:>5}{:>5}{:>6}  {:<8}{:<8}{omega}",
            p.name,
            p.l,
            p.h,
            p.r0,
            p.strategy.to_string(),
            p.target.to_string()
        );
    }

    let user = RunConfig::from_toml("[guidance]\nh = 1.3\nomega = 5.0\n")?;
    let merged = find_preset("generation-sd3")?.to_config().merge(user);
    let cfg = merged.guidance_config(50, None)?;
    println!(
        "\ngeneration-sd3 with h = 1.3: omega {}, h {}, cutoff {} r0 {}",
        cfg.omega,
        cfg.schedule.eval(0)?.high,
        cfg.cutoff.strategy(),
        cfg.cutoff.r0()
    );
    println!("\n{}", merged.to_toml());
    Ok(())
}
