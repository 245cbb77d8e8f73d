//! Write a tensor and a trajectory to FQS1 files and read them back.

use std::collections::BTreeMap;

use fqs::container::{read_tensor, read_trajectory};
use fqs::{write_container, LatentTensor, Shape, Trajectory, TrajectoryRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let shape = Shape::new(4, 4, 2);

    let ramp = LatentTensor::from_fn(shape, |c, y, x| (c * 16 + y * 4 + x) as f64 * 0.25);
    let tensor_path = dir.path().join("ramp.fqs");
    let bytes = write_container(ramp.clone(), &tensor_path)?;
    println!("tensor: {bytes} bytes, shape {:?}", ramp.shape());
    assert_eq!(read_tensor(&tensor_path)?, ramp);

    // A record may omit any branch; only the stored ones cost space.
    let records = (0..3)
        .map(|i| TrajectoryRecord {
            step_index: i,
            timestep: 999.0 - 499.0 * i as f64,
            x_t: Some(ramp.scale(1.0 - 0.5 * i as f64)),
            eps_cond: Some(LatentTensor::filled(shape, 0.5)),
            eps_uncond: (i != 1).then(|| LatentTensor::filled(shape, -0.5)),
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("omega".to_owned(), "7.5".to_owned());
    let traj = Trajectory::new(records, metadata)?;
    let traj_path = dir.path().join("run.fqs");
    let bytes = write_container(traj.clone(), &traj_path)?;

    let back = read_trajectory(&traj_path)?;
    println!(
        "trajectory: {bytes} bytes, {} records, omega {}",
        back.len(),
        back.metadata["omega"]
    );
    for rec in back.records() {
        let present: Vec<&str> = [
            ("x_t", rec.x_t.is_some()),
            ("eps_cond", rec.eps_cond.is_some()),
            ("eps_uncond", rec.eps_uncond.is_some()),
        ]
        .iter()
        .filter(|p| p.1)
        .map(|p| p.0)
        .collect();
        println!("  step {} t = {}: {}", rec.step_index, rec.timestep, present.join(", "));
    }
    assert_eq!(back, traj);
    Ok(())
}
