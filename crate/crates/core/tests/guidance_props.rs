mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::{max_abs_diff, random_tensor};
use fqs::toy::{fixtures, make_schedule, sample, ConditionLabel};
use fqs::{
    build_radial_mask, decompose, energy_radius, fft2_centered, freqscale, guided_step, noise_difference,
    process_trajectory, CutoffPolicy, Error, GuidanceConfig, LatentTensor, ScaleSchedule, Shape, Target, Trajectory,
    TrajectoryRecord,
};
use proptest::prelude::*;

fn record(step: usize, cond: Option<LatentTensor>, uncond: Option<LatentTensor>) -> TrajectoryRecord {
    TrajectoryRecord {
        step_index: step,
        timestep: (1000 - step) as f64,
        x_t: None,
        eps_cond: cond,
        eps_uncond: uncond,
    }
}

fn plain_cfg(cond: &LatentTensor, uncond: &LatentTensor, omega: f64) -> LatentTensor {
    let data = cond
        .data()
        .iter()
        .zip(uncond.data())
        .map(|(c, u)| u + omega * (c - u))
        .collect();
    LatentTensor::new(cond.shape(), data).unwrap()
}

fn policy(energy: bool, r0: f64) -> CutoffPolicy {
    if energy {
        CutoffPolicy::energy(r0).unwrap()
    } else {
        CutoffPolicy::spatial(r0).unwrap()
    }
}

fn high_fraction(u: &LatentTensor, radius: f64) -> f64 {
    let s = u.shape();
    let mask = build_radial_mask(s.height, s.width, radius).unwrap();
    let (_, hi) = decompose(u, &mask).unwrap();
    hi.norm_sq() / u.norm_sq()
}

fn case() -> impl Strategy<Value = (Shape, u64)> {
    (1usize..=16, 1usize..=16, 1usize..=4, any::<u64>()).prop_map(|(h, w, c, seed)| (Shape::new(h, w, c), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unit_scales_reproduce_plain_cfg(
        (shape, seed) in case(),
        omega in 0.0f64..20.0,
        energy in any::<bool>(),
        r0 in 0.0f64..=1.0,
    ) {
        let cond = random_tensor(shape, seed);
        let uncond = random_tensor(shape, seed.wrapping_add(1));
        let cfg = GuidanceConfig::plain(omega, policy(energy, r0)).unwrap();
        let out = guided_step(&record(0, Some(cond.clone()), Some(uncond.clone())), &cfg, 0).unwrap();
        prop_assert!(max_abs_diff(&out.eps_hat, &plain_cfg(&cond, &uncond, omega)) <= 1e-8);
        prop_assert!(max_abs_diff(&out.delta_scaled, &out.delta_raw) <= 1e-9);
    }

    #[test]
    fn spectral_path_equals_band_path(
        (shape, seed) in case(),
        l in 0.0f64..4.0,
        h in 0.0f64..4.0,
        frac in 0.0f64..1.0,
    ) {
        let delta = random_tensor(shape, seed);
        let radius = frac * (shape.height.min(shape.width) as f64);
        let mask = build_radial_mask(shape.height, shape.width, radius).unwrap();
        let (dl, dh) = decompose(&delta, &mask).unwrap();
        let bands = dl.scale(l).add_scaled(h, &dh).unwrap();
        prop_assert!(max_abs_diff(&freqscale(&delta, &mask, l, h).unwrap(), &bands) <= 1e-9);
    }

    #[test]
    fn linear_in_scales(
        (shape, seed) in case(),
        l1 in -2.0f64..2.0, h1 in -2.0f64..2.0,
        l2 in -2.0f64..2.0, h2 in -2.0f64..2.0,
    ) {
        let delta = random_tensor(shape, seed);
        let mask = build_radial_mask(shape.height, shape.width, 2.0).unwrap();
        let sum = freqscale(&delta, &mask, l1 + l2, h1 + h2).unwrap();
        let parts = freqscale(&delta, &mask, l1, h1)
            .unwrap()
            .add(&freqscale(&delta, &mask, l2, h2).unwrap())
            .unwrap();
        prop_assert!(max_abs_diff(&sum, &parts) <= 1e-9);
    }

    #[test]
    fn composition(
        (shape, seed) in case(),
        l1 in 0.0f64..3.0, h1 in 0.0f64..3.0,
        l2 in 0.0f64..3.0, h2 in 0.0f64..3.0,
        radius in 0.0f64..8.0,
    ) {
        let delta = random_tensor(shape, seed);
        let mask = build_radial_mask(shape.height, shape.width, radius).unwrap();
        let twice = freqscale(&freqscale(&delta, &mask, l1, h1).unwrap(), &mask, l2, h2).unwrap();
        let once = freqscale(&delta, &mask, l1 * l2, h1 * h2).unwrap();
        prop_assert!(max_abs_diff(&twice, &once) <= 1e-9);
    }

    #[test]
    fn high_scale_orders_high_band_fraction(
        (h, w, c, seed) in (3usize..=16, 3usize..=16, 1usize..=4, any::<u64>()),
        boost in 1.05f64..4.0,
        cut in 0.05f64..0.95,
        energy in any::<bool>(),
        r0 in 0.2f64..0.8,
    ) {
        let shape = Shape::new(h, w, c);
        let cond = random_tensor(shape, seed);
        let uncond = random_tensor(shape, seed.wrapping_add(7));
        let rec = record(0, Some(cond), Some(uncond));
        let run = |high: f64| {
            let cfg = GuidanceConfig::new(
                3.0,
                ScaleSchedule::constant(1.0, high).unwrap(),
                policy(energy, r0),
                Target::Delta,
            )
            .unwrap();
            guided_step(&rec, &cfg, 0).unwrap()
        };
        for high in [boost, cut] {
            let out = run(high);
            let before = high_fraction(&out.delta_raw, out.radius_used);
            let after = high_fraction(&out.delta_scaled, out.radius_used);
            // Both bands must carry energy for the ordering to be strict.
            prop_assume!(before > 1e-9 && before < 1.0 - 1e-9);
            if high > 1.0 {
                prop_assert!(after > before, "h = {high}: {after} <= {before}");
            } else {
                prop_assert!(after < before, "h = {high}: {after} >= {before}");
            }
        }
    }

    #[test]
    fn bitwise_deterministic((shape, seed) in case(), energy in any::<bool>()) {
        let rec = record(0, Some(random_tensor(shape, seed)), Some(random_tensor(shape, !seed)));
        let cfg = GuidanceConfig::new(
            7.5,
            ScaleSchedule::constant(0.8, 1.7).unwrap(),
            policy(energy, 0.5),
            Target::Delta,
        )
        .unwrap();
        let a = guided_step(&rec, &cfg, 0).unwrap();
        let b = guided_step(&rec, &cfg, 0).unwrap();
        let bits = |t: &LatentTensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.eps_hat), bits(&b.eps_hat));
        prop_assert_eq!(bits(&a.delta_scaled), bits(&b.delta_scaled));
        prop_assert_eq!(a.radius_used.to_bits(), b.radius_used.to_bits());
    }
}

#[test]
fn noise_difference_examples() {
    let shape = Shape::new(8, 8, 4);
    let u = random_tensor(shape, 1);
    let v = random_tensor(shape, 2);
    assert_eq!(noise_difference(&u, &u).unwrap(), LatentTensor::zeros(shape));
    assert_eq!(noise_difference(&u, &LatentTensor::zeros(shape)).unwrap(), u);
    let d = noise_difference(&u, &v).unwrap();
    for i in 0..shape.len() {
        assert_eq!(d.data()[i], u.data()[i] - v.data()[i]);
    }
    assert!(matches!(
        noise_difference(&u, &random_tensor(Shape::new(8, 4, 4), 0)),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn freqscale_examples() {
    let shape = Shape::new(16, 16, 2);
    let delta = random_tensor(shape, 9);
    let mask = build_radial_mask(16, 16, 3.0).unwrap();
    assert!(max_abs_diff(&freqscale(&delta, &mask, 1.0, 1.0).unwrap(), &delta) <= 1e-9);
    assert!(freqscale(&delta, &mask, 0.0, 0.0).unwrap().max_abs() <= 1e-12);

    let tone = LatentTensor::from_fn(shape, |c, y, x| {
        (1.0 + c as f64) * ((2.0 * PI * x as f64 / 16.0).cos() + (2.0 * PI * y as f64 / 16.0).sin())
    });
    let out = freqscale(&tone, &mask, 2.0, 5.0).unwrap();
    assert!(max_abs_diff(&out, &tone.scale(2.0)) <= 1e-9);
}

#[test]
fn omega_zero_ignores_scales() {
    let shape = Shape::new(12, 12, 2);
    let uncond = random_tensor(shape, 3);
    let rec = record(0, Some(random_tensor(shape, 4)), Some(uncond.clone()));
    let cfg = GuidanceConfig::new(
        0.0,
        ScaleSchedule::constant(3.0, 0.2).unwrap(),
        CutoffPolicy::energy(0.5).unwrap(),
        Target::Delta,
    )
    .unwrap();
    assert_eq!(guided_step(&rec, &cfg, 0).unwrap().eps_hat, uncond);
}

#[test]
fn epsilon_target_boosts_conditional_high_band() {
    let shape = Shape::new(16, 16, 4);
    let cond = random_tensor(shape, 12);
    let cfg = GuidanceConfig::new(
        1.0,
        ScaleSchedule::constant(1.0, 1.5).unwrap(),
        CutoffPolicy::spatial(0.3).unwrap(),
        Target::Epsilon,
    )
    .unwrap();
    let out = guided_step(&record(0, Some(cond.clone()), None), &cfg, 0).unwrap();
    assert_eq!(out.radius_used, 0.3 * 8.0);
    let mask = build_radial_mask(16, 16, 2.4).unwrap();
    let (lo, hi) = decompose(&cond, &mask).unwrap();
    assert!(max_abs_diff(&out.eps_hat, &lo.add_scaled(1.5, &hi).unwrap()) <= 1e-9);
    assert_eq!(out.delta_raw, cond);
}

#[test]
fn missing_branches_are_reported() {
    let shape = Shape::new(4, 4, 1);
    let cfg = GuidanceConfig::plain(2.0, CutoffPolicy::spatial(0.3).unwrap()).unwrap();
    let no_uncond = record(0, Some(random_tensor(shape, 0)), None);
    assert!(matches!(
        guided_step(&no_uncond, &cfg, 0),
        Err(Error::MissingBranch("eps_uncond"))
    ));
    let no_cond = record(0, None, Some(random_tensor(shape, 0)));
    assert!(matches!(
        guided_step(&no_cond, &cfg, 0),
        Err(Error::MissingBranch("eps_cond"))
    ));

    let eps_cfg = GuidanceConfig::new(
        1.0,
        ScaleSchedule::constant(1.0, 1.2).unwrap(),
        CutoffPolicy::spatial(0.3).unwrap(),
        Target::Epsilon,
    )
    .unwrap();
    assert!(matches!(
        guided_step(&no_cond, &eps_cfg, 0),
        Err(Error::MissingBranch("eps_cond"))
    ));
    assert!(guided_step(&no_uncond, &eps_cfg, 0).is_ok());

    let traj = Trajectory::new(
        vec![
            record(0, Some(random_tensor(shape, 1)), Some(random_tensor(shape, 2))),
            record(1, Some(random_tensor(shape, 3)), None),
        ],
        BTreeMap::new(),
    )
    .unwrap();
    match process_trajectory(&traj, &cfg) {
        Err(Error::AtStep { step: 1, source }) => {
            assert!(matches!(*source, Error::MissingBranch("eps_uncond")))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn schedule_past_its_end_is_an_error() {
    let shape = Shape::new(4, 4, 1);
    let cfg = GuidanceConfig::new(
        1.0,
        ScaleSchedule::linear_decay(1.0, 1.5, 3).unwrap(),
        CutoffPolicy::spatial(0.3).unwrap(),
        Target::Delta,
    )
    .unwrap();
    let rec = record(3, Some(random_tensor(shape, 0)), Some(random_tensor(shape, 1)));
    assert!(matches!(
        guided_step(&rec, &cfg, 3),
        Err(Error::ScheduleStep { step: 3, total: 3 })
    ));
    assert!(GuidanceConfig::plain(-1.0, CutoffPolicy::spatial(0.3).unwrap()).is_err());
    assert!(GuidanceConfig::plain(f64::INFINITY, CutoffPolicy::spatial(0.3).unwrap()).is_err());
}

#[test]
fn empty_trajectory_gives_no_outputs() {
    let traj = Trajectory::new(vec![], BTreeMap::new()).unwrap();
    let cfg = GuidanceConfig::plain(5.0, CutoffPolicy::energy(0.9).unwrap()).unwrap();
    assert!(process_trajectory(&traj, &cfg).unwrap().is_empty());
}

#[test]
fn fifty_step_trajectory_with_unit_scales() {
    let shape = Shape::new(16, 16, 4);
    let records = (0..50)
        .map(|s| {
            record(
                s,
                Some(random_tensor(shape, 2 * s as u64)),
                Some(random_tensor(shape, 2 * s as u64 + 1)),
            )
        })
        .collect();
    let traj = Trajectory::new(records, BTreeMap::new()).unwrap();
    let cfg = GuidanceConfig::new(
        7.5,
        ScaleSchedule::linear_decay(1.0, 1.0, 50).unwrap(),
        CutoffPolicy::energy(0.9).unwrap(),
        Target::Delta,
    )
    .unwrap();
    let out = process_trajectory(&traj, &cfg).unwrap();
    assert_eq!(out.len(), 50);
    for (o, rec) in out.iter().zip(traj.records()) {
        assert!(max_abs_diff(&o.delta_scaled, &o.delta_raw) <= 1e-8);
        let cond = rec.eps_cond.as_ref().unwrap();
        let uncond = rec.eps_uncond.as_ref().unwrap();
        assert_eq!(o.delta_raw, noise_difference(cond, uncond).unwrap());
    }
    // Parallel evaluation still returns steps in order and bit-identically.
    assert_eq!(process_trajectory(&traj, &cfg).unwrap(), out);
}

#[test]
fn energy_radii_recomputed_per_step() {
    let gmm = fixtures::coarse_to_fine(fixtures::DEFAULT_SHAPE);
    let schedule = make_schedule(1000, 1e-4, 0.02).unwrap();
    let plain = GuidanceConfig::plain(2.0, CutoffPolicy::spatial(0.3).unwrap()).unwrap();
    let run = sample(&gmm, &schedule, &plain, &ConditionLabel::new(fixtures::TEXTURED), 5, 10).unwrap();
    assert_eq!(run.trajectory.len(), 10);

    let cfg = GuidanceConfig::new(
        2.0,
        ScaleSchedule::constant(1.0, 1.5).unwrap(),
        CutoffPolicy::energy(0.9).unwrap(),
        Target::Delta,
    )
    .unwrap();
    let out = process_trajectory(&run.trajectory, &cfg).unwrap();
    for (o, rec) in out.iter().zip(run.trajectory.records()) {
        let delta = rec
            .eps_cond
            .as_ref()
            .unwrap()
            .sub(rec.eps_uncond.as_ref().unwrap())
            .unwrap();
        let expected = energy_radius(&fft2_centered(&delta), 0.9).unwrap();
        assert_eq!(o.radius_used, expected as f64, "step {}", rec.step_index);
    }
}
