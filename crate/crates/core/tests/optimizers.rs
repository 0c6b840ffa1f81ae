use entropia::nn::{LabeledDataset, NetworkSpec, WeightVector};
use entropia::optim::{
    run_training, sgld_step, Algorithm, InverseTemperature, LocalEntropyConfig, ScheduleSpec,
    TrainingPlan,
};
use entropia::rng::RngStream;

fn toy() -> (NetworkSpec, LabeledDataset) {
    let spec = NetworkSpec::binary(2, &[4]).unwrap();
    let data = LabeledDataset::new(
        vec![1.0, 0.0, -1.0, 0.0, 2.0, 0.5, -2.0, -0.5],
        2,
        vec![1, 0, 1, 0],
        2,
    )
    .unwrap();
    (spec, data)
}

#[test]
fn sgld_at_infinite_inverse_temperature_is_sgd() {
    let w = WeightVector::from(vec![0.5, -1.0, 2.0]);
    let g = [1.0, 2.0, -4.0];
    let mut rng = RngStream::new(1);
    let out = sgld_step(&w, &g, 0.1, InverseTemperature::Infinite, &mut rng).unwrap();
    assert_eq!(out.as_slice(), &[0.55, -0.9, 1.8]);
    // No noise means no randomness consumed.
    assert_eq!(rng.counter(), RngStream::new(1).counter());
    let cold = sgld_step(
        &w,
        &g,
        0.1,
        InverseTemperature::Finite(1e300),
        &mut RngStream::new(1),
    )
    .unwrap();
    for (a, b) in cold.as_slice().iter().zip(out.as_slice()) {
        assert!((a - b).abs() < 1e-140);
    }
}

fn train_with(algorithm: Algorithm, tau: f64, beta: f64, batch: usize, seed: u64) -> WeightVector {
    let (spec, data) = toy();
    let mut cfg = LocalEntropyConfig::new(1.0, tau, beta).with_base_lr(0.5);
    cfg.l = 3;
    cfg.k = batch;
    let plan = TrainingPlan::new(algorithm, cfg, 3);
    let init = spec.init_weights(&mut RngStream::new(seed));
    run_training(
        &plan,
        &spec,
        &data,
        init,
        &mut RngStream::new(seed + 1),
        |_| Ok(()),
    )
    .unwrap()
    .final_weights
}

fn train(algorithm: Algorithm, beta: f64, seed: u64) -> WeightVector {
    train_with(algorithm, 100.0, beta, 2, seed)
}

#[test]
fn runs_are_reproducible_per_seed() {
    for algorithm in [
        Algorithm::Sgd,
        Algorithm::Sgld,
        Algorithm::EntropySgd,
        Algorithm::EntropySgld,
    ] {
        assert_eq!(
            train(algorithm, 1.0, 7),
            train(algorithm, 1.0, 7),
            "{algorithm}"
        );
        assert_ne!(
            train(algorithm, 1.0, 7),
            train(algorithm, 1.0, 8),
            "{algorithm}"
        );
    }
}

#[test]
fn entropy_sgld_approaches_entropy_sgd_as_beta_grows() {
    // Full batches and negligible inner noise, so the extra draws made by the
    // outer noise cannot change the rest of the trajectory.
    let tau = 1e16;
    let sgd = train_with(Algorithm::EntropySgd, tau, 1.0, 4, 3);
    let far = train_with(Algorithm::EntropySgld, tau, 1e-14, 4, 3).distance(&sgd);
    let near = train_with(Algorithm::EntropySgld, tau, 1e12, 4, 3).distance(&sgd);
    assert!(far > 1e-2, "far {far}");
    assert!(near < 1e-5, "near {near}");
}

#[test]
fn ticks_are_reported_once_per_epoch() {
    let (spec, data) = toy();
    let cfg = LocalEntropyConfig::new(1.0, 100.0, 1.0);
    let plan = TrainingPlan::new(Algorithm::EntropySgld, cfg, 4);
    let mut ticks = Vec::new();
    run_training(
        &plan,
        &spec,
        &data,
        spec.init_weights(&mut RngStream::new(0)),
        &mut RngStream::new(1),
        |t| {
            ticks.push(t.tick);
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(ticks, vec![1, 2, 3, 4]);
}

#[test]
fn outer_schedule_decays_polynomially() {
    let s = ScheduleSpec::outer(0.2);
    assert_eq!(s.step(1), 0.2);
    assert!((s.step(32) - 0.2 * 32f64.powf(-0.6)).abs() < 1e-15);
    let inner = ScheduleSpec::inner(0.4);
    assert!((inner.step(4) - 0.1).abs() < 1e-15);
}
