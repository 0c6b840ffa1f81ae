use entropia::gibbs::{PriorKind, SgldChain};
use entropia::nn::WeightVector;
use entropia::optim::{sgld_step, FnGradient, InverseTemperature, ScheduleSpec};
use entropia::rng::RngStream;
use statrs::distribution::{ContinuousCDF, Normal};

/// Kolmogorov-Smirnov statistic of `xs` against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

// 1% critical value of the one-sample KS test for large n.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn sgld_noise_is_gaussian_with_the_right_scale() {
    let (step, beta) = (0.3, 2.0);
    let mut rng = RngStream::new(3);
    let w = WeightVector::zeros(20_000);
    let out = sgld_step(
        &w,
        &vec![0.0; w.len()],
        step,
        InverseTemperature::Finite(beta),
        &mut rng,
    )
    .unwrap();
    let normal = Normal::new(0.0, (step / beta).sqrt()).unwrap();
    let d = ks(out.into_inner(), |x| normal.cdf(x));
    assert!(d < ks_critical(20_000), "KS statistic {d}");
}

#[test]
fn quadratic_chain_samples_the_gaussian_gibbs_measure() {
    // Risk x^2/2 with coupling gamma around c: the Gibbs measure is
    // N(gamma c / (1 + gamma), 1 / (tau (1 + gamma))).
    let (center, gamma, tau) = (1.0, 1.0, 2.0);
    let grad = FnGradient::new(1, |w: &[f64]| vec![w[0]]);
    let mut chain = SgldChain::new(
        grad,
        &[center],
        gamma,
        tau,
        PriorKind::Gaussian,
        ScheduleSpec::constant(0.002),
    )
    .unwrap();
    let mut rng = RngStream::new(4);
    chain.run(5_000, &mut rng, |_| Ok(())).unwrap();
    let mut thinned = Vec::new();
    let mut i = 0;
    chain
        .run(2_000_000, &mut rng, |s| {
            i += 1;
            if i % 1000 == 0 {
                thinned.push(s[0]);
            }
            Ok(())
        })
        .unwrap();
    let target = Normal::new(
        gamma * center / (1.0 + gamma),
        (1.0 / (tau * (1.0 + gamma))).sqrt(),
    )
    .unwrap();
    let d = ks(thinned.clone(), |x| target.cdf(x));
    assert!(d < ks_critical(thinned.len()), "KS statistic {d}");
}
