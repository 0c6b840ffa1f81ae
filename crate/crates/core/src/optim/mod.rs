//! SGD, SGLD, Entropy-SGD and Entropy-SGLD.
//!
//! One outer step of Entropy-SG(L)D runs `L` SGLD iterations on the inner
//! potential `tau * R_S(w') + (gamma * tau / 2) |w' - w|^2` starting from
//! `w' = mu = w`, keeps an exponential moving average `mu` of the inner
//! iterates, and then moves `w` toward `mu`:
//!
//! ```text
//! w <- w + 1/2 * eta * tau * gamma * (mu - w) [+ sqrt(eta / beta) * N(0, I)]
//! ```
//!
//! `tau * gamma * (mu - w)` estimates the gradient of the local entropy, so
//! the update ascends it. The Gaussian term is added only for Entropy-SGLD.

mod objective;
mod schedule;
mod training;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::nn::WeightVector;
use crate::rng::RngStream;

pub use objective::{FnGradient, NetworkObjective, RiskGradient};
pub use schedule::{ScheduleKind, ScheduleSpec};
pub use training::{run_training, steps_per_epoch, Algorithm, TickInfo, TrainingPlan, TrainingRun};

/// Base learning rate used to derive the outer step `eta = lr / (gamma * tau)`.
pub const DEFAULT_BASE_LR: f64 = 0.006;

/// Inverse temperature of an SGLD update. `Infinite` switches the noise off
/// exactly, recovering plain SGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseTemperature {
    Finite(f64),
    Infinite,
}

impl InverseTemperature {
    fn noise_scale(self, step: f64) -> Option<f64> {
        match self {
            InverseTemperature::Finite(beta) => Some((step / beta).sqrt()),
            InverseTemperature::Infinite => None,
        }
    }
}

/// `sqrt(2 / tau)`, the factor multiplying the inner SGLD noise once the
/// learning rate is rescaled by `tau / 2`.
pub fn thermal_noise(tau: f64) -> f64 {
    (2.0 / tau).sqrt()
}

/// Inverse temperature giving the requested thermal noise, `2 / noise^2`.
pub fn tau_for_thermal_noise(noise: f64) -> f64 {
    2.0 / (noise * noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropyConfig {
    /// Coupling between `w'` and `w`; the Gaussian prior has covariance `1/(tau gamma) I`.
    pub gamma: f64,
    /// Inverse temperature of the inner Gibbs distribution.
    pub tau: f64,
    /// Inverse temperature of the outer Langevin loop.
    pub beta: f64,
    /// Inner SGLD iterations per outer step.
    pub l: usize,
    /// Minibatch size.
    pub k: usize,
    /// Weight of the newest inner iterate in the moving average.
    pub alpha: f64,
    /// Inner base step; iteration `i` uses `eta_prime / i`.
    pub eta_prime: f64,
    /// Outer base step; outer step `t` uses `eta * t^-0.6`.
    pub eta: f64,
}

impl LocalEntropyConfig {
    /// `L = 20`, `K = 128`, `alpha = 0.75`, inner base `2 / tau` and outer base
    /// `0.006 / (gamma tau)`.
    pub fn new(gamma: f64, tau: f64, beta: f64) -> Self {
        Self {
            gamma,
            tau,
            beta,
            l: 20,
            k: 128,
            alpha: 0.75,
            eta_prime: 2.0 / tau,
            eta: DEFAULT_BASE_LR / (gamma * tau),
        }
    }

    /// Sets the outer base step from a base learning rate, `eta = lr / (gamma tau)`.
    pub fn with_base_lr(mut self, lr: f64) -> Self {
        self.eta = lr / (self.gamma * self.tau);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("gamma", self.gamma)?;
        positive("tau", self.tau)?;
        positive("beta", self.beta)?;
        positive("eta_prime", self.eta_prime)?;
        positive("eta", self.eta)?;
        if self.l == 0 || self.k == 0 {
            return Err(Error::InvalidConfig(format!(
                "L and K must be positive, got L={} K={}",
                self.l, self.k
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn thermal_noise(&self) -> f64 {
        thermal_noise(self.tau)
    }
}

/// One SGLD update `w + step/2 * grad_estimate + sqrt(step / inv_temp) * N(0, I)`.
///
/// `grad_estimate` is the ascent direction (the gradient of the log target).
pub fn sgld_step(
    w: &WeightVector,
    grad_estimate: &[f64],
    step: f64,
    inv_temp: InverseTemperature,
    rng: &mut RngStream,
) -> Result<WeightVector> {
    let mut out = w.clone();
    sgld_step_in_place(out.as_mut_slice(), grad_estimate, step, inv_temp, rng)?;
    Ok(out)
}

pub(crate) fn sgld_step_in_place(
    w: &mut [f64],
    grad_estimate: &[f64],
    step: f64,
    inv_temp: InverseTemperature,
    rng: &mut RngStream,
) -> Result<()> {
    if grad_estimate.len() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient length",
            expected: w.len(),
            got: grad_estimate.len(),
        });
    }
    ensure_finite("gradient estimate", grad_estimate)?;
    if !(step >= 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be nonnegative, got {step}"
        )));
    }
    let half = 0.5 * step;
    for (wi, gi) in w.iter_mut().zip(grad_estimate) {
        *wi += half * gi;
    }
    if let Some(scale) = inv_temp.noise_scale(step) {
        add_gaussian(w, scale, rng);
    }
    Ok(())
}

fn add_gaussian(w: &mut [f64], scale: f64, rng: &mut RngStream) {
    let noise = rng.standard_normal_vec(w.len());
    for (wi, ni) in w.iter_mut().zip(noise) {
        *wi += scale * ni;
    }
}

/// Which algebraic form of the inner update to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerParameterization {
    /// `dw' = -tau * grad - gamma tau (w' - w)`, `w' += eta_i/2 dw' + sqrt(eta_i) N`.
    Original,
    /// Learning rate rescaled to `eta' tau / 2`: `dw' = -grad - gamma (w' - w)`,
    /// `w' += eta_i dw' + sqrt(eta_i) sqrt(2/tau) N`.
    Rescaled,
}

/// Runs the inner SGLD loop and returns every iterate `w'_1..w'_L` together
/// with the moving average `mu`.
pub fn inner_loop_trajectory<G: RiskGradient>(
    objective: &mut G,
    w: &WeightVector,
    cfg: &LocalEntropyConfig,
    form: InnerParameterization,
    rng: &mut RngStream,
) -> Result<(Vec<WeightVector>, WeightVector)> {
    cfg.validate()?;
    if objective.dim() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "objective dimension",
            expected: w.len(),
            got: objective.dim(),
        });
    }
    let center = w.as_slice();
    let mut current = w.clone();
    let mut mu = w.clone();
    let mut iterates = Vec::with_capacity(cfg.l);
    let (gamma, tau, alpha) = (cfg.gamma, cfg.tau, cfg.alpha);
    let rescaled_base = 0.5 * cfg.eta_prime * tau;
    let thermal = thermal_noise(tau);
    for i in 1..=cfg.l {
        let g = objective.gradient(current.as_slice(), rng)?;
        ensure_finite("risk gradient", &g)?;
        let noise = rng.standard_normal_vec(w.len());
        let wp = current.as_mut_slice();
        match form {
            InnerParameterization::Original => {
                let step = cfg.eta_prime / i as f64;
                let (half, scale) = (0.5 * step, step.sqrt());
                for j in 0..wp.len() {
                    let drift = -tau * g[j] - gamma * tau * (wp[j] - center[j]);
                    wp[j] += half * drift + scale * noise[j];
                }
            }
            InnerParameterization::Rescaled => {
                let step = rescaled_base / i as f64;
                let scale = step.sqrt() * thermal;
                for j in 0..wp.len() {
                    let drift = -g[j] - gamma * (wp[j] - center[j]);
                    wp[j] += step * drift + scale * noise[j];
                }
            }
        }
        if let Some(j) = wp.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "inner iterate",
                index: j,
                value: wp[j],
            });
        }
        for (m, &v) in mu.as_mut_slice().iter_mut().zip(wp.iter()) {
            *m = (1.0 - alpha) * *m + alpha * v;
        }
        iterates.push(current.clone());
    }
    Ok((iterates, mu))
}

/// Moving average `mu` of `L` inner SGLD iterates started at `w`; the
/// gradient of the local entropy at `w` is estimated by `tau gamma (mu - w)`.
pub fn inner_loop_estimate<G: RiskGradient>(
    objective: &mut G,
    w: &WeightVector,
    cfg: &LocalEntropyConfig,
    rng: &mut RngStream,
) -> Result<WeightVector> {
    inner_loop_trajectory(objective, w, cfg, InnerParameterization::Original, rng).map(|(_, mu)| mu)
}

/// Outer update `w + step/2 * tau gamma (mu - w)`, plus `sqrt(step/beta) N(0, I)`
/// when `langevin` is set.
pub fn outer_step(
    w: &WeightVector,
    mu: &WeightVector,
    step: f64,
    cfg: &LocalEntropyConfig,
    langevin: bool,
    rng: &mut RngStream,
) -> Result<WeightVector> {
    if mu.len() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "moving average length",
            expected: w.len(),
            got: mu.len(),
        });
    }
    ensure_finite("weights", w.as_slice())?;
    ensure_finite("moving average", mu.as_slice())?;
    let direction: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(mu.as_slice())
        .map(|(wi, mi)| cfg.tau * cfg.gamma * (mi - wi))
        .collect();
    let inv_temp = if langevin {
        InverseTemperature::Finite(cfg.beta)
    } else {
        InverseTemperature::Infinite
    };
    sgld_step(w, &direction, step, inv_temp, rng)
}

/// Runs the inner loop in both parameterizations from identical seeds and
/// returns the paired trajectories `(original, rescaled)`.
pub fn rescaled_inner_equivalence<G: RiskGradient + Clone>(
    objective: &G,
    w: &WeightVector,
    cfg: &LocalEntropyConfig,
    seed: u64,
) -> Result<(Vec<WeightVector>, Vec<WeightVector>)> {
    let (original, _) = inner_loop_trajectory(
        &mut objective.clone(),
        w,
        cfg,
        InnerParameterization::Original,
        &mut RngStream::new(seed),
    )?;
    let (rescaled, _) = inner_loop_trajectory(
        &mut objective.clone(),
        w,
        cfg,
        InnerParameterization::Rescaled,
        &mut RngStream::new(seed),
    )?;
    Ok((original, rescaled))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_gradient(dim: usize) -> FnGradient<impl FnMut(&[f64]) -> Vec<f64> + Clone> {
        FnGradient::new(dim, move |_w: &[f64]| vec![0.0; dim])
    }

    #[test]
    fn sgld_without_noise_is_half_gradient_step() {
        let w = WeightVector::zeros(2);
        let out = sgld_step(
            &w,
            &[2.0, 0.0],
            1.0,
            InverseTemperature::Infinite,
            &mut RngStream::new(0),
        )
        .unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_step_leaves_weights_unchanged() {
        let w = WeightVector::new(vec![0.25, -3.0]).unwrap();
        let out = sgld_step(
            &w,
            &[5.0, 1.0],
            0.0,
            InverseTemperature::Finite(1.0),
            &mut RngStream::new(1),
        )
        .unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn sgld_noise_replays_the_seed() {
        let w = WeightVector::zeros(4);
        let out = sgld_step(
            &w,
            &[0.0; 4],
            1.0,
            InverseTemperature::Finite(1.0),
            &mut RngStream::new(42),
        )
        .unwrap();
        let expected = RngStream::new(42).standard_normal_vec(4);
        assert_eq!(out.as_slice(), expected.as_slice());
    }

    #[test]
    fn nonfinite_gradient_names_coordinate() {
        let w = WeightVector::zeros(3);
        let err = sgld_step(
            &w,
            &[0.0, 0.0, f64::NAN],
            1.0,
            InverseTemperature::Infinite,
            &mut RngStream::new(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2, .. }), "{err}");
    }

    #[test]
    fn single_inner_step_unrolls_by_hand() {
        let mut cfg = LocalEntropyConfig::new(1.0, 2.0, 1.0);
        cfg.l = 1;
        cfg.alpha = 1.0;
        cfg.eta_prime = 0.3;
        let w = WeightVector::zeros(3);
        let mu =
            inner_loop_estimate(&mut zero_gradient(3), &w, &cfg, &mut RngStream::new(11)).unwrap();
        let g = RngStream::new(11).standard_normal_vec(3);
        for (m, gi) in mu.as_slice().iter().zip(g) {
            assert!((m - 0.3f64.sqrt() * gi).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_zero_is_rejected() {
        let mut cfg = LocalEntropyConfig::new(1.0, 2.0, 1.0);
        cfg.l = 1;
        cfg.alpha = 0.0;
        let w = WeightVector::zeros(1);
        assert!(matches!(
            inner_loop_estimate(&mut zero_gradient(1), &w, &cfg, &mut RngStream::new(0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn stronger_coupling_keeps_mu_closer() {
        // Scaling tau by 100 with eta' = 2/tau scales gamma*tau by 100 and
        // the inner noise by 1/10, with identical noise draws.
        let w = WeightVector::new(vec![0.5, -0.5, 1.0]).unwrap();
        let distance = |tau: f64| {
            let cfg = LocalEntropyConfig::new(1.0, tau, 1.0);
            let mu = inner_loop_estimate(&mut zero_gradient(3), &w, &cfg, &mut RngStream::new(8))
                .unwrap();
            mu.distance(&w)
        };
        let (d1, d2, d3) = (distance(10.0), distance(1e3), distance(1e5));
        assert!(d2 < d1 && d3 < d2);
        assert!((d1 / d2 - 10.0).abs() < 1e-9);
    }

    #[test]
    fn outer_step_fixed_points_and_full_step() {
        let cfg = LocalEntropyConfig::new(0.5, 4.0, 1.0);
        let w = WeightVector::new(vec![0.3, -0.7]).unwrap();
        let mut rng = RngStream::new(0);
        assert_eq!(outer_step(&w, &w, 0.7, &cfg, false, &mut rng).unwrap(), w);

        let origin = WeightVector::zeros(2);
        let mu = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let step = 2.0 / (cfg.tau * cfg.gamma);
        let out = outer_step(&origin, &mu, step, &cfg, false, &mut rng).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn outer_langevin_noise_scale() {
        let cfg = LocalEntropyConfig::new(1.0, 1.0, 4.0);
        let w = WeightVector::zeros(2);
        let out = outer_step(&w, &w, 1.0, &cfg, true, &mut RngStream::new(3)).unwrap();
        let g = RngStream::new(3).standard_normal_vec(2);
        // sqrt(step / beta) = 1/2
        assert_eq!(out.as_slice(), &[0.5 * g[0], 0.5 * g[1]]);
    }

    #[test]
    fn thermal_noise_values() {
        assert_eq!(thermal_noise(2.0), 1.0);
        assert!((thermal_noise(60000f64.sqrt()) - 0.090_360_200_360_984_48).abs() < 1e-15);
        assert!((tau_for_thermal_noise(1e-4) - 2e8).abs() < 1e-3);
    }

    #[test]
    fn rescaled_lines_match_original() {
        let grad = FnGradient::new(2, |w: &[f64]| vec![w[0].sin() + w[1], 3.0 * w[1].powi(3)]);
        let mut cfg = LocalEntropyConfig::new(0.7, 9.0, 1.0);
        cfg.l = 5;
        cfg.eta_prime = 0.05;
        let w = WeightVector::new(vec![0.2, -0.4]).unwrap();
        let (a, b) = rescaled_inner_equivalence(&grad, &w, &cfg, 77).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
