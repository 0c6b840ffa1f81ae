//! Differential-privacy budgets of the two exponential mechanisms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default failure probability attached to a fresh budget.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Which exponential mechanism produced a budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Sampling the outer weights from `exp(beta * F)`.
    LocalEntropy,
    /// Sampling from the Gibbs posterior `exp(-tau * risk)`.
    GibbsPosterior,
}

/// An `(epsilon, delta)` pair plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: Mechanism,
    /// Sensitivity of the score function under a one-point change of the data.
    pub sensitivity: f64,
}

impl PrivacyBudget {
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    /// Budget with no privacy at all, used for plain SGD runs.
    pub fn none(mechanism: Mechanism) -> Self {
        PrivacyBudget {
            epsilon: f64::INFINITY,
            delta: DEFAULT_DELTA,
            mechanism,
            sensitivity: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.epsilon.is_finite()
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value < 0.0 || value.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be finite and >= 0, got {value}"
        )));
    }
    Ok(())
}

/// `epsilon = 2 beta l_max tau / m`; sensitivity of `F` is `l_max tau / m`.
pub fn epsilon_local_entropy(beta: f64, tau: f64, l_max: f64, m: usize) -> Result<PrivacyBudget> {
    check_nonnegative("beta", beta)?;
    check_nonnegative("tau", tau)?;
    check_nonnegative("l_max", l_max)?;
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let sensitivity = l_max * tau / m as f64;
    Ok(PrivacyBudget {
        epsilon: 2.0 * beta * sensitivity,
        delta: DEFAULT_DELTA,
        mechanism: Mechanism::LocalEntropy,
        sensitivity,
    })
}

/// `epsilon = 2 tau l_max / m` for the Gibbs posterior.
pub fn epsilon_gibbs_posterior(tau: f64, l_max: f64, m: usize) -> Result<PrivacyBudget> {
    check_nonnegative("tau", tau)?;
    check_nonnegative("l_max", l_max)?;
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let sensitivity = l_max / m as f64;
    Ok(PrivacyBudget {
        epsilon: 2.0 * tau * sensitivity,
        delta: DEFAULT_DELTA,
        mechanism: Mechanism::GibbsPosterior,
        sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_scale_epsilon() {
        let m = 60_000;
        let tau = (m as f64).sqrt();
        let b = epsilon_local_entropy(1.0, tau, 4.0, m).unwrap();
        assert!((b.epsilon - 0.032_659_863_237_109_04).abs() < 1e-12);
        assert!((b.sensitivity - 4.0 * tau / m as f64).abs() < 1e-15);
        assert_eq!(b.mechanism, Mechanism::LocalEntropy);
    }

    #[test]
    fn zero_tau_is_perfectly_private() {
        assert_eq!(
            epsilon_local_entropy(1.0, 0.0, 4.0, 10).unwrap().epsilon,
            0.0
        );
    }

    #[test]
    fn epsilon_is_linear_in_beta_and_tau() {
        let a = epsilon_local_entropy(1.0, 3.0, 2.0, 100).unwrap().epsilon;
        let b = epsilon_local_entropy(2.0, 3.0, 2.0, 100).unwrap().epsilon;
        let c = epsilon_local_entropy(1.0, 6.0, 2.0, 100).unwrap().epsilon;
        assert!((b - 2.0 * a).abs() < 1e-15 && (c - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn constant_privacy_product() {
        let b = epsilon_local_entropy(1.0, 2000.0, 4.0, 50_000).unwrap();
        assert!((b.epsilon - 0.32).abs() < 1e-15);
    }

    #[test]
    fn both_mechanisms_agree_at_unit_beta() {
        let m = 60_000;
        let tau = (m as f64).sqrt();
        let a = epsilon_local_entropy(1.0, tau, 4.0, m).unwrap().epsilon;
        let b = epsilon_gibbs_posterior(tau, 4.0, m).unwrap().epsilon;
        assert!((a - b).abs() <= 1e-16);
    }

    #[test]
    fn gibbs_posterior_epsilon() {
        let b = epsilon_gibbs_posterior(100.0, 4.0, 1000).unwrap();
        assert!((b.epsilon - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(epsilon_local_entropy(-1.0, 1.0, 1.0, 10).is_err());
        assert!(epsilon_local_entropy(1.0, f64::NAN, 1.0, 10).is_err());
        assert!(epsilon_local_entropy(1.0, 1.0, 1.0, 0).is_err());
        assert!(epsilon_gibbs_posterior(1.0, 1.0, 10)
            .unwrap()
            .with_delta(0.0)
            .is_err());
    }
}
