//! Monte-Carlo estimate of `KL(Gibbs || prior)` from the Catoni identity
//! `KL(P_exp(-l) || P) = E_G[-l] - log E_P[exp(-l)]`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Minimum number of chain and prior samples.
pub const MIN_KL_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// Estimate clamped below at zero.
    pub value: f64,
    pub unclamped: f64,
    pub std_error: f64,
    /// `-(1/k') sum l(w'_i)` over Gibbs samples.
    pub gibbs_term: f64,
    /// `log((1/k) sum exp(-l(w_i)))` over prior draws.
    pub prior_term: f64,
    pub chain_samples: usize,
    pub prior_samples: usize,
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Estimates the KL divergence from losses `l` evaluated at Gibbs samples
/// (`chain_losses`) and at independent prior draws (`prior_losses`).
///
/// The second term is a log-mean-exp, so by Jensen it is biased low and the
/// estimate errs upward. The error combines the chain-mean error with a
/// delta-method error for the log-mean-exp, treating chain samples as independent.
pub fn estimate_kl_gibbs_prior(chain_losses: &[f64], prior_losses: &[f64]) -> Result<KlEstimate> {
    if chain_losses.len() < MIN_KL_SAMPLES || prior_losses.len() < MIN_KL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "KL estimation needs at least {MIN_KL_SAMPLES} chain and prior samples, got {} and {}",
            chain_losses.len(),
            prior_losses.len()
        )));
    }
    ensure_finite("chain losses", chain_losses)?;
    ensure_finite("prior losses", prior_losses)?;
    let k_chain = chain_losses.len() as f64;
    let k_prior = prior_losses.len() as f64;
    let (chain_mean, chain_var) = mean_and_var(chain_losses);
    let shift = prior_losses
        .iter()
        .map(|l| -l)
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = prior_losses.iter().map(|l| (-l - shift).exp()).collect();
    let (scaled_mean, scaled_var) = mean_and_var(&scaled);
    let gibbs_term = -chain_mean;
    let prior_term = scaled_mean.ln() + shift;
    let se_chain_sq = chain_var / k_chain;
    let se_prior_sq = scaled_var / (k_prior * scaled_mean * scaled_mean);
    let unclamped = gibbs_term - prior_term;
    Ok(KlEstimate {
        value: unclamped.max(0.0),
        unclamped,
        std_error: (se_chain_sq + se_prior_sq).sqrt(),
        gibbs_term,
        prior_term,
        chain_samples: chain_losses.len(),
        prior_samples: prior_losses.len(),
    })
}
