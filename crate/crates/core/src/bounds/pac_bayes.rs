//! PAC-Bayes risk bounds: linear, differentially private, and the two
//! concentration bounds for stability-based mechanisms.

use serde::{Deserialize, Serialize};

use super::kl::{kl_inverse_lower, kl_inverse_upper};
use crate::error::{Error, Result};

fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(m as f64)
}

fn check_kl(kl: f64) -> Result<()> {
    if kl.is_nan() || kl < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "KL divergence must be >= 0, got {kl}"
        )));
    }
    Ok(())
}

/// `(1 - 1/(2 lambda))^-1 (emp + lambda l_max / m (KL + ln 1/delta))`, valid for `lambda > 1/2`.
pub fn linear_pac_bayes(
    emp_risk: f64,
    kl: f64,
    m: usize,
    lambda: f64,
    delta: f64,
    l_max: f64,
) -> Result<f64> {
    if !(lambda > 0.5) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must exceed 1/2, got {lambda}"
        )));
    }
    if !(l_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "l_max must be positive, got {l_max}"
        )));
    }
    check_kl(kl)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let m = check_m(m)?;
    let slack = lambda * l_max / m * (kl + (1.0 / delta).ln());
    Ok((emp_risk + slack) / (1.0 - 1.0 / (2.0 * lambda)))
}

/// Privacy-dependent part of the DP PAC-Bayes budget, `2 max{ln(3/delta), m eps^2} / m`.
pub fn dp_penalty(m: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let m_f = check_m(m)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(2.0 * (3.0 / delta).ln().max(m_f * epsilon * epsilon) / m_f)
}

/// Result of the DP PAC-Bayes bound on the risk of the Gibbs classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpPacBayesBound {
    /// Right-hand side `c` of `kl(emp || risk) <= c`.
    pub kl_budget: f64,
    pub risk_upper: f64,
    pub risk_lower: f64,
}

impl DpPacBayesBound {
    /// The upper bound carries no information.
    pub fn is_vacuous(&self) -> bool {
        self.risk_upper >= 1.0 - 1e-9
    }
}

/// `kl(emp || risk) <= (KL + ln(2 sqrt m) + 2 max{ln(3/delta), m eps^2}) / m`,
/// inverted on both sides. An infinite `epsilon` or KL gives the trivial
/// interval `[0, 1]`.
pub fn dp_pac_bayes_bound(
    emp_err: f64,
    kl: f64,
    m: usize,
    epsilon: f64,
    delta: f64,
) -> Result<DpPacBayesBound> {
    check_unit("empirical error", emp_err)?;
    check_kl(kl)?;
    let penalty = dp_penalty(m, epsilon, delta)?;
    let m_f = m as f64;
    let kl_budget = (kl + (2.0 * m_f.sqrt()).ln()) / m_f + penalty;
    if !kl_budget.is_finite() {
        return Ok(DpPacBayesBound {
            kl_budget: f64::INFINITY,
            risk_upper: 1.0,
            risk_lower: 0.0,
        });
    }
    Ok(DpPacBayesBound {
        kl_budget,
        risk_upper: kl_inverse_upper(emp_err, kl_budget)?,
        risk_lower: kl_inverse_lower(emp_err, kl_budget)?,
    })
}

/// A risk bound clamped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedBound {
    pub value: f64,
    /// Value before clamping; may exceed one or be infinite.
    pub raw: f64,
    pub vacuous: bool,
}

impl ClampedBound {
    pub fn new(raw: f64) -> Self {
        let vacuous = !(raw < 1.0);
        ClampedBound {
            value: if vacuous { 1.0 } else { raw.max(0.0) },
            raw,
            vacuous,
        }
    }
}

/// `max{epsilon, sqrt(ln(3/delta) / m)}`.
pub fn effective_epsilon(epsilon: f64, m: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let m = check_m(m)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(epsilon.max(((3.0 / delta).ln() / m).sqrt()))
}

/// Hoeffding-style bound `emp + eps_bar + m^-1/2` for an `epsilon`-private
/// mechanism; `emp` is the empirical ramp risk.
pub fn h_bound(emp_ramp: f64, epsilon: f64, m: usize, delta: f64) -> Result<ClampedBound> {
    check_unit("empirical ramp risk", emp_ramp)?;
    let eps_bar = effective_epsilon(epsilon, m, delta)?;
    Ok(ClampedBound::new(
        emp_ramp + eps_bar + 1.0 / (m as f64).sqrt(),
    ))
}

/// Chernoff-style bound `emp + sqrt(6 emp)(eps_bar + m^-1/2) + 6(eps_bar^2 + 1/m)`.
pub fn c_bound(emp_ramp: f64, epsilon: f64, m: usize, delta: f64) -> Result<ClampedBound> {
    check_unit("empirical ramp risk", emp_ramp)?;
    let eps_bar = effective_epsilon(epsilon, m, delta)?;
    let m_f = m as f64;
    let raw = emp_ramp
        + (6.0 * emp_ramp).sqrt() * (eps_bar + 1.0 / m_f.sqrt())
        + 6.0 * (eps_bar * eps_bar + 1.0 / m_f);
    Ok(ClampedBound::new(raw))
}
