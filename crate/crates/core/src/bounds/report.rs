//! Assembling every bound for one evaluation point into a serializable report.

use serde::{Deserialize, Serialize};

use super::kl_estimate::KlEstimate;
use super::pac_bayes::{c_bound, dp_pac_bayes_bound, h_bound, ClampedBound, DpPacBayesBound};
use crate::error::{Error, Result};
use crate::nn::LabelMode;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON has no infinities; a non-finite value is written as `null` and read back as `+inf`.
pub(crate) mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Measurements a report is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub emp_err_mean: f64,
    pub emp_err_gibbs: f64,
    pub emp_err_gibbs_std_error: f64,
    pub test_err_mean: Option<f64>,
    pub test_err_gibbs: Option<f64>,
    /// Empirical ramp risk fed to the H- and C-bounds.
    pub emp_ramp_risk: f64,
    /// `None` when the posterior has no Gaussian prior to compare against.
    pub kl: Option<KlEstimate>,
    pub epsilon: f64,
    pub m: usize,
    pub delta: f64,
}

/// Errors, KL estimate and all bounds at one evaluation point.
///
/// Bounds are clamped to `[0, 1]`; the `*_vacuous` flags mark clamped values.
/// `optimistic` records that the convergence gap of the approximate sampler is
/// taken to be zero, and `c_bound_jensen` that the C-bound uses the mean
/// empirical risk inside the square root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub emp_err_mean: f64,
    pub emp_err_gibbs: f64,
    pub emp_err_gibbs_std_error: f64,
    pub test_err_mean: Option<f64>,
    pub test_err_gibbs: Option<f64>,
    pub emp_ramp_risk: f64,
    pub kl_estimate: Option<f64>,
    pub kl_std_error: Option<f64>,
    pub kl_budget: f64,
    pub pac_bayes_bound: f64,
    pub pac_bayes_lower: f64,
    pub h_bound: f64,
    pub c_bound: f64,
    #[serde(with = "nonfinite_as_null")]
    pub epsilon: f64,
    pub m: usize,
    pub delta: f64,
    pub vacuous: bool,
    pub h_bound_vacuous: bool,
    pub c_bound_vacuous: bool,
    pub optimistic: bool,
    pub c_bound_jensen: bool,
}

impl BoundReport {
    pub fn compute(inputs: &BoundInputs) -> Result<Self> {
        for (name, v) in [
            ("emp_err_mean", inputs.emp_err_mean),
            ("emp_err_gibbs", inputs.emp_err_gibbs),
            ("emp_ramp_risk", inputs.emp_ramp_risk),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let (pac, kl_budget) = match inputs.kl {
            Some(kl) if inputs.epsilon.is_finite() => {
                let b = dp_pac_bayes_bound(
                    inputs.emp_err_gibbs,
                    kl.value,
                    inputs.m,
                    inputs.epsilon,
                    inputs.delta,
                )?;
                (b, b.kl_budget)
            }
            _ => (
                DpPacBayesBound {
                    kl_budget: f64::INFINITY,
                    risk_upper: 1.0,
                    risk_lower: 0.0,
                },
                f64::INFINITY,
            ),
        };
        let (h, c) = if inputs.epsilon.is_finite() {
            (
                h_bound(inputs.emp_ramp_risk, inputs.epsilon, inputs.m, inputs.delta)?,
                c_bound(inputs.emp_ramp_risk, inputs.epsilon, inputs.m, inputs.delta)?,
            )
        } else {
            (
                ClampedBound::new(f64::INFINITY),
                ClampedBound::new(f64::INFINITY),
            )
        };
        Ok(BoundReport {
            schema_version: REPORT_SCHEMA_VERSION,
            emp_err_mean: inputs.emp_err_mean,
            emp_err_gibbs: inputs.emp_err_gibbs,
            emp_err_gibbs_std_error: inputs.emp_err_gibbs_std_error,
            test_err_mean: inputs.test_err_mean,
            test_err_gibbs: inputs.test_err_gibbs,
            emp_ramp_risk: inputs.emp_ramp_risk,
            kl_estimate: inputs.kl.map(|k| k.value),
            kl_std_error: inputs.kl.map(|k| k.std_error),
            kl_budget: if kl_budget.is_finite() {
                kl_budget
            } else {
                f64::MAX
            },
            pac_bayes_bound: pac.risk_upper.min(1.0),
            pac_bayes_lower: pac.risk_lower,
            h_bound: h.value,
            c_bound: c.value,
            epsilon: inputs.epsilon,
            m: inputs.m,
            delta: inputs.delta,
            vacuous: pac.is_vacuous(),
            h_bound_vacuous: h.vacuous,
            c_bound_vacuous: c.vacuous,
            optimistic: true,
            c_bound_jensen: true,
        })
    }
}

/// Final report of one sweep configuration, or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub tau: f64,
    pub beta: f64,
    pub label_mode: LabelMode,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
}
