//! Sampling from local Gibbs measures and Gibbs posteriors, Monte-Carlo
//! error estimates, and exact 1-D quadrature oracles.

mod quadrature;

use serde::{Deserialize, Serialize};

pub use quadrature::{
    gibbs_moments_1d, local_entropy_quadrature_1d, FnRisk1d, GibbsMoments1d, LocalEntropy1d,
    Quadrature, Risk1d, WINDOW_SIGMAS,
};

use crate::error::{ensure_finite, Error, Result};
use crate::nn::{
    empirical_risk, empirical_risks, LabeledDataset, LossKind, NetworkSpec, WeightVector,
};
use crate::optim::{NetworkObjective, RiskGradient, ScheduleSpec};
use crate::rng::RngStream;

/// Coordinates beyond this magnitude abort a chain.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Weight of the newest sample in the running error average.
pub const EVAL_AVERAGING_ALPHA: f64 = 0.005;

/// Reference measure the Gibbs density is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// `N(center, (tau gamma)^-1 I)`; the target is the local Gibbs distribution.
    Gaussian,
    /// Flat reference measure; the target is the Gibbs posterior `exp(-tau R_S)`.
    Lebesgue,
}

/// A Gibbs measure `exp(-tau R_S(w')) prior(w')` over network weights.
#[derive(Debug, Clone)]
pub struct GibbsTarget<'a> {
    spec: &'a NetworkSpec,
    data: &'a LabeledDataset,
    center: WeightVector,
    gamma: f64,
    tau: f64,
    loss: LossKind,
    prior: PriorKind,
}

impl<'a> GibbsTarget<'a> {
    /// Local Gibbs distribution around `center`.
    pub fn local(
        spec: &'a NetworkSpec,
        data: &'a LabeledDataset,
        center: WeightVector,
        gamma: f64,
        tau: f64,
        loss: LossKind,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Self::build(spec, data, center, gamma, tau, loss, PriorKind::Gaussian)
    }

    /// Gibbs posterior `exp(-tau R_S)`; `start` only seeds the chain.
    pub fn posterior(
        spec: &'a NetworkSpec,
        data: &'a LabeledDataset,
        start: WeightVector,
        tau: f64,
        loss: LossKind,
    ) -> Result<Self> {
        Self::build(spec, data, start, 0.0, tau, loss, PriorKind::Lebesgue)
    }

    fn build(
        spec: &'a NetworkSpec,
        data: &'a LabeledDataset,
        center: WeightVector,
        gamma: f64,
        tau: f64,
        loss: LossKind,
        prior: PriorKind,
    ) -> Result<Self> {
        spec.check_weights(&center)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        if !matches!(loss, LossKind::BoundedCrossEntropy { .. }) {
            return Err(Error::NotDifferentiable(loss.name()));
        }
        loss.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(GibbsTarget {
            spec,
            data,
            center,
            gamma,
            tau,
            loss,
            prior,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    pub fn data(&self) -> &LabeledDataset {
        self.data
    }

    pub fn center(&self) -> &WeightVector {
        &self.center
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }

    /// Standard deviation of the Gaussian prior, if there is one.
    pub fn prior_std(&self) -> Option<f64> {
        match self.prior {
            PriorKind::Gaussian => Some(1.0 / (self.tau * self.gamma).sqrt()),
            PriorKind::Lebesgue => None,
        }
    }

    /// SGLD chain on this target, started at the center.
    pub fn chain(
        &self,
        schedule: ScheduleSpec,
        batch_size: usize,
    ) -> Result<SgldChain<NetworkObjective<'a>>> {
        let objective = NetworkObjective::new(self.spec, self.data, self.loss, batch_size);
        SgldChain::new(
            objective,
            self.center.as_slice(),
            self.gamma,
            self.tau,
            self.prior,
            schedule,
        )
    }

    /// `tau R_S(w)` for `k` independent draws `w` from the Gaussian prior.
    pub fn prior_losses(&self, k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let std = self.prior_std().ok_or_else(|| {
            Error::InvalidArgument("the flat reference measure cannot be sampled".into())
        })?;
        let mut draw = self.center.clone();
        (0..k)
            .map(|_| {
                let noise = rng.standard_normal_vec(draw.len());
                for ((d, c), n) in draw
                    .as_mut_slice()
                    .iter_mut()
                    .zip(self.center.as_slice())
                    .zip(noise)
                {
                    *d = c + std * n;
                }
                Ok(self.tau * empirical_risk(self.loss, self.spec, &draw, self.data)?)
            })
            .collect()
    }
}

/// SGLD on `exp(-tau R(w') - tau gamma / 2 |w' - center|^2)` (or without the
/// quadratic term for a flat prior), for any gradient source.
#[derive(Debug, Clone)]
pub struct SgldChain<G> {
    objective: G,
    center: Vec<f64>,
    gamma: f64,
    tau: f64,
    prior: PriorKind,
    schedule: ScheduleSpec,
    state: Vec<f64>,
    steps: usize,
}

impl<G: RiskGradient> SgldChain<G> {
    pub fn new(
        objective: G,
        center: &[f64],
        gamma: f64,
        tau: f64,
        prior: PriorKind,
        schedule: ScheduleSpec,
    ) -> Result<Self> {
        schedule.validate()?;
        if objective.dim() != center.len() {
            return Err(Error::DimensionMismatch {
                what: "chain dimension",
                expected: center.len(),
                got: objective.dim(),
            });
        }
        ensure_finite("chain center", center)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        if prior == PriorKind::Gaussian && !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(SgldChain {
            objective,
            center: center.to_vec(),
            gamma,
            tau,
            prior,
            schedule,
            state: center.to_vec(),
            steps: 0,
        })
    }

    /// Restarts from `state` without resetting the step counter.
    pub fn with_state(mut self, state: &[f64]) -> Result<Self> {
        if state.len() != self.state.len() {
            return Err(Error::DimensionMismatch {
                what: "chain state",
                expected: self.state.len(),
                got: state.len(),
            });
        }
        self.state.copy_from_slice(state);
        Ok(self)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances one step and returns the new state.
    pub fn step(&mut self, rng: &mut RngStream) -> Result<&[f64]> {
        self.steps += 1;
        let eta = self.schedule.step(self.steps);
        let grad = self.objective.gradient(&self.state, rng)?;
        ensure_finite("risk gradient", &grad)?;
        let noise = rng.standard_normal_vec(self.state.len());
        let (half, scale) = (0.5 * eta, eta.sqrt());
        let pull = match self.prior {
            PriorKind::Gaussian => self.tau * self.gamma,
            PriorKind::Lebesgue => 0.0,
        };
        for j in 0..self.state.len() {
            let drift = -self.tau * grad[j] - pull * (self.state[j] - self.center[j]);
            self.state[j] += half * drift + scale * noise[j];
        }
        if let Some(index) = self
            .state
            .iter()
            .position(|v| !(v.abs() <= DIVERGENCE_THRESHOLD))
        {
            return Err(Error::Diverged {
                step: self.steps,
                index,
                value: self.state[index],
                threshold: DIVERGENCE_THRESHOLD,
            });
        }
        Ok(&self.state)
    }

    /// Runs `n` steps, handing every state to `visit`.
    pub fn run(
        &mut self,
        n: usize,
        rng: &mut RngStream,
        mut visit: impl FnMut(&[f64]) -> Result<()>,
    ) -> Result<()> {
        for _ in 0..n {
            self.step(rng)?;
            visit(&self.state)?;
        }
        Ok(())
    }
}

/// Runs `n_steps` of SGLD on `target` from its center and returns every state.
pub fn sample_chain(
    target: &GibbsTarget<'_>,
    n_steps: usize,
    schedule: ScheduleSpec,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<WeightVector>> {
    let mut chain = target.chain(schedule, batch_size)?;
    let mut out = Vec::with_capacity(n_steps);
    chain.run(n_steps, rng, |s| {
        out.push(WeightVector::from(s.to_vec()));
        Ok(())
    })?;
    Ok(out)
}

/// Exponentially weighted Monte-Carlo average with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainEstimate {
    pub samples_used: usize,
    pub running_average_weight: f64,
    pub value: f64,
    pub std_error: f64,
}

impl ChainEstimate {
    /// Bias-corrected exponential moving average: sample `i` of `n` gets weight
    /// `(1 - alpha)^(n - 1 - i)`. The standard error uses Kish's effective sample size.
    pub fn from_samples(values: &[f64], alpha: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "an estimate needs at least one sample".into(),
            ));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "averaging weight must lie in (0, 1], got {alpha}"
            )));
        }
        ensure_finite("chain samples", values)?;
        let n = values.len();
        let weights: Vec<f64> = (0..n)
            .map(|i| (1.0 - alpha).powi((n - 1 - i) as i32))
            .collect();
        let total: f64 = weights.iter().sum();
        let value = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
        let spread = weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * (v - value).powi(2))
            .sum::<f64>()
            / total;
        let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
        let std_error = if n_eff > 1.0 + 1e-12 {
            (spread / (n_eff - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(ChainEstimate {
            samples_used: n,
            running_average_weight: alpha,
            value,
            std_error,
        })
    }
}

/// Standard error of a chain average by non-overlapping batch means.
pub fn batch_means_std_error(samples: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || samples.len() < batches {
        return Err(Error::InvalidArgument(format!(
            "need at least {batches} >= 2 samples for batch means, got {}",
            samples.len()
        )));
    }
    let size = samples.len() / batches;
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((var / batches as f64).sqrt())
}

/// Settings for the evaluation chains that estimate Gibbs errors and the KL term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalChainConfig {
    /// Number of retained samples (`k'`).
    pub samples: usize,
    /// Steps between retained samples.
    pub thin: usize,
    /// Fraction of all steps discarded before the first retained sample.
    pub burn_in_fraction: f64,
    /// Constant SGLD step size.
    pub step: f64,
    pub batch_size: usize,
    pub alpha: f64,
}

impl EvalChainConfig {
    pub fn new(samples: usize, step: f64, batch_size: usize) -> Self {
        EvalChainConfig {
            samples,
            thin: 1,
            burn_in_fraction: 0.1,
            step,
            batch_size,
            alpha: EVAL_AVERAGING_ALPHA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "samples, thin and batch size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "chain step must be positive, got {}",
                self.step
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "averaging weight must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Steps discarded before the first retained sample.
    pub fn burn_in_steps(&self) -> usize {
        let kept = (self.samples * self.thin) as f64;
        (kept * self.burn_in_fraction / (1.0 - self.burn_in_fraction)).ceil() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.burn_in_steps() + self.samples * self.thin
    }
}

/// Monte-Carlo summaries of one evaluation chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsEvaluation {
    pub train_error: ChainEstimate,
    pub test_error: Option<ChainEstimate>,
    /// Ramp risk on the training set, averaged over samples.
    pub train_ramp: ChainEstimate,
    /// `tau R_S(w'_i)` under the target's surrogate loss, one per retained sample.
    pub chain_losses: Vec<f64>,
}

/// Runs one evaluation chain on `target` and averages per-sample errors.
pub fn evaluate_gibbs(
    target: &GibbsTarget<'_>,
    test: Option<&LabeledDataset>,
    ramp: LossKind,
    cfg: &EvalChainConfig,
    rng: &mut RngStream,
) -> Result<GibbsEvaluation> {
    cfg.validate()?;
    let mut chain = target.chain(ScheduleSpec::constant(cfg.step), cfg.batch_size)?;
    chain.run(cfg.burn_in_steps(), rng, |_| Ok(()))?;
    let kinds = [LossKind::ZeroOne, target.loss(), ramp];
    let mut train_err = Vec::with_capacity(cfg.samples);
    let mut train_ramp = Vec::with_capacity(cfg.samples);
    let mut test_err = Vec::with_capacity(cfg.samples);
    let mut chain_losses = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        chain.run(cfg.thin, rng, |_| Ok(()))?;
        let w = WeightVector::from(chain.state().to_vec());
        let risks = empirical_risks(&kinds, target.spec(), &w, target.data())?;
        train_err.push(risks[0]);
        chain_losses.push(target.tau() * risks[1]);
        train_ramp.push(risks[2]);
        if let Some(test) = test {
            test_err.push(empirical_risk(LossKind::ZeroOne, target.spec(), &w, test)?);
        }
    }
    Ok(GibbsEvaluation {
        train_error: ChainEstimate::from_samples(&train_err, cfg.alpha)?,
        test_error: if test.is_some() {
            Some(ChainEstimate::from_samples(&test_err, cfg.alpha)?)
        } else {
            None
        },
        train_ramp: ChainEstimate::from_samples(&train_ramp, cfg.alpha)?,
        chain_losses,
    })
}

/// Gibbs 0-1 error on `data` from `n_samples` retained states of a chain on
/// `target` (constant step `step`, full-batch gradients, 10% burn-in).
pub fn gibbs_error(
    target: &GibbsTarget<'_>,
    data: &LabeledDataset,
    n_samples: usize,
    step: f64,
    rng: &mut RngStream,
) -> Result<ChainEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let cfg = EvalChainConfig::new(n_samples, step, target.data().len());
    cfg.validate()?;
    let mut chain = target.chain(ScheduleSpec::constant(cfg.step), cfg.batch_size)?;
    chain.run(cfg.burn_in_steps(), rng, |_| Ok(()))?;
    let mut errors = Vec::with_capacity(n_samples);
    chain.run(n_samples, rng, |s| {
        errors.push(empirical_risk(
            LossKind::ZeroOne,
            target.spec(),
            &WeightVector::from(s.to_vec()),
            data,
        )?);
        Ok(())
    })?;
    ChainEstimate::from_samples(&errors, cfg.alpha)
}

/// 0-1 error of the deterministic network at `w`.
pub fn mean_classifier_error(
    spec: &NetworkSpec,
    w: &WeightVector,
    data: &LabeledDataset,
) -> Result<f64> {
    empirical_risk(LossKind::ZeroOne, spec, w, data)
}
