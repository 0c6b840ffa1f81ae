use crate::error::{ensure_finite, Result};
use crate::nn::{grad_empirical_risk, LabeledDataset, LossKind, NetworkSpec, WeightVector};
use crate::rng::{MinibatchSampler, RngStream};

/// Source of (stochastic) gradients of an empirical risk `R_S(w)`.
pub trait RiskGradient {
    fn dim(&self) -> usize;

    /// Estimate of `grad R_S(w)`; may consume randomness (minibatch draws).
    fn gradient(&mut self, w: &[f64], rng: &mut RngStream) -> Result<Vec<f64>>;
}

/// Minibatch gradients of a network's empirical risk, sampling without
/// replacement within each pass over the data.
#[derive(Debug, Clone)]
pub struct NetworkObjective<'a> {
    spec: &'a NetworkSpec,
    data: &'a LabeledDataset,
    loss: LossKind,
    sampler: MinibatchSampler,
}

impl<'a> NetworkObjective<'a> {
    pub fn new(
        spec: &'a NetworkSpec,
        data: &'a LabeledDataset,
        loss: LossKind,
        batch_size: usize,
    ) -> Self {
        Self {
            spec,
            data,
            loss,
            sampler: MinibatchSampler::new(data.len(), batch_size),
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    pub fn data(&self) -> &LabeledDataset {
        self.data
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn batch_size(&self) -> usize {
        self.sampler.batch_size()
    }
}

impl RiskGradient for NetworkObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.parameter_count()
    }

    fn gradient(&mut self, w: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let batch = self.sampler.next_batch(rng).to_vec();
        let weights = WeightVector::from(w.to_vec());
        let g = grad_empirical_risk(self.loss, self.spec, &weights, self.data, &batch)?;
        ensure_finite("risk gradient", &g)?;
        Ok(g)
    }
}

/// Deterministic gradient given by a closure; used for analytic test risks.
pub struct FnGradient<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> Vec<f64>> FnGradient<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> Vec<f64>> RiskGradient for FnGradient<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&mut self, w: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok((self.f)(w))
    }
}

impl<F: Clone> Clone for FnGradient<F> {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            f: self.f.clone(),
        }
    }
}
