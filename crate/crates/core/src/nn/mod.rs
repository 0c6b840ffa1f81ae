//! Fully connected ReLU classifiers over a flat parameter vector.
//!
//! A network is described by a [`NetworkSpec`] and evaluated against a
//! [`WeightVector`] holding every weight and bias. Layer `l` occupies a
//! contiguous block of `(in + 1) * out` entries: the `out x in` weight matrix
//! in row-major order followed by the `out` biases.
//!
//! Binary labels are stored as `{0, 1}`; class `1` is the positive class
//! whose probability the sigmoid output reports.

mod loss;
mod network;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng::RngStream;

pub use loss::{
    bounded_cross_entropy, empirical_risk, empirical_risks, grad_empirical_risk, loss,
    loss_from_output, psi_clamp, ramp_margin, LossKind,
};
pub use network::{forward, forward_batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// One sigmoid unit: the probability of label `1`.
    SigmoidBinary,
    /// `K >= 2` softmax units.
    SoftmaxMulticlass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layer_widths: Vec<usize>,
    hidden_activation: HiddenActivation,
    output_kind: OutputKind,
}

impl NetworkSpec {
    /// `layer_widths` lists the input dimension first and the output width last.
    pub fn new(layer_widths: Vec<usize>, output_kind: OutputKind) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a network needs at least 2 layers, got {}",
                layer_widths.len()
            )));
        }
        if layer_widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "layer widths must be positive".to_owned(),
            ));
        }
        let out = *layer_widths.last().unwrap();
        match output_kind {
            OutputKind::SigmoidBinary if out != 1 => {
                return Err(Error::InvalidConfig(format!(
                    "sigmoid_binary output needs width 1, got {out}"
                )))
            }
            OutputKind::SoftmaxMulticlass if out < 2 => {
                return Err(Error::InvalidConfig(format!(
                    "softmax_multiclass output needs width >= 2, got {out}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            layer_widths,
            hidden_activation: HiddenActivation::Relu,
            output_kind,
        })
    }

    /// Binary classifier `input -> hidden... -> 1`.
    pub fn binary(input: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self::new(widths, OutputKind::SigmoidBinary)
    }

    pub fn multiclass(input: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(classes);
        Self::new(widths, OutputKind::SoftmaxMulticlass)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output_kind
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Number of label values the network distinguishes.
    pub fn num_classes(&self) -> usize {
        match self.output_kind {
            OutputKind::SigmoidBinary => 2,
            OutputKind::SoftmaxMulticlass => self.output_dim(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// `p = sum_l (in_l + 1) * out_l`.
    pub fn parameter_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// `(weights_offset, bias_offset, in, out)` for each layer.
    pub(crate) fn layer_layout(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_widths.windows(2).map(move |w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = offset;
            let bias = offset + fan_in * fan_out;
            offset = bias + fan_out;
            (weights, bias, fan_in, fan_out)
        })
    }

    pub fn check_weights(&self, w: &WeightVector) -> Result<()> {
        let expected = self.parameter_count();
        if w.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "weight vector length",
                expected,
                got: w.len(),
            });
        }
        Ok(())
    }

    /// He initialization: weights `N(0, 2 / fan_in)`, biases zero.
    pub fn init_weights(&self, rng: &mut RngStream) -> WeightVector {
        let mut values = vec![0.0; self.parameter_count()];
        for (weights, bias, fan_in, _) in self.layer_layout() {
            let scale = (2.0 / fan_in as f64).sqrt();
            rng.fill_standard_normal(&mut values[weights..bias]);
            for v in &mut values[weights..bias] {
                *v *= scale;
            }
        }
        WeightVector(values)
    }
}

/// Flat vector of all network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite("weight vector", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LabelMode {
    TrueLabels,
    RandomLabels { seed: u64 },
}

/// `m` examples with `dim` features each (row-major) and integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
    label_mode: LabelMode,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                what: "feature matrix size",
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} of example {i} is not below {num_classes}",
                labels[i]
            )));
        }
        ensure_finite("features", &features)?;
        Ok(Self {
            features,
            dim,
            labels,
            num_classes,
            label_mode: LabelMode::TrueLabels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Replaces the labels, keeping features.
    pub fn with_labels(
        &self,
        labels: Vec<usize>,
        num_classes: usize,
        label_mode: LabelMode,
    ) -> Result<Self> {
        let mut ds = LabeledDataset::new(self.features.clone(), self.dim, labels, num_classes)?;
        ds.label_mode = label_mode;
        Ok(ds)
    }

    /// Examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.feature(i));
            labels.push(self.labels[i]);
        }
        let mut ds = LabeledDataset::new(features, self.dim, labels, self.num_classes)?;
        ds.label_mode = self.label_mode;
        Ok(ds)
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }
}
