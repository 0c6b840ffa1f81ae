use serde::{Deserialize, Serialize};

use super::network::{backward, run, sigmoid};
use super::{LabeledDataset, NetworkSpec, OutputKind, WeightVector};
use crate::error::{Error, Result};

/// Examples evaluated per forward pass when sweeping a whole dataset.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LossKind {
    ZeroOne,
    /// Cross entropy of the affinely clamped probability `psi(p)`; values in
    /// `(0, l_max]`.
    BoundedCrossEntropy {
        l_max: f64,
    },
    /// Piecewise-linear surrogate on the margin `t`: 1 for `t <= 0`, 0 for
    /// `t >= 1/slope`, linear in between.
    ///
    /// The margin convention is ours: binary `t = (2y - 1)(2p - 1)`,
    /// multiclass `t = p_y - max_{k != y} p_k`.
    Ramp {
        slope: f64,
    },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::BoundedCrossEntropy { .. } => "bounded_cross_entropy",
            LossKind::Ramp { .. } => "ramp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::BoundedCrossEntropy { l_max } if !(l_max > 0.0 && l_max.is_finite()) => Err(
                Error::InvalidArgument(format!("l_max must be positive, got {l_max}")),
            ),
            LossKind::Ramp { slope } if !(slope > 0.0 && slope.is_finite()) => Err(
                Error::InvalidArgument(format!("ramp slope must be positive, got {slope}")),
            ),
            _ => Ok(()),
        }
    }
}

/// `psi(p) = e^{-l_max} + (1 - 2 e^{-l_max}) p`, mapping `[0, 1]` onto
/// `[e^{-l_max}, 1 - e^{-l_max}]`.
pub fn psi_clamp(p: f64, l_max: f64) -> f64 {
    let floor = (-l_max).exp();
    floor + (1.0 - 2.0 * floor) * p
}

/// `-log psi(p_correct)`, where `p_correct` is the probability assigned to the
/// observed label.
pub fn bounded_cross_entropy(p_correct: f64, l_max: f64) -> f64 {
    -psi_clamp(p_correct, l_max).ln()
}

/// Margin of the output `probs` for `label` (see [`LossKind::Ramp`]).
pub fn ramp_margin(output_kind: OutputKind, probs: &[f64], label: usize) -> f64 {
    match output_kind {
        OutputKind::SigmoidBinary => {
            let sign = if label == 1 { 1.0 } else { -1.0 };
            sign * (2.0 * probs[0] - 1.0)
        }
        OutputKind::SoftmaxMulticlass => {
            let rival = probs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != label)
                .map(|(_, &p)| p)
                .fold(f64::NEG_INFINITY, f64::max);
            probs[label] - rival
        }
    }
}

fn ramp(t: f64, slope: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 / slope {
        0.0
    } else {
        1.0 - slope * t
    }
}

/// Loss of a single example given the network's output probabilities.
pub fn loss_from_output(
    kind: LossKind,
    output_kind: OutputKind,
    probs: &[f64],
    label: usize,
) -> f64 {
    match kind {
        // Ties (t == 0) count as errors.
        LossKind::ZeroOne => {
            if ramp_margin(output_kind, probs, label) <= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        LossKind::BoundedCrossEntropy { l_max } => {
            let p_correct = match output_kind {
                OutputKind::SigmoidBinary if label == 1 => probs[0],
                OutputKind::SigmoidBinary => 1.0 - probs[0],
                OutputKind::SoftmaxMulticlass => probs[label],
            };
            bounded_cross_entropy(p_correct, l_max)
        }
        LossKind::Ramp { slope } => ramp(ramp_margin(output_kind, probs, label), slope),
    }
}

/// Loss from a row of logits. Binary cross entropy uses `sigmoid(-z)` for the
/// complementary probability to keep precision when `p` is near 1.
fn loss_from_logits(
    kind: LossKind,
    output_kind: OutputKind,
    logits: &mut [f64],
    label: usize,
) -> f64 {
    if let (LossKind::BoundedCrossEntropy { l_max }, OutputKind::SigmoidBinary) =
        (kind, output_kind)
    {
        let z = if label == 1 { logits[0] } else { -logits[0] };
        return bounded_cross_entropy(sigmoid(z), l_max);
    }
    super::network::logits_to_probabilities(output_kind, logits);
    loss_from_output(kind, output_kind, logits, label)
}

fn check_label(spec: &NetworkSpec, label: usize) -> Result<()> {
    if label >= spec.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            spec.num_classes()
        )));
    }
    Ok(())
}

fn check_dataset(spec: &NetworkSpec, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset feature dimension",
            expected: spec.input_dim(),
            got: data.dim(),
        });
    }
    if data.num_classes() > spec.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes but the network outputs {}",
            data.num_classes(),
            spec.num_classes()
        )));
    }
    Ok(())
}

/// Loss of the labeled example `(x, label)`.
pub fn loss(
    kind: LossKind,
    spec: &NetworkSpec,
    w: &WeightVector,
    x: &[f64],
    label: usize,
) -> Result<f64> {
    kind.validate()?;
    check_label(spec, label)?;
    spec.check_weights(w)?;
    if x.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input feature length",
            expected: spec.input_dim(),
            got: x.len(),
        });
    }
    let mut logits = run(spec, w.as_slice(), x.to_vec(), 1).logits;
    Ok(loss_from_logits(
        kind,
        spec.output_kind(),
        &mut logits,
        label,
    ))
}

/// Mean loss over `data`.
pub fn empirical_risk(
    kind: LossKind,
    spec: &NetworkSpec,
    w: &WeightVector,
    data: &LabeledDataset,
) -> Result<f64> {
    Ok(empirical_risks(&[kind], spec, w, data)?[0])
}

/// Mean of each loss in `kinds` over `data`, from a single pass.
pub fn empirical_risks(
    kinds: &[LossKind],
    spec: &NetworkSpec,
    w: &WeightVector,
    data: &LabeledDataset,
) -> Result<Vec<f64>> {
    for kind in kinds {
        kind.validate()?;
    }
    spec.check_weights(w)?;
    check_dataset(spec, data)?;
    let width = spec.output_dim();
    let mut sums = vec![0.0; kinds.len()];
    let mut row = vec![0.0; width];
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let inputs = data.features()[start * data.dim()..end * data.dim()].to_vec();
        let tape = run(spec, w.as_slice(), inputs, end - start);
        for (i, logits) in tape.logits.chunks_exact(width).enumerate() {
            let label = data.label(start + i);
            for (sum, &kind) in sums.iter_mut().zip(kinds) {
                row.copy_from_slice(logits);
                *sum += loss_from_logits(kind, spec.output_kind(), &mut row, label);
            }
        }
    }
    let m = data.len() as f64;
    Ok(sums.into_iter().map(|s| s / m).collect())
}

/// Exact gradient of the minibatch-mean bounded cross entropy over the
/// examples at `batch`.
pub fn grad_empirical_risk(
    kind: LossKind,
    spec: &NetworkSpec,
    w: &WeightVector,
    data: &LabeledDataset,
    batch: &[usize],
) -> Result<Vec<f64>> {
    let LossKind::BoundedCrossEntropy { l_max } = kind else {
        return Err(Error::NotDifferentiable(kind.name()));
    };
    kind.validate()?;
    spec.check_weights(w)?;
    check_dataset(spec, data)?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = data.dim();
    let mut inputs = Vec::with_capacity(batch.len() * dim);
    for &i in batch {
        inputs.extend_from_slice(data.feature(i));
    }
    let tape = run(spec, w.as_slice(), inputs, batch.len());
    let width = spec.output_dim();
    let slope = 1.0 - 2.0 * (-l_max).exp();
    let mut dlogits = tape.logits.clone();
    for (row, &i) in dlogits.chunks_exact_mut(width).zip(batch) {
        let label = data.label(i);
        match spec.output_kind() {
            OutputKind::SigmoidBinary => {
                let z = row[0];
                let (p1, p0) = (sigmoid(z), sigmoid(-z));
                row[0] = if label == 1 {
                    -slope * p1 * p0 / psi_clamp(p1, l_max)
                } else {
                    slope * p1 * p0 / psi_clamp(p0, l_max)
                };
            }
            OutputKind::SoftmaxMulticlass => {
                super::network::logits_to_probabilities(OutputKind::SoftmaxMulticlass, row);
                let py = row[label];
                let factor = -slope * py / psi_clamp(py, l_max);
                for (k, v) in row.iter_mut().enumerate() {
                    let indicator = if k == label { 1.0 } else { 0.0 };
                    *v = factor * (indicator - *v);
                }
            }
        }
    }
    let mut grad = vec![0.0; w.len()];
    backward(
        spec,
        w.as_slice(),
        &tape,
        dlogits,
        1.0 / batch.len() as f64,
        &mut grad,
    );
    Ok(grad)
}
