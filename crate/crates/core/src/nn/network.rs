use super::{NetworkSpec, OutputKind, WeightVector};
use crate::error::{Error, Result};

/// `c = alpha * op(a) * op(b) + beta * c` for row-major buffers; `a_t` / `b_t`
/// read the stored matrix transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // a is m x k (or stored k x m when transposed), b is k x n (or n x k).
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the assertion above guarantees every strided access stays in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Activations recorded during a batch forward pass.
pub(crate) struct Tape {
    pub batch: usize,
    /// `layers[0]` holds the inputs; `layers[l]` the post-ReLU output of hidden layer `l`.
    pub layers: Vec<Vec<f64>>,
    /// Output-layer pre-activations, `batch x out`.
    pub logits: Vec<f64>,
}

pub(crate) fn run(spec: &NetworkSpec, w: &[f64], inputs: Vec<f64>, batch: usize) -> Tape {
    let n_layers = spec.num_layers();
    let mut layers = Vec::with_capacity(n_layers);
    layers.push(inputs);
    let mut logits = Vec::new();
    for (l, (wo, bo, fan_in, fan_out)) in spec.layer_layout().enumerate() {
        let mut z = vec![0.0; batch * fan_out];
        let bias = &w[bo..bo + fan_out];
        for row in z.chunks_exact_mut(fan_out) {
            row.copy_from_slice(bias);
        }
        gemm(
            batch,
            fan_in,
            fan_out,
            1.0,
            &layers[l],
            false,
            &w[wo..bo],
            true,
            1.0,
            &mut z,
        );
        if l + 1 == n_layers {
            logits = z;
        } else {
            for v in &mut z {
                *v = v.max(0.0);
            }
            layers.push(z);
        }
    }
    Tape {
        batch,
        layers,
        logits,
    }
}

/// Backpropagates `dlogits` (gradient of the objective w.r.t. the output
/// pre-activations) into `grad`, adding `scale * dObjective/dw`.
pub(crate) fn backward(
    spec: &NetworkSpec,
    w: &[f64],
    tape: &Tape,
    dlogits: Vec<f64>,
    scale: f64,
    grad: &mut [f64],
) {
    let layout: Vec<_> = spec.layer_layout().collect();
    let batch = tape.batch;
    let mut delta = dlogits;
    for (l, &(wo, bo, fan_in, fan_out)) in layout.iter().enumerate().rev() {
        let input = &tape.layers[l];
        // dW = delta^T * input
        gemm(
            fan_out,
            batch,
            fan_in,
            scale,
            &delta,
            true,
            input,
            false,
            1.0,
            &mut grad[wo..bo],
        );
        let gb = &mut grad[bo..bo + fan_out];
        for row in delta.chunks_exact(fan_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += scale * d;
            }
        }
        if l == 0 {
            break;
        }
        let mut prev = vec![0.0; batch * fan_in];
        gemm(
            batch,
            fan_out,
            fan_in,
            1.0,
            &delta,
            false,
            &w[wo..bo],
            false,
            0.0,
            &mut prev,
        );
        for (p, &a) in prev.iter_mut().zip(input) {
            if a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
}

/// Converts a row of logits into output probabilities in place.
pub(crate) fn logits_to_probabilities(kind: OutputKind, row: &mut [f64]) {
    match kind {
        OutputKind::SigmoidBinary => row[0] = sigmoid(row[0]),
        OutputKind::SoftmaxMulticlass => {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_inputs(spec: &NetworkSpec, w: &WeightVector, len: usize, batch: usize) -> Result<()> {
    spec.check_weights(w)?;
    if len != batch * spec.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input feature length",
            expected: batch * spec.input_dim(),
            got: len,
        });
    }
    Ok(())
}

/// Output probability vector `p(w, x)`.
pub fn forward(spec: &NetworkSpec, w: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    forward_batch(spec, w, x, 1)
}

/// Probabilities for `batch` row-major inputs; `batch x output_dim` values.
pub fn forward_batch(
    spec: &NetworkSpec,
    w: &WeightVector,
    inputs: &[f64],
    batch: usize,
) -> Result<Vec<f64>> {
    check_inputs(spec, w, inputs.len(), batch)?;
    let mut out = run(spec, w.as_slice(), inputs.to_vec(), batch).logits;
    let width = spec.output_dim();
    for row in out.chunks_exact_mut(width) {
        logits_to_probabilities(spec.output_kind(), row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uninformative_outputs() {
        let spec = NetworkSpec::binary(3, &[4]).unwrap();
        let w = WeightVector::zeros(spec.parameter_count());
        assert_eq!(forward(&spec, &w, &[1.0, -2.0, 3.0]).unwrap(), vec![0.5]);

        let spec = NetworkSpec::multiclass(3, &[4], 10).unwrap();
        let w = WeightVector::zeros(spec.parameter_count());
        let p = forward(&spec, &w, &[1.0, -2.0, 3.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn single_unit_matches_formula() {
        let spec = NetworkSpec::binary(1, &[]).unwrap();
        let w = WeightVector::new(vec![2.0, -1.0]).unwrap();
        let p = forward(&spec, &w, &[1.0]).unwrap()[0];
        // 1 / (1 + e^-1), evaluated at 30 digits
        assert!((p - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let spec = NetworkSpec::binary(3, &[2]).unwrap();
        let w = WeightVector::zeros(spec.parameter_count());
        assert!(matches!(
            forward(&spec, &w, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let short = WeightVector::zeros(3);
        assert!(forward(&spec, &short, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn batch_rows_match_single_forward() {
        let spec = NetworkSpec::multiclass(2, &[3, 3], 3).unwrap();
        let w = spec.init_weights(&mut crate::rng::RngStream::new(9));
        let x = [0.3, -1.0, 2.0, 0.5];
        let batch = forward_batch(&spec, &w, &x, 2).unwrap();
        let second = forward(&spec, &w, &x[2..]).unwrap();
        for (a, b) in batch[3..].iter().zip(&second) {
            assert!((a - b).abs() < 1e-15);
        }
        let sum: f64 = batch[..3].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = NetworkSpec::binary(4, &[8, 8]).unwrap();
        let w = spec.init_weights(&mut crate::rng::RngStream::new(2));
        let x = [0.1, 0.2, -0.3, 0.4];
        let a = forward(&spec, &w, &x).unwrap();
        let b = forward(&spec, &w, &x).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
}
