//! Backpropagation of the cross-entropy loss.
//!
//! Each example is first reduced to a compact [`ExampleDeltas`]: the layer
//! inputs and the loss derivatives at each layer's pre-activation. Weight
//! gradients are then outer products of the two, summed over examples. The
//! batch reducer parallelises across parameters and sums every parameter's
//! contributions in example order, so results do not depend on the thread
//! count.

use rayon::prelude::*;

use super::layers::{cross_entropy, forward};
use super::{Gradients, ModelParameters, NnError, Real, N_CLASSES};

/// Per-example quantities needed to form weight gradients.
#[derive(Debug, Clone)]
pub struct ExampleDeltas {
    /// Flattened pooled maps (input of the hidden layer).
    pub pooled: Vec<f64>,
    /// Feature-map index that produced each pooled value.
    pub argmax: Vec<u32>,
    /// dL/d(conv pre-activation) at each argmax position.
    pub conv_delta: Vec<f64>,
    pub hidden: Vec<f64>,
    /// dL/d(hidden pre-activation).
    pub hidden_delta: Vec<f64>,
    /// dL/d(logits) = probs - onehot(label).
    pub output_delta: [f64; N_CLASSES],
    pub loss: f64,
    pub probs: [f64; N_CLASSES],
}

impl ExampleDeltas {
    pub fn correct(&self, label: u8) -> bool {
        predicted_label(&self.probs) == label
    }
}

/// Class with the larger probability; ties go to class 0.
#[inline]
pub fn predicted_label(probs: &[f64; N_CLASSES]) -> u8 {
    (probs[1] > probs[0]) as u8
}

fn check_finite(values: &[f64], layer: &'static str) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::Numerical {
            layer,
            context: String::new(),
        })
    }
}

pub fn example_deltas<T: Real, R: Real>(
    row: &[R],
    label: u8,
    params: &ModelParameters<T>,
) -> Result<ExampleDeltas, NnError> {
    if label as usize >= N_CLASSES {
        return Err(NnError::Shape(format!("label {label} is not 0 or 1")));
    }
    let a = &params.arch;
    let h = a.hidden_units;
    let fwd = forward(row, params)?;
    check_finite(&fwd.maps.values, "convolution")?;
    check_finite(&fwd.mlp.hidden, "hidden")?;
    check_finite(&fwd.mlp.logits, "output")?;

    let loss = cross_entropy(&fwd.mlp.logits, label as usize);
    let mut output_delta = fwd.mlp.probs;
    output_delta[label as usize] -= 1.0;

    let hidden_delta: Vec<f64> = (0..h)
        .map(|u| {
            if fwd.mlp.hidden[u] > 0.0 {
                (0..N_CLASSES)
                    .map(|c| params.output_weights[u * N_CLASSES + c].to_f64() * output_delta[c])
                    .sum()
            } else {
                0.0
            }
        })
        .collect();

    let pooled = fwd.pooled.values;
    let argmax = fwd.pooled.argmax;
    let conv_delta: Vec<f64> = argmax
        .iter()
        .enumerate()
        .map(|(i, &src)| {
            if !fwd.maps.passes_gradient(src as usize) {
                return 0.0;
            }
            let w = &params.hidden_weights[i * h..(i + 1) * h];
            super::layers::dot(w, &hidden_delta)
        })
        .collect();
    check_finite(&conv_delta, "pooling")?;

    Ok(ExampleDeltas {
        pooled,
        argmax,
        conv_delta,
        hidden: fwd.mlp.hidden,
        hidden_delta,
        output_delta,
        loss,
        probs: fwd.mlp.probs,
    })
}

/// Position in the input row where the conv window behind `map_index` starts.
#[inline]
fn window_start(map_index: u32, conv_len: usize) -> usize {
    map_index as usize % conv_len
}

fn accumulate_small(grads: &mut Gradients, d: &ExampleDeltas, n_filters: usize, pooled_len: usize) {
    let h = grads.hidden_bias.len();
    for f in 0..n_filters {
        for p in 0..pooled_len {
            grads.conv_bias[f] += d.conv_delta[f * pooled_len + p];
        }
    }
    for u in 0..h {
        grads.hidden_bias[u] += d.hidden_delta[u];
        for c in 0..N_CLASSES {
            grads.output_weights[u * N_CLASSES + c] += d.hidden[u] * d.output_delta[c];
        }
    }
    for c in 0..N_CLASSES {
        grads.output_bias[c] += d.output_delta[c];
    }
}

fn accumulate_conv_filter<R: Real>(
    gw: &mut [f64],
    f: usize,
    row: &[R],
    d: &ExampleDeltas,
    conv_len: usize,
    pooled_len: usize,
) {
    let k = gw.len();
    for p in 0..pooled_len {
        let g = d.conv_delta[f * pooled_len + p];
        if g == 0.0 {
            continue;
        }
        let start = window_start(d.argmax[f * pooled_len + p], conv_len);
        for (acc, x) in gw.iter_mut().zip(&row[start..start + k]) {
            *acc += g * x.to_f64();
        }
    }
}

fn accumulate_hidden_row(gw: &mut [f64], i: usize, d: &ExampleDeltas) {
    let x = d.pooled[i];
    if x == 0.0 {
        return;
    }
    for (acc, &du) in gw.iter_mut().zip(&d.hidden_delta) {
        *acc += x * du;
    }
}

/// Adds one example's gradient contribution to `grads`.
pub fn accumulate<T: Real, R: Real>(grads: &mut Gradients, row: &[R], d: &ExampleDeltas, params: &ModelParameters<T>) {
    let a = &params.arch;
    let (k, h, l, pl) = (a.kernel_size, a.hidden_units, a.conv_len(), a.pooled_len());
    accumulate_small(grads, d, a.n_filters, pl);
    for f in 0..a.n_filters {
        accumulate_conv_filter(&mut grads.conv_weights[f * k..(f + 1) * k], f, row, d, l, pl);
    }
    for (i, gw) in grads.hidden_weights.chunks_exact_mut(h).enumerate() {
        accumulate_hidden_row(gw, i, d);
    }
}

/// Gradient and loss of a single example.
pub fn backward<T: Real, R: Real>(
    row: &[R],
    label: u8,
    params: &ModelParameters<T>,
) -> Result<(Gradients, f64), NnError> {
    let d = example_deltas(row, label, params)?;
    let mut g = Gradients::zeros_like(params);
    accumulate(&mut g, row, &d, params);
    Ok((g, d.loss))
}

/// Adds the contributions of `rows` (with their deltas) to `grads`,
/// parallel over parameters, sequential over examples.
pub fn accumulate_batch<T: Real, R: Real>(
    grads: &mut Gradients,
    rows: &[&[R]],
    deltas: &[ExampleDeltas],
    params: &ModelParameters<T>,
) {
    let a = &params.arch;
    let (k, h, l, pl) = (a.kernel_size, a.hidden_units, a.conv_len(), a.pooled_len());
    for d in deltas {
        accumulate_small(grads, d, a.n_filters, pl);
    }
    grads
        .conv_weights
        .par_chunks_exact_mut(k)
        .enumerate()
        .for_each(|(f, gw)| {
            for (row, d) in rows.iter().zip(deltas) {
                accumulate_conv_filter(gw, f, row, d, l, pl);
            }
        });
    grads
        .hidden_weights
        .par_chunks_mut(h * 64)
        .enumerate()
        .for_each(|(block, gblock)| {
            for (j, gw) in gblock.chunks_exact_mut(h).enumerate() {
                let i = block * 64 + j;
                for d in deltas {
                    accumulate_hidden_row(gw, i, d);
                }
            }
        });
}

/// Number of examples whose deltas are held in memory at once.
pub(crate) const DELTA_CHUNK: usize = 256;

/// Summed gradient, summed loss and correct count over `indices` of a row
/// set. The caller divides by the batch size.
pub fn batch_gradients<T: Real, R: Real>(
    rows: &[&[R]],
    labels: &[u8],
    params: &ModelParameters<T>,
) -> Result<(Gradients, f64, usize), NnError> {
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    let mut correct = 0;
    for (chunk_rows, chunk_labels) in rows.chunks(DELTA_CHUNK).zip(labels.chunks(DELTA_CHUNK)) {
        let deltas: Vec<ExampleDeltas> = chunk_rows
            .par_iter()
            .zip(chunk_labels.par_iter())
            .map(|(row, &y)| example_deltas(row, y, params))
            .collect::<Result<_, _>>()?;
        for (d, &y) in deltas.iter().zip(chunk_labels) {
            loss += d.loss;
            correct += d.correct(y) as usize;
        }
        accumulate_batch(&mut grads, chunk_rows, &deltas, params);
    }
    Ok((grads, loss, correct))
}

/// Mean-loss gradient of a batch.
pub fn mean_batch_gradients<T: Real, R: Real>(
    rows: &[&[R]],
    labels: &[u8],
    params: &ModelParameters<T>,
) -> Result<(Gradients, f64), NnError> {
    let (mut g, loss, _) = batch_gradients(rows, labels, params)?;
    let n = rows.len().max(1) as f64;
    g.scale(1.0 / n);
    Ok((g, loss / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_parameters, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> ModelParameters<f64> {
        let cfg = ModelConfig {
            window_size: 12,
            n_filters: 2,
            kernel_size: 3,
            hidden_units: 4,
            seed,
            ..Default::default()
        };
        init_parameters(&cfg).unwrap()
    }

    fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn confident_correct_prediction_has_tiny_output_gradient() {
        let mut p = tiny(1);
        p.output_bias = vec![-40.0, 40.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row = random_row(&mut rng, 12);
        let (g, loss) = backward(&row, 1, &p).unwrap();
        assert!(loss < 1e-30);
        assert!(g.output_bias.iter().all(|v| v.abs() < 1e-30));
        assert!(g.output_weights.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn duplicated_example_mean_equals_single() {
        let p = tiny(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let row = random_row(&mut rng, 12);
        let (single, _) = backward(&row, 0, &p).unwrap();
        let rows = [row.as_slice(), row.as_slice()];
        let (mean, _) = mean_batch_gradients(&rows, &[0, 0], &p).unwrap();
        for (a, b) in single.tensors().iter().zip(mean.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn batch_equals_sequential_accumulation() {
        let p = tiny(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| random_row(&mut rng, 12)).collect();
        let labels: Vec<u8> = (0..300).map(|i| (i % 3 == 0) as u8).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (batch, loss, _) = batch_gradients(&refs, &labels, &p).unwrap();
        let mut seq = Gradients::zeros_like(&p);
        let mut seq_loss = 0.0;
        for (r, &y) in rows.iter().zip(&labels) {
            let d = example_deltas(r, y, &p).unwrap();
            seq_loss += d.loss;
            accumulate(&mut seq, r, &d, &p);
        }
        assert_eq!(batch, seq);
        assert_eq!(loss, seq_loss);
    }

    #[test]
    fn rejects_bad_label_and_shape() {
        let p = tiny(1);
        assert!(matches!(backward(&[0.0f64; 12], 2, &p), Err(NnError::Shape(_))));
        assert!(matches!(backward(&[0.0f64; 11], 0, &p), Err(NnError::Shape(_))));
    }

    #[test]
    fn non_finite_input_is_numerical_error() {
        let p = tiny(1);
        let mut row = vec![0.0f64; 12];
        row[3] = f64::NAN;
        assert!(matches!(backward(&row, 0, &p), Err(NnError::Numerical { .. })));
    }
}
