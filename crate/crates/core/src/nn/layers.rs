//! Forward passes of the individual layers.

use super::{ModelParameters, NnError, Real, N_CLASSES};

/// Dot product with eight independent `f64` partial sums, combined in a
/// fixed order.
#[inline]
pub(crate) fn dot<A: Real, B: Real>(a: &[A], b: &[B]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k].to_f64() * y[k].to_f64();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x.to_f64() * y.to_f64();
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Convolution output, one row of length `len` per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub n_filters: usize,
    pub len: usize,
    /// Activations, after ReLU when `rectified`.
    pub values: Vec<f64>,
    pub rectified: bool,
}

impl FeatureMaps {
    pub fn map(&self, f: usize) -> &[f64] {
        &self.values[f * self.len..(f + 1) * self.len]
    }

    /// Derivative of the activation at a position (ReLU'(0) = 0).
    #[inline]
    pub fn passes_gradient(&self, idx: usize) -> bool {
        !self.rectified || self.values[idx] > 0.0
    }
}

/// Stride-1, unpadded cross-correlation of `row` with every filter, plus
/// bias, followed by ReLU when the architecture enables it.
pub fn conv1d_forward<T: Real, R: Real>(row: &[R], params: &ModelParameters<T>) -> Result<FeatureMaps, NnError> {
    let a = &params.arch;
    if row.len() != a.window_size {
        return Err(NnError::Shape(format!(
            "input row has {} samples, model expects {}",
            row.len(),
            a.window_size
        )));
    }
    let k = a.kernel_size;
    let len = a.conv_len();
    let mut values = Vec::with_capacity(a.n_filters * len);
    for f in 0..a.n_filters {
        let filter = &params.conv_weights[f * k..(f + 1) * k];
        let bias = params.conv_bias[f].to_f64();
        for i in 0..len {
            let z = bias + dot(filter, &row[i..i + k]);
            // NaN must propagate, so no f64::max here
            values.push(if a.conv_relu && z < 0.0 { 0.0 } else { z });
        }
    }
    Ok(FeatureMaps {
        n_filters: a.n_filters,
        len,
        values,
        rectified: a.conv_relu,
    })
}

/// Max-pooled maps and the flat index into the feature maps of each maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub n_filters: usize,
    pub len: usize,
    /// `n_filters x len`, row-major; this is also the MLP input.
    pub values: Vec<f64>,
    pub argmax: Vec<u32>,
}

/// Windowed maximum per filter. Ties go to the first index.
pub fn maxpool_forward(maps: &FeatureMaps, pool_size: usize, stride: usize) -> Result<Pooled, NnError> {
    if pool_size == 0 || stride == 0 {
        return Err(NnError::Shape("pool size and stride must be positive".into()));
    }
    if maps.len < pool_size {
        return Err(NnError::Shape(format!(
            "feature map length {} is shorter than pool size {pool_size}",
            maps.len
        )));
    }
    let len = (maps.len - pool_size) / stride + 1;
    let mut values = Vec::with_capacity(maps.n_filters * len);
    let mut argmax = Vec::with_capacity(maps.n_filters * len);
    for f in 0..maps.n_filters {
        let map = maps.map(f);
        for p in 0..len {
            let start = p * stride;
            let mut best = start;
            for i in start + 1..start + pool_size {
                if map[i] > map[best] {
                    best = i;
                }
            }
            values.push(map[best]);
            argmax.push((f * maps.len + best) as u32);
        }
    }
    Ok(Pooled {
        n_filters: maps.n_filters,
        len,
        values,
        argmax,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOutput {
    /// Hidden activations after ReLU.
    pub hidden: Vec<f64>,
    pub logits: [f64; N_CLASSES],
    pub probs: [f64; N_CLASSES],
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln softmax(logits)[label]`, computed as log-sum-exp minus the logit.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    (lse - logits[label]).max(0.0)
}

/// Hidden ReLU layer followed by the two-way softmax output.
pub fn mlp_forward<T: Real>(input: &[f64], params: &ModelParameters<T>) -> Result<MlpOutput, NnError> {
    let h = params.arch.hidden_units;
    if input.len() * h != params.hidden_weights.len() {
        return Err(NnError::Shape(format!(
            "MLP input has {} values, hidden layer expects {}",
            input.len(),
            params.hidden_weights.len() / h
        )));
    }
    let mut z: Vec<f64> = params.hidden_bias.iter().map(|b| b.to_f64()).collect();
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let w = &params.hidden_weights[i * h..(i + 1) * h];
        for (acc, wu) in z.iter_mut().zip(w) {
            *acc += x * wu.to_f64();
        }
    }
    let hidden: Vec<f64> = z.into_iter().map(|v| if v < 0.0 { 0.0 } else { v }).collect();
    let mut logits = [0.0; N_CLASSES];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = params.output_bias[c].to_f64()
            + hidden
                .iter()
                .enumerate()
                .map(|(u, &hu)| hu * params.output_weights[u * N_CLASSES + c].to_f64())
                .sum::<f64>();
    }
    let p = softmax(&logits);
    Ok(MlpOutput {
        hidden,
        logits,
        probs: [p[0], p[1]],
    })
}

/// Full forward pass of one row.
#[derive(Debug, Clone)]
pub struct Forward {
    pub maps: FeatureMaps,
    pub pooled: Pooled,
    pub mlp: MlpOutput,
}

pub fn forward<T: Real, R: Real>(row: &[R], params: &ModelParameters<T>) -> Result<Forward, NnError> {
    let maps = conv1d_forward(row, params)?;
    let pooled = maxpool_forward(&maps, params.arch.pool_size, params.arch.pool_stride)?;
    let mlp = mlp_forward(&pooled.values, params)?;
    Ok(Forward { maps, pooled, mlp })
}
