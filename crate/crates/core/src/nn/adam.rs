use super::{Gradients, ModelConfig, ModelParameters, NnError, Real, N_TENSORS};

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<T: Real>(params: &ModelParameters<T>) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState { m: zeros(), v: zeros(), t: 0 }
    }
}

/// Hyperparameters of a single update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl From<&ModelConfig> for AdamHyper {
    fn from(c: &ModelConfig) -> Self {
        AdamHyper {
            learning_rate: c.learning_rate,
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            epsilon: c.adam_epsilon,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when the
/// update would produce a non-finite value.
pub fn adam_step<T: Real>(
    params: &mut ModelParameters<T>,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<(), NnError> {
    const NAMES: [&str; N_TENSORS] = [
        "conv weights",
        "conv bias",
        "hidden weights",
        "hidden bias",
        "output weights",
        "output bias",
    ];
    if let Some(layer) = grads.first_non_finite() {
        return Err(NnError::Numerical {
            layer,
            context: "gradient".into(),
        });
    }
    let t = state.t + 1;
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    let mut updated: Vec<Vec<T>> = Vec::with_capacity(N_TENSORS);
    let mut new_m = Vec::with_capacity(N_TENSORS);
    let mut new_v = Vec::with_capacity(N_TENSORS);
    for (i, ((theta, g), (m, v))) in params
        .tensors()
        .iter()
        .zip(grads.tensors())
        .zip(state.m.iter().zip(&state.v))
        .enumerate()
    {
        if theta.len() != g.len() || m.len() != g.len() {
            return Err(NnError::Shape(format!("{}: optimiser state does not match parameters", NAMES[i])));
        }
        let mut th = Vec::with_capacity(theta.len());
        let mut mm = Vec::with_capacity(theta.len());
        let mut vv = Vec::with_capacity(theta.len());
        for j in 0..theta.len() {
            let gj = g[j];
            let mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
            let vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
            let step = hyper.learning_rate * (mj / bc1) / ((vj / bc2).sqrt() + hyper.epsilon);
            let new = theta[j].to_f64() - step;
            if !new.is_finite() {
                return Err(NnError::Numerical {
                    layer: NAMES[i],
                    context: format!("Adam update at step {t}"),
                });
            }
            th.push(T::from_f64(new));
            mm.push(mj);
            vv.push(vj);
        }
        updated.push(th);
        new_m.push(mm);
        new_v.push(vv);
    }
    for (dst, src) in params.tensors_mut().into_iter().zip(updated) {
        *dst = src;
    }
    state.m = new_m;
    state.v = new_v;
    state.t = t;
    Ok(())
}
