use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, ModelConfig, NnError, N_CLASSES};

/// Scalar type for parameters and inputs. Reductions always run in `f64`.
pub trait Real: Copy + Default + Debug + PartialEq + PartialOrd + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Learned weights.
///
/// * `conv_weights`: `n_filters x kernel_size`, row-major.
/// * `hidden_weights`: `flat_width x hidden_units`, row-major by input.
/// * `output_weights`: `hidden_units x 2`, row-major by input.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    pub arch: Architecture,
    pub conv_weights: Vec<T>,
    pub conv_bias: Vec<T>,
    pub hidden_weights: Vec<T>,
    pub hidden_bias: Vec<T>,
    pub output_weights: Vec<T>,
    pub output_bias: Vec<T>,
}

/// Number of parameter tensors, in the order of [`ModelParameters::tensors`].
pub const N_TENSORS: usize = 6;

impl<T: Real> ModelParameters<T> {
    pub fn zeros(arch: Architecture) -> Result<Self, NnError> {
        arch.validate()?;
        let z = |n: usize| vec![T::default(); n];
        Ok(ModelParameters {
            arch,
            conv_weights: z(arch.n_filters * arch.kernel_size),
            conv_bias: z(arch.n_filters),
            hidden_weights: z(arch.flat_width() * arch.hidden_units),
            hidden_bias: z(arch.hidden_units),
            output_weights: z(arch.hidden_units * N_CLASSES),
            output_bias: z(N_CLASSES),
        })
    }

    pub fn tensors(&self) -> [&[T]; N_TENSORS] {
        [
            &self.conv_weights,
            &self.conv_bias,
            &self.hidden_weights,
            &self.hidden_bias,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; N_TENSORS] {
        [
            &mut self.conv_weights,
            &mut self.conv_bias,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.to_f64().is_finite()))
    }

    /// Shape check against the architecture; used after deserialising.
    pub fn check_shapes(&self) -> Result<(), NnError> {
        let a = &self.arch;
        let expected = [
            a.n_filters * a.kernel_size,
            a.n_filters,
            a.flat_width() * a.hidden_units,
            a.hidden_units,
            a.hidden_units * N_CLASSES,
            N_CLASSES,
        ];
        for (i, (t, e)) in self.tensors().iter().zip(expected).enumerate() {
            if t.len() != e {
                return Err(NnError::Shape(format!("tensor {i} has {} values, expected {e}", t.len())));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        let c = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64())).collect();
        ModelParameters {
            arch: self.arch,
            conv_weights: c(&self.conv_weights),
            conv_bias: c(&self.conv_bias),
            hidden_weights: c(&self.hidden_weights),
            hidden_bias: c(&self.hidden_bias),
            output_weights: c(&self.output_weights),
            output_bias: c(&self.output_bias),
        }
    }
}

/// Seeded He-uniform initialisation: weights in `±sqrt(6 / fan_in)`, biases 0.
pub fn init_parameters<T: Real>(cfg: &ModelConfig) -> Result<ModelParameters<T>, NnError> {
    cfg.architecture().validate()?;
    let mut p = ModelParameters::zeros(cfg.architecture())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = p.arch;
    let fill = |w: &mut Vec<T>, fan_in: usize, rng: &mut ChaCha8Rng| {
        let bound = (6.0 / fan_in as f64).sqrt();
        for v in w.iter_mut() {
            *v = T::from_f64(rng.gen_range(-bound..bound));
        }
    };
    fill(&mut p.conv_weights, a.kernel_size, &mut rng);
    fill(&mut p.hidden_weights, a.flat_width(), &mut rng);
    fill(&mut p.output_weights, a.hidden_units, &mut rng);
    Ok(p)
}

/// Gradient buffers, laid out like [`ModelParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv_weights: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like<T: Real>(p: &ModelParameters<T>) -> Self {
        Gradients {
            conv_weights: vec![0.0; p.conv_weights.len()],
            conv_bias: vec![0.0; p.conv_bias.len()],
            hidden_weights: vec![0.0; p.hidden_weights.len()],
            hidden_bias: vec![0.0; p.hidden_bias.len()],
            output_weights: vec![0.0; p.output_weights.len()],
            output_bias: vec![0.0; p.output_bias.len()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; N_TENSORS] {
        [
            &self.conv_weights,
            &self.conv_bias,
            &self.hidden_weights,
            &self.hidden_bias,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; N_TENSORS] {
        [
            &mut self.conv_weights,
            &mut self.conv_bias,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        const NAMES: [&str; N_TENSORS] = [
            "conv weights",
            "conv bias",
            "hidden weights",
            "hidden bias",
            "output weights",
            "output bias",
        ];
        self.tensors()
            .iter()
            .position(|t| t.iter().any(|v| !v.is_finite()))
            .map(|i| NAMES[i])
    }
}
