use super::NnError;

/// Hyperparameters of the network and its optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub window_size: usize,
    pub n_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub hidden_units: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Apply ReLU to the convolution output.
    pub conv_relu: bool,
    /// Must be 0; dropout is not implemented.
    pub dropout: f64,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub early_stopping_patience: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window_size: 500,
            n_filters: 150,
            kernel_size: 150,
            pool_size: 2,
            pool_stride: 2,
            hidden_units: 128,
            batch_size: 8192,
            epochs: 50,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            conv_relu: true,
            dropout: 0.0,
            early_stopping_patience: None,
        }
    }
}

/// Layer dimensions implied by a [`ModelConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub window_size: usize,
    pub n_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub hidden_units: usize,
    pub conv_relu: bool,
}

pub const N_CLASSES: usize = 2;

impl Architecture {
    /// Convolution output length, `W - k + 1`.
    pub fn conv_len(&self) -> usize {
        self.window_size - self.kernel_size + 1
    }

    /// Pooled length, `floor((L - pool) / stride) + 1`.
    pub fn pooled_len(&self) -> usize {
        (self.conv_len() - self.pool_size) / self.pool_stride + 1
    }

    /// Width of the flattened pooled maps fed to the hidden layer.
    pub fn flat_width(&self) -> usize {
        self.n_filters * self.pooled_len()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let err = |m: String| Err(NnError::Config(m));
        if self.window_size == 0 || self.n_filters == 0 || self.kernel_size == 0 || self.hidden_units == 0 {
            return err(format!("all layer sizes must be positive: {self:?}"));
        }
        if self.pool_size == 0 || self.pool_stride == 0 {
            return err("pool size and stride must be positive".into());
        }
        if self.kernel_size > self.window_size {
            return err(format!(
                "kernel size {} exceeds window size {}",
                self.kernel_size, self.window_size
            ));
        }
        if self.conv_len() < self.pool_size {
            return err(format!(
                "convolution output length {} is shorter than the pool size {}",
                self.conv_len(),
                self.pool_size
            ));
        }
        Ok(())
    }
}

impl ModelConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            window_size: self.window_size,
            n_filters: self.n_filters,
            kernel_size: self.kernel_size,
            pool_size: self.pool_size,
            pool_stride: self.pool_stride,
            hidden_units: self.hidden_units,
            conv_relu: self.conv_relu,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.architecture().validate()?;
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(NnError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) || b == 0.0 {
                return Err(NnError::Config(format!("Adam {name} {b} must lie in (0, 1)")));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(NnError::Config("Adam epsilon must be positive".into()));
        }
        if self.dropout != 0.0 {
            return Err(NnError::Config("dropout is not supported; set it to 0".into()));
        }
        Ok(())
    }
}
