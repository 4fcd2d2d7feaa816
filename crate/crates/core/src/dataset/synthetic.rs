//! Seeded synthetic datasets for smoke runs and tests.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RowMatrix, WindowedDataset};

/// Two classes of noisy sinusoids that a small CNN separates easily:
/// apnoea rows oscillate with a short period, non-apnoea rows with a long
/// one. Phases and noise come from `seed`; apnoea rows come first.
pub fn synthetic_dataset(rows_per_class: usize, width: usize, seed: u64) -> WindowedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = RowMatrix::with_capacity(width, 2 * rows_per_class);
    let mut buf = vec![0f32; width];
    for (label, period) in [(1u8, 8.0), (0u8, 40.0)] {
        for _ in 0..rows_per_class {
            let phase = rng.gen_range(0.0..TAU);
            let amp = rng.gen_range(0.5..1.5);
            for (t, v) in buf.iter_mut().enumerate() {
                let noise: f64 = rng.gen_range(-0.2..0.2);
                *v = (amp * (TAU * t as f64 / period + phase).sin() + noise) as f32;
            }
            rows.push_row(&buf, label);
        }
    }
    WindowedDataset { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic_dataset(10, 50, 3);
        assert_eq!(a.n_apnoea_rows(), 10);
        assert_eq!(a.n_non_apnoea_rows(), 10);
        assert_eq!(a.window_size(), 50);
        assert_eq!(a.rows.labels()[..10], [1; 10]);
        assert_eq!(a, synthetic_dataset(10, 50, 3));
        assert_ne!(a, synthetic_dataset(10, 50, 4));
    }
}
