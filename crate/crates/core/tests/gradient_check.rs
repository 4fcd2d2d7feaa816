//! Central finite differences against the analytic gradients, with the loss
//! recomputed by a straightforward nested-loop forward pass.

use apnea_core::nn::{backward, mean_batch_gradients, ModelConfig, ModelParameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

/// Loss plus the activation pattern (ReLU signs and pooling winners), so
/// that probes which cross a kink can be recognised and skipped.
fn oracle_loss(row: &[f64], label: usize, p: &ModelParameters<f64>) -> (f64, Vec<usize>) {
    let a = p.arch;
    let conv_len = a.window_size - a.kernel_size + 1;
    let mut pattern = Vec::new();
    let mut maps = vec![vec![0.0; conv_len]; a.n_filters];
    for (f, map) in maps.iter_mut().enumerate() {
        for (i, out) in map.iter_mut().enumerate() {
            let mut z = p.conv_bias[f];
            for j in 0..a.kernel_size {
                z += p.conv_weights[f * a.kernel_size + j] * row[i + j];
            }
            if a.conv_relu {
                pattern.push((z > 0.0) as usize);
                z = z.max(0.0);
            }
            *out = z;
        }
    }
    let pooled_len = (conv_len - a.pool_size) / a.pool_stride + 1;
    let mut flat = Vec::new();
    for map in &maps {
        for o in 0..pooled_len {
            let win = &map[o * a.pool_stride..o * a.pool_stride + a.pool_size];
            let (arg, best) = win
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            pattern.push(arg);
            flat.push(best);
        }
    }
    let mut hidden = vec![0.0; a.hidden_units];
    for (u, h) in hidden.iter_mut().enumerate() {
        let mut z = p.hidden_bias[u];
        for (i, x) in flat.iter().enumerate() {
            z += p.hidden_weights[i * a.hidden_units + u] * x;
        }
        pattern.push((z > 0.0) as usize);
        *h = z.max(0.0);
    }
    let mut logits = [0.0; 2];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = p.output_bias[c];
        for (u, h) in hidden.iter().enumerate() {
            *l += p.output_weights[u * 2 + c] * h;
        }
    }
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    (lse - logits[label], pattern)
}

fn random_model(rng: &mut ChaCha8Rng) -> (ModelParameters<f64>, ModelConfig) {
    let window_size = rng.gen_range(8..24);
    let kernel_size = rng.gen_range(2..6);
    let pool_size = rng.gen_range(1..4);
    let cfg = ModelConfig {
        window_size,
        n_filters: rng.gen_range(1..4),
        kernel_size,
        pool_size,
        pool_stride: rng.gen_range(1..=pool_size.max(2)),
        hidden_units: rng.gen_range(2..6),
        conv_relu: rng.gen_bool(0.7),
        ..Default::default()
    };
    let mut p = ModelParameters::<f64>::zeros(cfg.architecture()).unwrap();
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    (p, cfg)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Checks every coordinate; returns (checked, skipped at kinks, worst error).
fn check_model(rows: &[Vec<f64>], labels: &[u8], p: &ModelParameters<f64>) -> (usize, usize, f64) {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let (analytic, _) = mean_batch_gradients(&refs, labels, p).unwrap();
    let batch_loss = |q: &ModelParameters<f64>| {
        let mut total = 0.0;
        let mut pattern = Vec::new();
        for (r, &y) in rows.iter().zip(labels) {
            let (l, pat) = oracle_loss(r, y as usize, q);
            total += l;
            pattern.extend(pat);
        }
        (total / rows.len() as f64, pattern)
    };
    let (_, base_pattern) = batch_loss(p);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for t in 0..6 {
        for j in 0..p.tensors()[t].len() {
            let mut plus = p.clone();
            plus.tensors_mut()[t][j] += H;
            let mut minus = p.clone();
            minus.tensors_mut()[t][j] -= H;
            let (lp, pp) = batch_loss(&plus);
            let (lm, pm) = batch_loss(&minus);
            if pp != base_pattern || pm != base_pattern {
                skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * H);
            worst = worst.max(rel_err(analytic.tensors()[t][j], numeric));
            checked += 1;
        }
    }
    (checked, skipped, worst)
}

#[test]
fn single_example_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for m in 0..25 {
        let (p, cfg) = random_model(&mut rng);
        let row: Vec<f64> = (0..cfg.window_size).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let label = rng.gen_range(0..2u8);
        let (checked, skipped, worst) = check_model(std::slice::from_ref(&row), &[label], &p);
        assert!(checked > skipped, "model {m}: too many kinks ({skipped} of {})", checked + skipped);
        assert!(worst < TOLERANCE, "model {m} ({cfg:?}): worst relative error {worst:e}");

        let (g, loss) = backward(&row, label, &p).unwrap();
        assert!((loss - oracle_loss(&row, label as usize, &p).0).abs() < 1e-12);
        assert_eq!(g.tensors().map(|t| t.len()), p.tensors().map(|t| t.len()));
    }
}

#[test]
fn batch_mean_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in 0..8 {
        let (p, cfg) = random_model(&mut rng);
        let n = rng.gen_range(2..6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..cfg.window_size).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let (_, _, worst) = check_model(&rows, &labels, &p);
        assert!(worst < TOLERANCE, "batch model {m}: worst relative error {worst:e}");
    }
}
