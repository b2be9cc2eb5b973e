//! Analytic gradients against central finite differences.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::Network;
use crate::corpus::Example;
use crate::error::Result;

/// Denominator floor so coordinates with near-zero gradient do not dominate.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Max relative error between `grad` and central differences of `f` at `x`
/// over the listed coordinates.
pub fn check_gradient<F>(mut f: F, x: &[f64], grad: &[f64], coords: &[usize], step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(grad[i], (up - down) / (2.0 * step)));
    }
    worst
}

fn batch_loss(net: &Network, batch: &[Example], seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let mut rng = example_rng(seed, i);
        let (parts, _) = net.loss_and_grad(&ex.grid, ex.class, &mut rng)?;
        total += parts.total;
    }
    Ok(total / batch.len() as f64)
}

fn example_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Checks the full-model gradient of the mean batch loss on
/// `coords_per_tensor` random coordinates of every parameter tensor.
/// Noise and condition dropout are frozen by reseeding per evaluation.
pub fn grad_check(
    net: &Network,
    batch: &[Example],
    coords_per_tensor: usize,
    step: f64,
    seed: u64,
) -> Result<f64> {
    let mut grad = net.params.zeros_like();
    for (i, ex) in batch.iter().enumerate() {
        let mut rng = example_rng(seed, i);
        net.accumulate_grad(
            &ex.grid,
            ex.class,
            &mut rng,
            &mut grad,
            1.0 / batch.len() as f64,
        )?;
    }
    let mut pick = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let n_tensors = net.params.tensors().len();
    for ti in 0..n_tensors {
        let len = net.params.tensors()[ti].1.len();
        let coords = sample(&mut pick, len, coords_per_tensor.min(len));
        for idx in coords.iter() {
            let original = net.params.tensors()[ti]
                .1
                .as_slice()
                .expect("standard layout")[idx];
            let analytic = grad.tensors()[ti].1.as_slice().expect("standard layout")[idx];
            let mut eval = |value: f64| -> Result<f64> {
                probe.params.tensors_mut()[ti]
                    .as_slice_mut()
                    .expect("standard layout")[idx] = value;
                batch_loss(&probe, batch, seed)
            };
            let up = eval(original + step)?;
            let down = eval(original - step)?;
            eval(original)?;
            worst = worst.max(relative_error(analytic, (up - down) / (2.0 * step)));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let w = [0.5, -2.0, 3.25, 1e-3];
        let x = [1.0, 2.0, -1.0, 4.0];
        let f = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let err = check_gradient(f, &x, &w, &[0, 1, 2, 3], 1e-4);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn wrong_gradient_detected() {
        let f = |x: &[f64]| x[0] * x[0];
        let err = check_gradient(f, &[3.0], &[5.0], &[0], 1e-4);
        assert!(err > 0.1);
    }
}

#[cfg(test)]
mod model_tests {
    use super::*;
    use crate::corpus::{generate, DatasetSpec, GeneratorKind};
    use crate::net::ModelConfig;

    fn setup(beta: f64) -> (Network, Vec<Example>) {
        let cfg = ModelConfig {
            h: 2,
            k: 5,
            n_classes: 2,
            layers: 1,
            heads: 2,
            dim: 8,
            latent_dim: 2,
            n_cond: 2,
            beta,
            p_drop_cond: 0.3,
        };
        let mut net = Network::init(&cfg, 5).unwrap();
        // larger weights than the default init so every path carries signal
        for t in net.params.tensors_mut() {
            t.mapv_inplace(|v| v * 20.0);
        }
        let data = generate(&DatasetSpec {
            h: 2,
            k: 5,
            n_classes: 2,
            n_samples: 3,
            kind: GeneratorKind::Markov,
            noise_rate: 0.2,
            seed: 1,
        })
        .unwrap();
        (net, data)
    }

    #[test]
    fn full_model_beta_one() {
        let (net, data) = setup(1.0);
        let err = grad_check(&net, &data, 4, 1e-4, 3).unwrap();
        assert!(err <= 1e-3, "max rel err {err}");
    }

    #[test]
    fn full_model_beta_zero() {
        let (net, data) = setup(0.0);
        let err = grad_check(&net, &data, 4, 1e-4, 4).unwrap();
        assert!(err <= 1e-3, "max rel err {err}");
    }
}
