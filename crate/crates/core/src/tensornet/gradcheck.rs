use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Parameterized};

/// Compares analytic gradients against central differences.
///
/// `f` must return the loss and accumulate its gradient into the model's
/// `Param::grad` fields; grads are zeroed before every call. Up to `probes`
/// coordinates are drawn uniformly over all parameters (all of them when
/// there are fewer). Returns the max of
/// `|analytic - numeric| / (|analytic| + |numeric|)`, where pairs whose
/// magnitudes sum below `1e-7` (dead units, rounding noise) count as exact.
pub fn grad_check<M, F>(model: &mut M, mut f: F, eps: f64, probes: usize, seed: u64) -> f64
where
    M: Parameterized,
    F: FnMut(&mut M) -> f64,
{
    model.zero_grad();
    f(model);
    let analytic: Vec<Matrix> = model.params().iter().map(|p| p.grad.clone()).collect();

    let sizes: Vec<usize> = analytic.iter().map(Matrix::len).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if total <= probes {
        (0..total).collect()
    } else {
        sample(&mut rng, total, probes).into_vec()
    };

    let mut worst: f64 = 0.0;
    for flat in picks {
        let (mut pi, mut off) = (0, flat);
        while off >= sizes[pi] {
            off -= sizes[pi];
            pi += 1;
        }
        let original = model.params()[pi].value.as_slice()[off];

        model.params_mut()[pi].value.as_mut_slice()[off] = original + eps;
        model.zero_grad();
        let plus = f(model);
        model.params_mut()[pi].value.as_mut_slice()[off] = original - eps;
        model.zero_grad();
        let minus = f(model);
        model.params_mut()[pi].value.as_mut_slice()[off] = original;

        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[pi].as_slice()[off];
        let scale = a.abs() + numeric.abs();
        let rel = if scale < 1e-7 {
            0.0
        } else {
            (a - numeric).abs() / scale
        };
        worst = worst.max(rel);
    }
    model.zero_grad();
    worst
}
