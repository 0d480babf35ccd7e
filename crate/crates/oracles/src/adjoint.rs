//! Randomised adjoint pairing test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest relative pairing error `|<Ax, y> - <x, A'y>| / (|Ax||y| + |x||A'y|)`
/// over `trials` uniform random draws. Vectors are real; complex data is
/// expected interleaved, for which the real inner product equals
/// `Re <x, y>`.
pub fn max_pairing_error<F, G>(
    n_in: usize,
    n_out: usize,
    apply: F,
    adjoint: G,
    trials: usize,
    seed: u64,
) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = apply(&x);
        let aty = adjoint(&y);
        assert_eq!(ax.len(), n_out);
        assert_eq!(aty.len(), n_in);
        let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&aty);
        if scale == 0.0 {
            continue;
        }
        worst = worst.max((dot(&ax, &y) - dot(&x, &aty)).abs() / scale);
    }
    worst
}
