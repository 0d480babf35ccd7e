//! 1-D ROF denoising `min_x 1/2 |x - f|^2 + lambda * sum_i |x[i+1] - x[i]|`
//! solved by projected gradient on the dense dual problem.

/// Largest signal length accepted.
pub const MAX_LEN: usize = 64;

/// Dense forward-difference matrix, `(n-1) x n`, row-major.
fn difference_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n - 1)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = -1.0;
            row[i + 1] = 1.0;
            row
        })
        .collect()
}

/// Primal solution recovered as `x = f - D^T p` with `p` the dual optimum
/// over the box `|p_i| <= lambda`.
pub fn oracle_rof_1d(f: &[f64], lambda: f64) -> Vec<f64> {
    let n = f.len();
    assert!(
        (1..=MAX_LEN).contains(&n),
        "ROF oracle accepts 1..={MAX_LEN} samples"
    );
    if n == 1 {
        return f.to_vec();
    }
    let d = difference_matrix(n);
    let mut p = vec![0.0; n - 1];
    // |D D^T| < 4
    let step = 0.25;
    let primal = |p: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| f[j] - (0..n - 1).map(|i| d[i][j] * p[i]).sum::<f64>())
            .collect()
    };
    for _ in 0..2_000_000 {
        let x = primal(&p);
        // gradient of 1/2 |D^T p - f|^2 is -D x
        let mut change: f64 = 0.0;
        for i in 0..n - 1 {
            let dx: f64 = (0..n).map(|j| d[i][j] * x[j]).sum();
            let next = (p[i] + step * dx).clamp(-lambda, lambda);
            change = change.max((next - p[i]).abs());
            p[i] = next;
        }
        if change < 1e-13 {
            break;
        }
    }
    primal(&p)
}

/// ROF objective, for monotonicity checks.
pub fn rof_objective(x: &[f64], f: &[f64], lambda: f64) -> f64 {
    0.5 * x.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        + lambda * x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
}
