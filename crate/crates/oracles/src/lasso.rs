//! Cyclic coordinate descent for `min_x 1/2 |Ax - b|^2 + lambda |x|_1`.

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// `a` is `m x n`, row-major.
pub fn oracle_lasso(a: &[f64], m: usize, n: usize, b: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    let col_sq: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| a[i * n + j].powi(2)).sum())
        .collect();
    let mut x = vec![0.0; n];
    let mut resid = b.to_vec(); // b - A x
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho: f64 = (0..m).map(|i| a[i * n + j] * resid[i]).sum::<f64>() + col_sq[j] * x[j];
            let next = soft(rho, lambda) / col_sq[j];
            let delta = next - x[j];
            if delta != 0.0 {
                for i in 0..m {
                    resid[i] -= a[i * n + j] * delta;
                }
            }
            change = change.max(delta.abs());
            x[j] = next;
        }
        if change < 1e-15 {
            break;
        }
    }
    x
}
