//! SSIM and sLMSE by direct transcription of their definitions.

pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// SSIM over every 8x8 window (stride 1, uniform weights), averaged, after
/// dividing both images by the maximum of the reference `u`.
pub fn oracle_ssim(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> f64 {
    const WIN: usize = 8;
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a: Vec<f64> = u.iter().map(|v| v / peak).collect();
    let b: Vec<f64> = u_hat.iter().map(|v| v / peak).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=h - WIN {
        for left in 0..=w - WIN {
            let mut pix_a = Vec::with_capacity(WIN * WIN);
            let mut pix_b = Vec::with_capacity(WIN * WIN);
            for r in top..top + WIN {
                for c in left..left + WIN {
                    pix_a.push(a[r * w + c]);
                    pix_b.push(b[r * w + c]);
                }
            }
            let n = pix_a.len() as f64;
            let mu_a = pix_a.iter().sum::<f64>() / n;
            let mu_b = pix_b.iter().sum::<f64>() / n;
            let var_a = pix_a.iter().map(|x| (x - mu_a).powi(2)).sum::<f64>() / n;
            let var_b = pix_b.iter().map(|x| (x - mu_b).powi(2)).sum::<f64>() / n;
            let cov = pix_a
                .iter()
                .zip(&pix_b)
                .map(|(x, y)| (x - mu_a) * (y - mu_b))
                .sum::<f64>()
                / n;
            total += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
            count += 1;
        }
    }
    total / count as f64
}

/// Sum over 20x20 patches at stride 10 of the squared patch difference.
pub fn oracle_lmse(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> f64 {
    const PATCH: usize = 20;
    const STEP: usize = 10;
    let mut total = 0.0;
    let mut top = 0;
    while top + PATCH <= h {
        let mut left = 0;
        while left + PATCH <= w {
            let mut patch = 0.0;
            for r in top..top + PATCH {
                for c in left..left + PATCH {
                    let d = u[r * w + c] - u_hat[r * w + c];
                    patch += d * d;
                }
            }
            total += patch;
            left += STEP;
        }
        top += STEP;
    }
    total
}

/// `(ssim, 1 - LMSE(u, u_hat) / LMSE(u, 0))`.
pub fn oracle_metrics(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> (f64, f64) {
    assert_eq!(u.len(), h * w);
    assert_eq!(u_hat.len(), h * w);
    let zeros = vec![0.0; u.len()];
    let slmse = 1.0 - oracle_lmse(u, u_hat, h, w) / oracle_lmse(u, &zeros, h, w);
    (oracle_ssim(u, u_hat, h, w), slmse)
}
