//! Image-quality metrics between a gold standard and a reconstruction.
//!
//! All metrics act on real (magnitude) images of one frame; sequence
//! reports average the per-frame values.

use crate::error::{Error, Result};
use crate::types::ImageSequence;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const SSIM_WINDOW: usize = 8;
pub const LMSE_PATCH: usize = 20;
pub const LMSE_STEP: usize = 10;

fn check(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 {
        return Err(Error::Dimension("empty image".into()));
    }
    if u.len() != h * w || u_hat.len() != h * w {
        return Err(Error::Dimension(format!(
            "images have {} and {} pixels, expected {}",
            u.len(),
            u_hat.len(),
            h * w
        )));
    }
    Ok(())
}

fn peak(u: &[f64]) -> f64 {
    let m = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Sums of every `win x win` window, `(h - win + 1) x (w - win + 1)`.
fn window_sums(x: &[f64], h: usize, w: usize, win: usize) -> Vec<f64> {
    let (oh, ow) = (h - win + 1, w - win + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = x[r * w + c..r * w + c + win].iter().sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (r..r + win).map(|rr| rows[rr * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all 8x8 windows (stride 1, uniform weights) with the
/// given constants, after dividing both images by `max |u|`.
pub fn ssim_with(u: &[f64], u_hat: &[f64], h: usize, w: usize, c1: f64, c2: f64) -> Result<f64> {
    check(u, u_hat, h, w)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels"
        )));
    }
    let s = 1.0 / peak(u);
    let a: Vec<f64> = u.iter().map(|v| v * s).collect();
    let b: Vec<f64> = u_hat.iter().map(|v| v * s).collect();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let win = SSIM_WINDOW;
    let [sa, sb, saa, sbb, sab] = [&a, &b, &aa, &bb, &ab].map(|x| window_sums(x, h, w, win));
    let n = (win * win) as f64;
    let total: f64 = (0..sa.len())
        .map(|i| {
            let (ma, mb) = (sa[i] / n, sb[i] / n);
            let va = saa[i] / n - ma * ma;
            let vb = sbb[i] / n - mb * mb;
            let cov = sab[i] / n - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / sa.len() as f64)
}

pub fn ssim(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> Result<f64> {
    ssim_with(u, u_hat, h, w, SSIM_C1, SSIM_C2)
}

/// Sum over 20x20 patches at stride 10 of the squared patch difference.
pub fn lmse(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> Result<f64> {
    check(u, u_hat, h, w)?;
    if h < LMSE_PATCH || w < LMSE_PATCH {
        return Err(Error::Dimension(format!(
            "image smaller than one {LMSE_PATCH}x{LMSE_PATCH} patch"
        )));
    }
    let sq: Vec<f64> = u
        .iter()
        .zip(u_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    let mut total = 0.0;
    for top in (0..=h - LMSE_PATCH).step_by(LMSE_STEP) {
        for left in (0..=w - LMSE_PATCH).step_by(LMSE_STEP) {
            total += (top..top + LMSE_PATCH)
                .map(|r| {
                    sq[r * w + left..r * w + left + LMSE_PATCH]
                        .iter()
                        .sum::<f64>()
                })
                .sum::<f64>();
        }
    }
    Ok(total)
}

/// `LMSE(u, u_hat) / LMSE(u, 0)`: 0 for a perfect reconstruction.
pub fn lmse_ratio(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> Result<f64> {
    let num = lmse(u, u_hat, h, w)?;
    let den = lmse(u, &vec![0.0; u.len()], h, w)?;
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "reference image has no energy in any patch".into(),
        ));
    }
    Ok(num / den)
}

/// `1 - LMSE(u, u_hat) / LMSE(u, 0)`: 1 for a perfect reconstruction.
pub fn slmse(u: &[f64], u_hat: &[f64], h: usize, w: usize) -> Result<f64> {
    Ok(1.0 - lmse_ratio(u, u_hat, h, w)?)
}

pub fn rmse(u: &[f64], u_hat: &[f64]) -> Result<f64> {
    if u.len() != u_hat.len() || u.is_empty() {
        return Err(Error::Dimension(
            "rmse needs two non-empty images of equal size".into(),
        ));
    }
    let s: f64 = u.iter().zip(u_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / u.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMetrics {
    pub ssim: f64,
    pub slmse: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub ssim: f64,
    pub slmse: f64,
    /// Per-frame RMSE of the magnitudes divided by the gold frame's maximum.
    pub rmse: f64,
    pub per_frame: Vec<FrameMetrics>,
}

/// Frame-averaged metrics between `|gold|` and `|candidate|`.
pub fn evaluate(gold: &ImageSequence, candidate: &ImageSequence) -> Result<MetricReport> {
    if !gold.same_grid(candidate) {
        return Err(Error::Dimension(
            "gold and candidate sequences differ in shape".into(),
        ));
    }
    let (h, w) = (gold.height(), gold.width());
    let per_frame = (0..gold.frames())
        .map(|k| {
            let g = gold.frame_magnitude(k);
            let c = candidate.frame_magnitude(k);
            let s = 1.0 / peak(&g);
            let gn: Vec<f64> = g.iter().map(|v| v * s).collect();
            let cn: Vec<f64> = c.iter().map(|v| v * s).collect();
            Ok(FrameMetrics {
                ssim: ssim(&g, &c, h, w)?,
                slmse: slmse(&g, &c, h, w)?,
                rmse: rmse(&gn, &cn)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f = per_frame.len() as f64;
    Ok(MetricReport {
        ssim: per_frame.iter().map(|m| m.ssim).sum::<f64>() / f,
        slmse: per_frame.iter().map(|m| m.slmse).sum::<f64>() / f,
        rmse: per_frame.iter().map(|m| m.rmse).sum::<f64>() / f,
        per_frame,
    })
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Mean `|u|` over `region` in every frame.
pub fn temporal_profile(u: &ImageSequence, region: Region) -> Result<Vec<f64>> {
    if region.height == 0
        || region.width == 0
        || region.top + region.height > u.height()
        || region.left + region.width > u.width()
    {
        return Err(Error::InvalidArgument(format!(
            "region {region:?} outside the image"
        )));
    }
    let n = (region.height * region.width) as f64;
    Ok((0..u.frames())
        .map(|k| {
            let f = u.frame(k);
            (region.top..region.top + region.height)
                .flat_map(|r| {
                    f[r * u.width() + region.left..r * u.width() + region.left + region.width]
                        .iter()
                })
                .map(|z| z.norm())
                .sum::<f64>()
                / n
        })
        .collect())
}
