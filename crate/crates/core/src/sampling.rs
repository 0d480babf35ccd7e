//! Variable-density random Cartesian line sampling.
//!
//! Whole phase-encode rows are acquired. The central block is always on and
//! the remaining rows are drawn without replacement with weight
//! `(1 - |r| / r_max)^p`, `r` being the offset from the zero-frequency row.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::SamplingMask;

pub const DEFAULT_CENTER_LINES: usize = 8;
pub const DEFAULT_DENSITY_POWER: f64 = 3.0;

/// One independent draw per frame, seeded with `seed ^ frame`.
pub fn make_mask(
    frames: usize,
    height: usize,
    width: usize,
    accel: f64,
    center_lines: usize,
    density_power: f64,
    seed: u64,
) -> Result<SamplingMask> {
    build(
        frames,
        height,
        width,
        accel,
        center_lines,
        density_power,
        seed,
        false,
    )
}

/// The frame-0 pattern repeated in every frame.
pub fn make_frozen_mask(
    frames: usize,
    height: usize,
    width: usize,
    accel: f64,
    center_lines: usize,
    density_power: f64,
    seed: u64,
) -> Result<SamplingMask> {
    build(
        frames,
        height,
        width,
        accel,
        center_lines,
        density_power,
        seed,
        true,
    )
}

/// Rows sampled per frame for a requested acceleration.
pub fn target_rows(height: usize, accel: f64) -> usize {
    ((height as f64 / accel).round() as usize).clamp(1, height)
}

#[allow(clippy::too_many_arguments)]
fn build(
    frames: usize,
    height: usize,
    width: usize,
    accel: f64,
    center_lines: usize,
    density_power: f64,
    seed: u64,
    frozen: bool,
) -> Result<SamplingMask> {
    if frames == 0 || height == 0 || width == 0 {
        return Err(Error::Dimension("mask dimensions must be positive".into()));
    }
    if !(accel.is_finite() && accel >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "acceleration {accel} must be >= 1"
        )));
    }
    if !(density_power.is_finite() && density_power >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "density power {density_power} must be >= 0"
        )));
    }
    let target = target_rows(height, accel);
    if center_lines > target {
        return Err(Error::Infeasible(format!(
            "{center_lines} centre lines exceed the {target} rows allowed at {accel}x"
        )));
    }
    let achieved = height as f64 / target as f64;
    if (achieved - accel).abs() > 0.05 * accel {
        return Err(Error::Infeasible(format!(
            "{height} rows cannot realise {accel}x within 5% (nearest is {achieved:.3}x)"
        )));
    }

    let centre = SamplingMask::center_block(height, center_lines);
    let mid = (height / 2) as f64;
    let r_max = height as f64 / 2.0 + 1.0;
    let outer: Vec<usize> = (0..height).filter(|r| !centre.contains(r)).collect();
    let weight = |&r: &usize| (1.0 - (r as f64 - mid).abs() / r_max).powf(density_power);

    let draw = |k: usize| -> Result<Vec<bool>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
        let mut on = vec![false; height];
        for r in centre.clone() {
            on[r] = true;
        }
        let picked = outer
            .choose_multiple_weighted(&mut rng, target - center_lines, weight)
            .map_err(|e| Error::Infeasible(format!("weighted row draw failed: {e}")))?;
        for &r in picked {
            on[r] = true;
        }
        Ok(on)
    };

    let mut data = vec![0u8; frames * height * width];
    let shared = if frozen { Some(draw(0)?) } else { None };
    for k in 0..frames {
        let rows = match &shared {
            Some(rows) => rows.clone(),
            None => draw(k)?,
        };
        for (r, _) in rows.iter().enumerate().filter(|(_, &on)| on) {
            let start = (k * height + r) * width;
            data[start..start + width].fill(1);
        }
    }
    SamplingMask::new(frames, height, width, data, accel, seed, center_lines)
}
