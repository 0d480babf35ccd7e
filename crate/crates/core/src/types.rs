//! Domain types shared by every module.
//!
//! Arrays are flat, row-major, frame outermost. Every constructor validates
//! the type's invariants and rejects violations; nothing is silently repaired.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `sum_c |c(x)|^2 = 1` for coil maps built in memory.
pub const SOS_TOLERANCE: f64 = 1e-10;

/// Tolerance on the same identity for maps decoded from 32-bit storage.
pub const SOS_STORAGE_TOLERANCE: f64 = 1e-6;

/// Largest dimension the container format can represent.
pub const MAX_DIM: usize = i32::MAX as usize;

fn check_dims(what: &str, dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Dimension(format!(
            "{what}: zero-sized dimension in {dims:?}"
        )));
    }
    if dims.iter().any(|&d| d > MAX_DIM) {
        return Err(Error::Dimension(format!(
            "{what}: dimension exceeds 2^31-1 in {dims:?}"
        )));
    }
    Ok(())
}

fn all_finite(data: &[Complex64]) -> bool {
    data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Complex dynamic image stack, layout `[frame][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSequence {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ImageSequence {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims("image sequence", &[frames, height, width])?;
        let expected = frames * height * width;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "image sequence data has {} values, expected {expected}",
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::Invariant(
                "image sequence contains non-finite values".into(),
            ));
        }
        Ok(Self {
            frames,
            height,
            width,
            data,
        })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            frames,
            height,
            width,
            vec![Complex64::new(0.0, 0.0); frames * height * width],
        )
    }

    /// Builds a sequence with zero imaginary part from real values.
    pub fn from_real(frames: usize, height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            frames,
            height,
            width,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per frame.
    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn frame(&self, k: usize) -> &[Complex64] {
        let n = self.frame_len();
        &self.data[k * n..(k + 1) * n]
    }

    /// `|u|` for every element.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn frame_magnitude(&self, k: usize) -> Vec<f64> {
        self.frame(k).iter().map(|z| z.norm()).collect()
    }

    pub fn same_grid(&self, other: &ImageSequence) -> bool {
        self.frames == other.frames && self.height == other.height && self.width == other.width
    }
}

/// Binary k-t sampling pattern, layout `[frame][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
    accel_requested: f64,
    seed: u64,
    center_lines: usize,
}

impl SamplingMask {
    /// Validates binarity, the fully sampled centre block and the achieved
    /// acceleration (within 5% of `accel_requested`).
    pub fn new(
        frames: usize,
        height: usize,
        width: usize,
        data: Vec<u8>,
        accel_requested: f64,
        seed: u64,
        center_lines: usize,
    ) -> Result<Self> {
        check_dims("sampling mask", &[frames, height, width])?;
        if data.len() != frames * height * width {
            return Err(Error::Dimension(format!(
                "mask has {} entries, expected {}",
                data.len(),
                frames * height * width
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Invariant(format!("mask value {v} is not binary")));
        }
        if !(accel_requested.is_finite() && accel_requested >= 1.0) {
            return Err(Error::Invariant(format!(
                "requested acceleration {accel_requested} must be >= 1"
            )));
        }
        if center_lines > height {
            return Err(Error::Invariant(format!(
                "center block of {center_lines} rows exceeds height {height}"
            )));
        }
        let mask = Self {
            frames,
            height,
            width,
            data,
            accel_requested,
            seed,
            center_lines,
        };
        let rows = mask.center_rows();
        for k in 0..frames {
            for r in rows.clone() {
                let start = (k * height + r) * width;
                if mask.data[start..start + width].contains(&0) {
                    return Err(Error::Invariant(format!(
                        "center row {r} not fully sampled in frame {k}"
                    )));
                }
            }
        }
        let ones = mask.data.iter().filter(|&&v| v == 1).count();
        if ones == 0 {
            return Err(Error::Invariant("mask samples nothing".into()));
        }
        let achieved = mask.achieved_accel();
        if (achieved - accel_requested).abs() > 0.05 * accel_requested {
            return Err(Error::Invariant(format!(
                "achieved acceleration {achieved:.4} not within 5% of requested {accel_requested}"
            )));
        }
        Ok(mask)
    }

    /// Every entry sampled.
    pub fn full(frames: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            frames,
            height,
            width,
            vec![1; frames * height * width],
            1.0,
            0,
            height,
        )
    }

    /// The `center_lines` rows nearest the zero-frequency row `height / 2`.
    pub fn center_block(height: usize, center_lines: usize) -> Range<usize> {
        let start = (height / 2).saturating_sub(center_lines / 2);
        let start = start.min(height - center_lines.min(height));
        start..start + center_lines
    }

    pub fn center_rows(&self) -> Range<usize> {
        Self::center_block(self.height, self.center_lines)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn accel_requested(&self) -> f64 {
        self.accel_requested
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn center_lines(&self) -> usize {
        self.center_lines
    }

    pub fn frame(&self, k: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn is_sampled(&self, k: usize, row: usize, col: usize) -> bool {
        self.data[(k * self.height + row) * self.width + col] == 1
    }

    /// Rows of frame `k` holding at least one sample.
    pub fn active_rows(&self, k: usize) -> Vec<bool> {
        self.frame(k)
            .chunks(self.width)
            .map(|row| row.contains(&1))
            .collect()
    }

    pub fn achieved_accel(&self) -> f64 {
        let ones = self.data.iter().filter(|&&v| v == 1).count();
        self.data.len() as f64 / ones as f64
    }

    pub fn is_full(&self) -> bool {
        self.data.iter().all(|&v| v == 1)
    }
}

/// Multi-coil k-space measurements, layout `[frame][coil][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    frames: usize,
    coils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
    mask: SamplingMask,
    noise_sigma: f64,
}

impl KSpaceData {
    pub fn new(
        coils: usize,
        data: Vec<Complex64>,
        mask: SamplingMask,
        noise_sigma: f64,
    ) -> Result<Self> {
        let (frames, height, width) = (mask.frames(), mask.height(), mask.width());
        check_dims("k-space", &[frames, coils, height, width])?;
        let expected = frames * coils * height * width;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "k-space has {} values, expected {expected}",
                data.len()
            )));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::Invariant(format!(
                "noise sigma {noise_sigma} must be >= 0"
            )));
        }
        if !all_finite(&data) {
            return Err(Error::Invariant(
                "k-space contains non-finite values".into(),
            ));
        }
        let n = height * width;
        for k in 0..frames {
            let m = mask.frame(k);
            for c in 0..coils {
                let start = (k * coils + c) * n;
                let nonzero_unsampled = data[start..start + n]
                    .iter()
                    .zip(m)
                    .any(|(z, &s)| s == 0 && (z.re != 0.0 || z.im != 0.0));
                if nonzero_unsampled {
                    return Err(Error::Invariant(format!(
                        "frame {k} coil {c} has non-zero entries at unsampled positions"
                    )));
                }
            }
        }
        Ok(Self {
            frames,
            coils,
            height,
            width,
            data,
            mask,
            noise_sigma,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Slice of coil `c` in frame `k`.
    pub fn slice(&self, k: usize, c: usize) -> &[Complex64] {
        let n = self.height * self.width;
        let start = (k * self.coils + c) * n;
        &self.data[start..start + n]
    }

    /// Retrospective undersampling: keeps only entries inside `mask`, which
    /// must be a subset of the current sampling pattern.
    pub fn undersample(&self, mask: &SamplingMask) -> Result<KSpaceData> {
        if mask.frames() != self.frames
            || mask.height() != self.height
            || mask.width() != self.width
        {
            return Err(Error::Dimension(
                "mask grid differs from k-space grid".into(),
            ));
        }
        if mask
            .data()
            .iter()
            .zip(self.mask.data())
            .any(|(&new, &old)| new == 1 && old == 0)
        {
            return Err(Error::InvalidArgument(
                "undersampling mask selects entries that were never acquired".into(),
            ));
        }
        let n = self.height * self.width;
        let mut data = self.data.clone();
        for k in 0..self.frames {
            let m = mask.frame(k);
            for c in 0..self.coils {
                let start = (k * self.coils + c) * n;
                for (z, &s) in data[start..start + n].iter_mut().zip(m) {
                    if s == 0 {
                        *z = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
        KSpaceData::new(self.coils, data, mask.clone(), self.noise_sigma)
    }
}

/// Per-pair displacement field, layout `[pair][row][col][component]` with
/// component 0 = horizontal (column direction), 1 = vertical (row direction).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pairs: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FlowField {
    pub fn new(pairs: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims("flow field", &[pairs, height, width])?;
        if data.len() != pairs * height * width * 2 {
            return Err(Error::Dimension(format!(
                "flow field has {} values, expected {}",
                data.len(),
                pairs * height * width * 2
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant(
                "flow field contains non-finite values".into(),
            ));
        }
        Ok(Self {
            pairs,
            height,
            width,
            data,
        })
    }

    pub fn zeros(pairs: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(pairs, height, width, vec![0.0; pairs * height * width * 2])
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pair(&self, k: usize) -> &[f64] {
        let n = self.height * self.width * 2;
        &self.data[k * n..(k + 1) * n]
    }

    /// Largest absolute component over the whole field.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex receive-coil sensitivities, layout `[coil][row][col]`,
/// normalised so that `sum_c |c(x)|^2 = 1` at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilMaps {
    coils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl CoilMaps {
    pub fn new(coils: usize, height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerance(coils, height, width, data, SOS_TOLERANCE)
    }

    pub(crate) fn with_tolerance(
        coils: usize,
        height: usize,
        width: usize,
        data: Vec<Complex64>,
        tolerance: f64,
    ) -> Result<Self> {
        check_dims("coil maps", &[coils, height, width])?;
        let n = height * width;
        if data.len() != coils * n {
            return Err(Error::Dimension(format!(
                "coil maps have {} values, expected {}",
                data.len(),
                coils * n
            )));
        }
        if !all_finite(&data) {
            return Err(Error::Invariant(
                "coil maps contain non-finite values".into(),
            ));
        }
        for i in 0..n {
            let sos: f64 = (0..coils).map(|c| data[c * n + i].norm_sqr()).sum();
            if (sos - 1.0).abs() > tolerance {
                return Err(Error::Invariant(format!(
                    "sum of squares {sos} at pixel {i} deviates from 1 by more than {tolerance:e}"
                )));
            }
        }
        Ok(Self {
            coils,
            height,
            width,
            data,
        })
    }

    /// Normalises raw sensitivities jointly to unit sum of squares.
    pub fn normalized(
        coils: usize,
        height: usize,
        width: usize,
        mut raw: Vec<Complex64>,
    ) -> Result<Self> {
        let n = height * width;
        if raw.len() != coils * n {
            return Err(Error::Dimension("raw coil data has wrong length".into()));
        }
        for i in 0..n {
            let sos: f64 = (0..coils).map(|c| raw[c * n + i].norm_sqr()).sum();
            if !(sos > 0.0 && sos.is_finite()) {
                return Err(Error::Invariant(format!(
                    "all coil maps vanish at pixel {i}"
                )));
            }
            let scale = 1.0 / sos.sqrt();
            for c in 0..coils {
                raw[c * n + i] *= scale;
            }
        }
        Self::new(coils, height, width, raw)
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn unit(height: usize, width: usize) -> Result<Self> {
        Self::new(
            1,
            height,
            width,
            vec![Complex64::new(1.0, 0.0); height * width],
        )
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn map(&self, c: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// How Alg. 1's stopping quantity aggregates absolute differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DErrorMode {
    /// Mean absolute difference of `u` plus that of the flow.
    #[default]
    Mean,
    /// Raw sums of absolute differences.
    Sum,
}

/// Weights and outer-loop controls of the joint model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Spatial total-variation weight.
    pub gamma: f64,
    /// Flow regularity weight.
    pub delta: f64,
    /// Motion-coupling weight.
    pub beta: f64,
    pub zeta_stop: f64,
    pub max_outer: usize,
    pub d_error_mode: DErrorMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            delta: 0.1,
            beta: 0.45,
            zeta_stop: 1e-5,
            max_outer: 10,
            d_error_mode: DErrorMode::Mean,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.zeta_stop.is_finite() && self.zeta_stop > 0.0) {
            return Err(Error::InvalidArgument("zeta_stop must be > 0".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be >= 1".into()));
        }
        Ok(())
    }
}

/// Constants of the primal-dual inner solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Primal step; `None` derives `1 / |K|` from a power iteration.
    pub tau: Option<f64>,
    /// Dual step; `None` derives `1 / |K|`.
    pub sigma: Option<f64>,
    pub theta: f64,
    pub max_inner: usize,
    pub inner_tol: f64,
    /// Power-method iterations used for the operator norm.
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: None,
            sigma: None,
            theta: 1.0,
            max_inner: 300,
            inner_tol: 1e-5,
            power_iters: 100,
            seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        if self.max_inner == 0 || self.power_iters == 0 {
            return Err(Error::InvalidArgument("iteration caps must be >= 1".into()));
        }
        if !(self.inner_tol.is_finite() && self.inner_tol >= 0.0) {
            return Err(Error::InvalidArgument("inner_tol must be >= 0".into()));
        }
        for step in [self.tau, self.sigma].into_iter().flatten() {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "step size {step} must be > 0"
                )));
            }
        }
        Ok(())
    }
}
