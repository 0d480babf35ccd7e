//! Deterministic synthetic dynamic phantoms, coil maps and acquisition.
//!
//! The cine phantom is a body ellipse holding a myocardium ellipse whose
//! bright ventricle contracts periodically; two dark papillary discs ride
//! on the ventricle wall. Layers are rasterised with 2x2 supersampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::operators::encode;
use crate::types::{CoilMaps, ImageSequence, KSpaceData, SamplingMask};

const BODY: f64 = 0.3;
const MYOCARDIUM: f64 = 0.5;
const BLOOD: f64 = 0.95;
const PAPILLARY: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    Cine,
    Perfusion,
    Static,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cine" => Ok(Self::Cine),
            "perfusion" => Ok(Self::Perfusion),
            "static" => Ok(Self::Static),
            other => Err(Error::InvalidArgument(format!(
                "unknown phantom kind '{other}' (expected cine, perfusion or static)"
            ))),
        }
    }
}

impl std::fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cine => "cine",
            Self::Perfusion => "perfusion",
            Self::Static => "static",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Peak reduction of the ventricle's horizontal semi-axis, in pixels.
    pub motion_amplitude: f64,
    /// Frames per cardiac cycle.
    pub period: f64,
    /// Perfusion only: inverse of the frame at which uptake peaks.
    pub uptake_rate: f64,
    /// Vertical drift of the heart with a five-cycle period; 0 disables it.
    pub respiratory_amplitude: f64,
    pub papillary: bool,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomKind::Cine,
            frames: 24,
            height: 128,
            width: 128,
            motion_amplitude: 6.0,
            period: 24.0,
            uptake_rate: 0.15,
            respiratory_amplitude: 0.0,
            papillary: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Horizontal semi-axis.
    pub a: f64,
    /// Vertical semi-axis.
    pub b: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = ((x - self.cx) / self.a, (y - self.cy) / self.b);
        dx * dx + dy * dy <= 1.0
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }
}

/// Geometry and intensities of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameLayout {
    pub body: Ellipse,
    pub myocardium: Ellipse,
    pub ventricle: Ellipse,
    pub discs: Vec<Ellipse>,
    pub myocardium_level: f64,
    pub blood_level: f64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::InvalidArgument(
                "phantom needs at least 16x16 pixels".into(),
            ));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument(
                "phantom needs at least one frame".into(),
            ));
        }
        if self.kind != PhantomKind::Static && self.frames < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} phantom needs at least two frames",
                self.kind
            )));
        }
        if !(self.motion_amplitude.is_finite() && self.motion_amplitude >= 0.0) {
            return Err(Error::InvalidArgument(
                "motion amplitude must be >= 0".into(),
            ));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidArgument("period must be > 0".into()));
        }
        if !(self.uptake_rate.is_finite() && self.uptake_rate > 0.0) {
            return Err(Error::InvalidArgument("uptake rate must be > 0".into()));
        }
        if !(self.respiratory_amplitude.is_finite() && self.respiratory_amplitude >= 0.0) {
            return Err(Error::InvalidArgument(
                "respiratory amplitude must be >= 0".into(),
            ));
        }
        let (a0, b0) = self.rest_axes();
        if a0 - self.motion_amplitude < 2.0 || b0 - 0.8 * self.motion_amplitude < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "motion amplitude {} collapses the ventricle",
                self.motion_amplitude
            )));
        }
        Ok(())
    }

    fn rest_axes(&self) -> (f64, f64) {
        (0.17 * self.width as f64, 0.14 * self.height as f64)
    }

    /// Contraction state in `[0, 1]` of frame `k`.
    fn contraction(&self, k: usize) -> f64 {
        match self.kind {
            PhantomKind::Cine => 0.5 * (1.0 - (2.0 * PI * k as f64 / self.period).cos()),
            _ => 0.0,
        }
    }

    /// Gamma-variate enhancement in `[0, 1]`, peaking at frame `1 / rate`.
    fn uptake(&self, k: f64) -> f64 {
        const ALPHA: f64 = 3.0;
        let t = self.uptake_rate * k;
        if t <= 0.0 {
            0.0
        } else {
            t.powf(ALPHA) * (ALPHA * (1.0 - t)).exp()
        }
    }

    pub fn layout(&self, k: usize) -> FrameLayout {
        let k = if self.kind == PhantomKind::Static {
            0
        } else {
            k
        };
        let (w, h) = (self.width as f64, self.height as f64);
        let (cx, cy0) = (w / 2.0, h / 2.0);
        let drift = if self.kind == PhantomKind::Static {
            0.0
        } else {
            self.respiratory_amplitude * (2.0 * PI * k as f64 / (5.0 * self.period)).sin()
        };
        let cy = cy0 + drift;
        let c = self.contraction(k);
        let (a0, b0) = self.rest_axes();
        let ventricle = Ellipse {
            cx,
            cy,
            a: a0 - self.motion_amplitude * c,
            b: b0 - 0.8 * self.motion_amplitude * c,
        };
        let myocardium = Ellipse {
            cx,
            cy,
            a: a0 + 0.07 * w,
            b: b0 + 0.07 * h,
        };
        let body = Ellipse {
            cx: w / 2.0,
            cy: h / 2.0,
            a: 0.44 * w,
            b: 0.40 * h,
        };
        let r = 0.025 * w.min(h);
        let discs = if self.papillary {
            [-1.0, 1.0]
                .iter()
                .map(|s| Ellipse {
                    cx: cx + s * 0.45 * ventricle.a,
                    cy: cy + 0.45 * ventricle.b,
                    a: r,
                    b: r,
                })
                .collect()
        } else {
            Vec::new()
        };
        let (myocardium_level, blood_level) = match self.kind {
            PhantomKind::Perfusion => {
                let kf = k as f64;
                (
                    MYOCARDIUM - 0.25 + 0.3 * self.uptake(kf - 2.0),
                    0.2 + 0.75 * self.uptake(kf),
                )
            }
            _ => (MYOCARDIUM, BLOOD),
        };
        FrameLayout {
            body,
            myocardium,
            ventricle,
            discs,
            myocardium_level,
            blood_level,
        }
    }
}

impl FrameLayout {
    fn value_at(&self, x: f64, y: f64) -> f64 {
        if self.discs.iter().any(|d| d.contains(x, y)) {
            PAPILLARY
        } else if self.ventricle.contains(x, y) {
            self.blood_level
        } else if self.myocardium.contains(x, y) {
            self.myocardium_level
        } else if self.body.contains(x, y) {
            BODY
        } else {
            0.0
        }
    }

    /// 2x2 supersampled magnitude image; pixel `(r, c)` is centred at `(c, r)`.
    pub fn rasterize(&self, h: usize, w: usize) -> Vec<f64> {
        const OFFSETS: [f64; 2] = [-0.25, 0.25];
        let mut out = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dy in OFFSETS {
                    for dx in OFFSETS {
                        acc += self.value_at(c as f64 + dx, r as f64 + dy);
                    }
                }
                out[r * w + c] = acc / 4.0;
            }
        }
        out
    }
}

/// Smooth phase `pi * (p0 x + p1 y + p2 x y + p3 x^2 + p4 y^2)` on
/// coordinates scaled to `[-1, 1]`, coefficients drawn from the seed.
fn phase_map(h: usize, w: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
    let p: Vec<f64> = (0..5).map(|_| rng.random_range(-0.3..0.3)).collect();
    (0..h * w)
        .map(|i| {
            let x = ((i % w) as f64 - w as f64 / 2.0) / (w as f64 / 2.0);
            let y = ((i / w) as f64 - h as f64 / 2.0) / (h as f64 / 2.0);
            let phi = PI * (p[0] * x + p[1] * y + p[2] * x * y + p[3] * x * x + p[4] * y * y);
            Complex64::from_polar(1.0, phi)
        })
        .collect()
}

/// Magnitudes in `[0, 1]` before the phase is applied.
pub fn generate_magnitude(spec: &PhantomSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let first = spec.layout(0).rasterize(spec.height, spec.width);
    let mut data = Vec::with_capacity(spec.frames * first.len());
    for k in 0..spec.frames {
        if spec.kind == PhantomKind::Static {
            data.extend_from_slice(&first);
        } else {
            data.extend(spec.layout(k).rasterize(spec.height, spec.width));
        }
    }
    Ok(data)
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<ImageSequence> {
    let mag = generate_magnitude(spec)?;
    let phase = phase_map(spec.height, spec.width, spec.seed);
    let n = spec.height * spec.width;
    let data = mag
        .iter()
        .enumerate()
        .map(|(i, &m)| phase[i % n] * m)
        .collect();
    ImageSequence::new(spec.frames, spec.height, spec.width, data)
}

/// Gaussian sensitivities centred on a circle just outside the image at
/// angles `pi/4 + 2 pi c / coils`, each with a small linear phase, jointly
/// normalised to unit sum of squares.
pub fn generate_coilmaps(coils: usize, height: usize, width: usize, seed: u64) -> Result<CoilMaps> {
    if coils == 0 || height == 0 || width == 0 {
        return Err(Error::Dimension(
            "coil maps need at least one coil and pixel".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let radius = 0.6 * width.max(height) as f64;
    let spread = 0.5 * width.max(height) as f64;
    let n = height * width;
    let mut raw = Vec::with_capacity(coils * n);
    for c in 0..coils {
        let angle = PI / 4.0 + 2.0 * PI * c as f64 / coils as f64;
        let (px, py) = (cx + radius * angle.cos(), cy + radius * angle.sin());
        let (gx, gy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for i in 0..n {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            let mag = (-d2 / (2.0 * spread * spread)).exp();
            let phi = PI * (gx * (x - cx) / width as f64 + gy * (y - cy) / height as f64);
            raw.push(Complex64::from_polar(mag, phi));
        }
    }
    CoilMaps::normalized(coils, height, width, raw)
}

/// `encode(u) + noise` with `E|n|^2 = noise_sigma^2` at sampled entries.
pub fn acquire(
    u_true: &ImageSequence,
    maps: &CoilMaps,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<KSpaceData> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma {noise_sigma} must be >= 0"
        )));
    }
    let clean = encode(u_true, maps, mask)?;
    let mut data = clean.data().to_vec();
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma / 2f64.sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, coils) = (mask.height() * mask.width(), maps.coils());
        for k in 0..mask.frames() {
            let m = mask.frame(k);
            for c in 0..coils {
                let base = (k * coils + c) * n;
                for (i, &s) in m.iter().enumerate() {
                    if s == 1 {
                        data[base + i] +=
                            Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    }
                }
            }
        }
    }
    KSpaceData::new(maps.coils(), data, mask.clone(), noise_sigma)
}
