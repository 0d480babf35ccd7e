//! Multi-coil undersampled Fourier encoding `A u = M F (c . u)`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::Fft2;
use super::{as_complex, as_complex_mut, as_real, LinearOperator};
use crate::error::{Error, Result};
use crate::types::{CoilMaps, ImageSequence, KSpaceData, SamplingMask};

/// Maps a complex sequence `[F][H][W]` to the sampled k-space entries,
/// ordered `[F][C][sampled index]` with indices ascending in the grid.
#[derive(Debug)]
pub struct Encoder {
    maps: CoilMaps,
    mask: SamplingMask,
    fft: Fft2,
    active: Vec<Vec<bool>>,
    sampled: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl Encoder {
    pub fn new(maps: &CoilMaps, mask: &SamplingMask) -> Result<Self> {
        if maps.height() != mask.height() || maps.width() != mask.width() {
            return Err(Error::Dimension(format!(
                "coil maps are {}x{}, mask is {}x{}",
                maps.height(),
                maps.width(),
                mask.height(),
                mask.width()
            )));
        }
        let active = (0..mask.frames()).map(|k| mask.active_rows(k)).collect();
        let sampled: Vec<Vec<usize>> = (0..mask.frames())
            .map(|k| {
                mask.frame(k)
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b == 1)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(sampled.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &sampled {
            acc += maps.coils() * s.len();
            offsets.push(acc);
        }
        Ok(Self {
            maps: maps.clone(),
            mask: mask.clone(),
            fft: Fft2::new(mask.height(), mask.width()),
            active,
            sampled,
            offsets,
        })
    }

    pub fn frames(&self) -> usize {
        self.mask.frames()
    }

    pub fn coils(&self) -> usize {
        self.maps.coils()
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    fn pixels(&self) -> usize {
        self.mask.height() * self.mask.width()
    }

    /// Sampled entries of full-grid k-space, in the output layout.
    pub fn measurements(&self, y: &KSpaceData) -> Result<Vec<f64>> {
        if y.coils() != self.coils() || y.mask() != &self.mask {
            return Err(Error::Dimension(
                "k-space does not match the encoder".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.offsets[self.frames()]);
        for (k, idx) in self.sampled.iter().enumerate() {
            for c in 0..self.coils() {
                let slice = y.slice(k, c);
                out.extend(idx.iter().map(|&i| slice[i]));
            }
        }
        Ok(as_real(&out).to_vec())
    }

    /// Scatters output-layout values onto the full grid `[F][C][H][W]`.
    pub fn to_grid(&self, y: &[f64]) -> Vec<Complex64> {
        let n = self.pixels();
        let nc = self.coils();
        let ys = as_complex(y);
        let mut out = vec![Complex64::new(0.0, 0.0); self.frames() * nc * n];
        for (k, idx) in self.sampled.iter().enumerate() {
            for c in 0..nc {
                let src =
                    &ys[self.offsets[k] + c * idx.len()..self.offsets[k] + (c + 1) * idx.len()];
                let dst = &mut out[(k * nc + c) * n..(k * nc + c + 1) * n];
                for (&i, v) in idx.iter().zip(src) {
                    dst[i] = *v;
                }
            }
        }
        out
    }

    fn split_frames<'a, T>(&self, mut data: &'a mut [T]) -> Vec<&'a mut [T]> {
        let mut parts = Vec::with_capacity(self.frames());
        for k in 0..self.frames() {
            let (head, tail) = data.split_at_mut(self.offsets[k + 1] - self.offsets[k]);
            parts.push(head);
            data = tail;
        }
        parts
    }
}

impl LinearOperator for Encoder {
    fn dim_in(&self) -> usize {
        2 * self.frames() * self.pixels()
    }

    fn dim_out(&self) -> usize {
        2 * self.offsets[self.frames()]
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.pixels();
        let u = as_complex(x);
        let parts = self.split_frames(as_complex_mut(out));
        parts.into_par_iter().enumerate().for_each(|(k, yk)| {
            let uk = &u[k * n..(k + 1) * n];
            let idx = &self.sampled[k];
            let mut tmp = vec![Complex64::new(0.0, 0.0); n];
            for (c, yc) in yk.chunks_mut(idx.len().max(1)).enumerate() {
                for ((t, s), v) in tmp.iter_mut().zip(self.maps.map(c)).zip(uk) {
                    *t = s * v;
                }
                self.fft.forward_rows(&mut tmp, &self.active[k]);
                for (y, &i) in yc.iter_mut().zip(idx) {
                    *y = tmp[i];
                }
            }
        });
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let n = self.pixels();
        let ys = as_complex(y);
        as_complex_mut(out)
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(k, xk)| {
                xk.fill(Complex64::new(0.0, 0.0));
                let idx = &self.sampled[k];
                let mut tmp = vec![Complex64::new(0.0, 0.0); n];
                for c in 0..self.coils() {
                    let yc =
                        &ys[self.offsets[k] + c * idx.len()..self.offsets[k] + (c + 1) * idx.len()];
                    tmp.fill(Complex64::new(0.0, 0.0));
                    for (&i, v) in idx.iter().zip(yc) {
                        tmp[i] = *v;
                    }
                    self.fft.inverse_rows(&mut tmp, &self.active[k]);
                    for ((x, s), t) in xk.iter_mut().zip(self.maps.map(c)).zip(&tmp) {
                        *x += s.conj() * t;
                    }
                }
            });
    }
}

/// Noise-free k-space of `u`.
pub fn encode(u: &ImageSequence, maps: &CoilMaps, mask: &SamplingMask) -> Result<KSpaceData> {
    if u.frames() != mask.frames() || u.height() != mask.height() || u.width() != mask.width() {
        return Err(Error::Dimension("image grid differs from mask grid".into()));
    }
    let op = Encoder::new(maps, mask)?;
    let y = op.apply_vec(as_real(u.data()));
    KSpaceData::new(maps.coils(), op.to_grid(&y), mask.clone(), 0.0)
}

/// `A^H y`: coil-combined inverse transform of the measured entries.
pub fn encode_adjoint(y: &KSpaceData, maps: &CoilMaps) -> Result<ImageSequence> {
    if y.coils() != maps.coils() {
        return Err(Error::Dimension(format!(
            "k-space has {} coils, maps have {}",
            y.coils(),
            maps.coils()
        )));
    }
    let op = Encoder::new(maps, y.mask())?;
    let x = op.adjoint_vec(&op.measurements(y)?);
    ImageSequence::new(y.frames(), y.height(), y.width(), as_complex(&x).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use csm_oracles::adjoint::max_pairing_error;
    use csm_oracles::dft::centered_dft2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_maps(coils: usize, h: usize, w: usize, seed: u64) -> CoilMaps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..coils * h * w)
            .map(|_| Complex64::new(rng.random_range(0.2..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        CoilMaps::normalized(coils, h, w, raw).unwrap()
    }

    fn row_mask(frames: usize, h: usize, w: usize, rows: &[usize]) -> SamplingMask {
        let mut data = vec![0u8; frames * h * w];
        for k in 0..frames {
            for &r in rows {
                data[(k * h + r) * w..(k * h + r + 1) * w].fill(1);
            }
        }
        let accel = h as f64 / rows.len() as f64;
        SamplingMask::new(frames, h, w, data, accel, 0, 2).unwrap()
    }

    fn random_sequence(frames: usize, h: usize, w: usize, seed: u64) -> ImageSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..frames * h * w)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ImageSequence::new(frames, h, w, data).unwrap()
    }

    #[test]
    fn zero_image_gives_zero_kspace() {
        let maps = random_maps(3, 8, 8, 1);
        let mask = row_mask(2, 8, 8, &[1, 3, 4, 6]);
        let y = encode(&ImageSequence::zeros(2, 8, 8).unwrap(), &maps, &mask).unwrap();
        assert!(y.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn centred_impulse_is_flat_spectrum() {
        let (h, w) = (8, 6);
        let mut data = vec![Complex64::new(0.0, 0.0); h * w];
        data[(h / 2) * w + w / 2] = Complex64::new(1.0, 0.0);
        let u = ImageSequence::new(1, h, w, data).unwrap();
        let y = encode(
            &u,
            &CoilMaps::unit(h, w).unwrap(),
            &SamplingMask::full(1, h, w).unwrap(),
        )
        .unwrap();
        let expected = 1.0 / ((h * w) as f64).sqrt();
        assert!(y
            .data()
            .iter()
            .all(|z| (z.re - expected).abs() < 1e-15 && z.im.abs() < 1e-15));
    }

    #[test]
    fn matches_direct_dft_per_coil() {
        let (h, w) = (8, 8);
        let maps = random_maps(2, h, w, 7);
        let mask = row_mask(1, h, w, &[0, 3, 4, 5]);
        let u = random_sequence(1, h, w, 8);
        let y = encode(&u, &maps, &mask).unwrap();
        for c in 0..2 {
            let weighted: Vec<Complex64> = maps
                .map(c)
                .iter()
                .zip(u.frame(0))
                .map(|(s, v)| s * v)
                .collect();
            let reference = centered_dft2(&weighted, h, w);
            for (i, (a, b)) in y.slice(0, c).iter().zip(&reference).enumerate() {
                let expected = if mask.frame(0)[i] == 1 {
                    *b
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((a - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_sampled_single_coil_is_unitary() {
        let (h, w) = (6, 10);
        let u = random_sequence(2, h, w, 3);
        let maps = CoilMaps::unit(h, w).unwrap();
        let y = encode(&u, &maps, &SamplingMask::full(2, h, w).unwrap()).unwrap();
        let back = encode_adjoint(&y, &maps).unwrap();
        for (a, b) in back.data().iter().zip(u.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_pairing() {
        let (h, w) = (8, 6);
        let op = Encoder::new(&random_maps(3, h, w, 2), &row_mask(2, h, w, &[2, 3, 4, 7])).unwrap();
        let err = max_pairing_error(
            op.dim_in(),
            op.dim_out(),
            |x| op.apply_vec(x),
            |y| op.adjoint_vec(y),
            20,
            11,
        );
        assert!(err < 1e-12, "pairing error {err}");
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let maps = CoilMaps::unit(4, 4).unwrap();
        let mask = SamplingMask::full(1, 4, 6).unwrap();
        assert!(Encoder::new(&maps, &mask).is_err());
    }
}
