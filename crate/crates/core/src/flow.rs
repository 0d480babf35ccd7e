//! TV-L1 optical flow between consecutive magnitude frames.
//!
//! For a pair `(a, b)` the flow `v` minimises
//! `sum |grad(a) . v + (b - a)| + weight * sum_l sum |grad(v_l)|_2`.
//! With this sign, `v` points along the apparent motion from `a` to `b`:
//! content moving one pixel to the right gives `v_x = +1`.
//! Both terms are dualised and the saddle problem goes to [`crate::pdhg`].

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{div, grad, LinearOperator};
use crate::pdhg::{self, BallProjection, BlockProx, SaddleProblem, ShiftedBall, Zero};
use crate::types::{FlowField, ImageSequence, ModelParams, SolverConfig};

/// `v -> [grad(a) . v ; grad(v_x) ; grad(v_y)]` for `a` with one (real)
/// or two (complex) channels.
///
/// The input is `[pixel][component]`; the output is the data block
/// `[pixel][channel]` followed by `[pixel][component][d/dx, d/dy]`.
pub struct FlowOp {
    height: usize,
    width: usize,
    channels: usize,
    /// `grad(a)` as `[pixel][channel][d/dx, d/dy]`.
    ga: Vec<f64>,
}

impl FlowOp {
    /// Operator of the real pair energy around frame `a`.
    pub fn real(a: &[f64], h: usize, w: usize) -> Result<Self> {
        check_grid(a.len(), a.len(), h, w)?;
        Ok(Self {
            height: h,
            width: w,
            channels: 1,
            ga: grad_of(a, h, w),
        })
    }

    /// Operator of the complex pair energy around frame `a`.
    pub fn complex(a: &[Complex64], h: usize, w: usize) -> Result<Self> {
        check_grid(a.len(), a.len(), h, w)?;
        Ok(Self {
            height: h,
            width: w,
            channels: 2,
            ga: complex_grad_of(a, h, w),
        })
    }

    fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Diagonal steps from the absolute row and column sums of the matrix.
    fn diagonal_steps(&self) -> (Vec<f64>, Vec<f64>) {
        let (h, w, n, ch) = (self.height, self.width, self.pixels(), self.channels);
        let inv = |s: f64| if s > 0.0 { 1.0 / s } else { 1.0 };
        let mut sigma = Vec::with_capacity(self.dim_out());
        for g in self.ga.chunks(2) {
            sigma.push(inv(g[0].abs() + g[1].abs()));
        }
        let mut tau = vec![0.0; 2 * n];
        for i in 0..n {
            let (r, c) = (i / w, i % w);
            // Forward differences touching this pixel along x and y.
            let dx = usize::from(c + 1 < w) + usize::from(c > 0);
            let dy = usize::from(r + 1 < h) + usize::from(r > 0);
            for l in 0..2 {
                let coupled: f64 = (0..ch).map(|k| self.ga[2 * (i * ch + k) + l].abs()).sum();
                tau[2 * i + l] = inv(coupled + (dx + dy) as f64);
            }
            for _ in 0..2 {
                sigma.push(if c + 1 < w { 0.5 } else { 1.0 });
                sigma.push(if r + 1 < h { 0.5 } else { 1.0 });
            }
        }
        (tau, sigma)
    }
}

impl LinearOperator for FlowOp {
    fn dim_in(&self) -> usize {
        2 * self.pixels()
    }

    fn dim_out(&self) -> usize {
        (self.channels + 4) * self.pixels()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (h, w, n, ch) = (self.height, self.width, self.pixels(), self.channels);
        let (data, tv) = out.split_at_mut(ch * n);
        for (i, d) in data.chunks_mut(ch).enumerate() {
            for (c, dc) in d.iter_mut().enumerate() {
                let g = &self.ga[2 * (i * ch + c)..];
                *dc = g[0] * v[2 * i] + g[1] * v[2 * i + 1];
            }
        }
        let mut comp = vec![0.0; n];
        let mut g = vec![0.0; 2 * n];
        for l in 0..2 {
            for (i, c) in comp.iter_mut().enumerate() {
                *c = v[2 * i + l];
            }
            grad(&comp, h, w, &mut g);
            for i in 0..n {
                tv[4 * i + 2 * l] = g[2 * i];
                tv[4 * i + 2 * l + 1] = g[2 * i + 1];
            }
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (h, w, n, ch) = (self.height, self.width, self.pixels(), self.channels);
        let (data, tv) = y.split_at(ch * n);
        let mut p = vec![0.0; 2 * n];
        let mut d = vec![0.0; n];
        for l in 0..2 {
            for i in 0..n {
                p[2 * i] = tv[4 * i + 2 * l];
                p[2 * i + 1] = tv[4 * i + 2 * l + 1];
            }
            div(&p, h, w, &mut d);
            for i in 0..n {
                let coupled: f64 = (0..ch)
                    .map(|c| self.ga[2 * (i * ch + c) + l] * data[i * ch + c])
                    .sum();
                out[2 * i + l] = coupled - d[i];
            }
        }
    }
}

fn check_grid(a: usize, b: usize, h: usize, w: usize) -> Result<()> {
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!(
            "flow needs at least 2x2 frames, got {h}x{w}"
        )));
    }
    if a != h * w || b != h * w {
        return Err(Error::Dimension("flow frames do not match the grid".into()));
    }
    Ok(())
}

fn check_pair(a: &[f64], b: &[f64], h: usize, w: usize) -> Result<()> {
    check_grid(a.len(), b.len(), h, w)
}

fn check_weight(weight: f64) -> Result<()> {
    if weight.is_finite() && weight > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "flow weight {weight} must be > 0"
        )))
    }
}

fn sequence_weight(u: &ImageSequence, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if u.frames() < 2 {
        return Err(Error::Dimension(
            "flow estimation needs at least two frames".into(),
        ));
    }
    if params.beta == 0.0 {
        return Err(Error::InvalidArgument(
            "flow weight delta/beta is undefined for beta = 0".into(),
        ));
    }
    Ok(params.delta / params.beta)
}

/// The pair energy at a given flow `v` (`[pixel][component]`), evaluated on
/// the frames exactly as passed.
pub fn pair_objective(
    a: &[f64],
    b: &[f64],
    h: usize,
    w: usize,
    v: &[f64],
    weight: f64,
) -> Result<f64> {
    check_pair(a, b, h, w)?;
    if v.len() != 2 * h * w {
        return Err(Error::Dimension("flow does not match the grid".into()));
    }
    let op = FlowOp {
        height: h,
        width: w,
        channels: 1,
        ga: grad_of(a, h, w),
    };
    let kv = op.apply_vec(v);
    let n = h * w;
    let data: f64 = kv[..n]
        .iter()
        .zip(b.iter().zip(a))
        .map(|(d, (b, a))| (d + b - a).abs())
        .sum();
    let tv: f64 = kv[n..].chunks(2).map(|g| g[0].hypot(g[1])).sum();
    Ok(data + weight * tv)
}

fn grad_of(a: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut g = vec![0.0; 2 * h * w];
    grad(a, h, w, &mut g);
    g
}

/// Scale that maps the pair jointly onto `[0, 1]`; `None` for a constant
/// pair, where the zero flow is optimal.
fn joint_scale(a: &[f64], b: &[f64]) -> Option<f64> {
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    (hi > lo).then(|| 1.0 / (hi - lo))
}

/// Flow from `a` to `b`, layout `[pixel][component]`.
///
/// The pair is first mapped jointly onto `[0, 1]`; the returned flow
/// minimises [`pair_objective`] of the normalised frames.
pub fn estimate_flow_pair(
    a: &[f64],
    b: &[f64],
    h: usize,
    w: usize,
    weight: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check_pair(a, b, h, w)?;
    check_weight(weight)?;
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Invariant(
            "flow frames contain non-finite values".into(),
        ));
    }
    let n = h * w;
    let Some(scale) = joint_scale(a, b) else {
        return Ok(vec![0.0; 2 * n]);
    };
    let an: Vec<f64> = a.iter().map(|v| v * scale).collect();
    // Dual of |z - shift|_1 with shift = -(b - a).
    let shift: Vec<f64> = a.iter().zip(b).map(|(a, b)| (a - b) * scale).collect();
    let op = FlowOp {
        height: h,
        width: w,
        channels: 1,
        ga: grad_of(&an, h, w),
    };
    let data = ShiftedBall {
        shift: &shift,
        radius: 1.0,
        group: 1,
    };
    let tv = BallProjection {
        radius: weight,
        group: 2,
    };
    let f_star = BlockProx::new(vec![(0..n, &data as &dyn pdhg::Prox), (n..5 * n, &tv)]);
    let problem = SaddleProblem::new(&op, &Zero, &f_star);
    let (tau, sigma) = op.diagonal_steps();
    Ok(pdhg::solve_preconditioned(&problem, cfg, &tau, &sigma)?.x)
}

/// Independent pair solves on `|u_k|, |u_{k+1}|` with weight `delta / beta`.
pub fn estimate_flow(
    u: &ImageSequence,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<FlowField> {
    let weight = sequence_weight(u, params)?;
    let (h, w) = (u.height(), u.width());
    let mags: Vec<Vec<f64>> = (0..u.frames()).map(|k| u.frame_magnitude(k)).collect();
    let pairs: Vec<Vec<f64>> = (0..u.frames() - 1)
        .into_par_iter()
        .map(|k| estimate_flow_pair(&mags[k], &mags[k + 1], h, w, weight, cfg))
        .collect::<Result<_>>()?;
    FlowField::new(u.frames() - 1, h, w, pairs.concat())
}

fn complex_grad_of(a: &[Complex64], h: usize, w: usize) -> Vec<f64> {
    let mut g = vec![Complex64::new(0.0, 0.0); 2 * h * w];
    grad(a, h, w, &mut g);
    g.chunks(2)
        .flat_map(|d| [d[0].re, d[1].re, d[0].im, d[1].im])
        .collect()
}

/// The pair energy for complex frames: the data term is the modulus of the
/// complex residual `grad(a) . v + b - a`.
pub fn pair_objective_complex(
    a: &[Complex64],
    b: &[Complex64],
    h: usize,
    w: usize,
    v: &[f64],
    weight: f64,
) -> Result<f64> {
    check_grid(a.len(), b.len(), h, w)?;
    if v.len() != 2 * h * w {
        return Err(Error::Dimension("flow does not match the grid".into()));
    }
    let op = FlowOp {
        height: h,
        width: w,
        channels: 2,
        ga: complex_grad_of(a, h, w),
    };
    let kv = op.apply_vec(v);
    let n = h * w;
    let data: f64 = kv[..2 * n]
        .chunks(2)
        .zip(b.iter().zip(a))
        .map(|(d, (b, a))| (Complex64::new(d[0], d[1]) + b - a).norm())
        .sum();
    let tv: f64 = kv[2 * n..].chunks(2).map(|g| g[0].hypot(g[1])).sum();
    Ok(data + weight * tv)
}

/// Flow from complex `a` to `b`, minimising [`pair_objective_complex`] on
/// the frames as passed (no rescaling), optionally from a starting flow.
pub fn estimate_flow_pair_complex(
    a: &[Complex64],
    b: &[Complex64],
    h: usize,
    w: usize,
    weight: f64,
    init: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check_grid(a.len(), b.len(), h, w)?;
    check_weight(weight)?;
    if a.iter()
        .chain(b)
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Invariant(
            "flow frames contain non-finite values".into(),
        ));
    }
    let n = h * w;
    let shift: Vec<f64> = a
        .iter()
        .zip(b)
        .flat_map(|(a, b)| {
            let d = a - b;
            [d.re, d.im]
        })
        .collect();
    let op = FlowOp {
        height: h,
        width: w,
        channels: 2,
        ga: complex_grad_of(a, h, w),
    };
    let data = ShiftedBall {
        shift: &shift,
        radius: 1.0,
        group: 2,
    };
    let tv = BallProjection {
        radius: weight,
        group: 2,
    };
    let f_star = BlockProx::new(vec![
        (0..2 * n, &data as &dyn pdhg::Prox),
        (2 * n..6 * n, &tv),
    ]);
    let mut problem = SaddleProblem::new(&op, &Zero, &f_star);
    problem.x0 = init.map(<[f64]>::to_vec);
    let (tau, sigma) = op.diagonal_steps();
    Ok(pdhg::solve_preconditioned(&problem, cfg, &tau, &sigma)?.x)
}

/// Independent pair solves on the complex frames `u_k, u_{k+1}` with
/// weight `delta / beta`, optionally started from a previous flow.
pub fn estimate_flow_complex(
    u: &ImageSequence,
    params: &ModelParams,
    init: Option<&FlowField>,
    cfg: &SolverConfig,
) -> Result<FlowField> {
    let weight = sequence_weight(u, params)?;
    let (h, w) = (u.height(), u.width());
    if let Some(v) = init {
        if v.pairs() + 1 != u.frames() || v.height() != h || v.width() != w {
            return Err(Error::Dimension(
                "initial flow does not match the sequence".into(),
            ));
        }
    }
    let pairs: Vec<Vec<f64>> = (0..u.frames() - 1)
        .into_par_iter()
        .map(|k| {
            estimate_flow_pair_complex(
                u.frame(k),
                u.frame(k + 1),
                h,
                w,
                weight,
                init.map(|v| v.pair(k)),
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    FlowField::new(u.frames() - 1, h, w, pairs.concat())
}

/// Per-pair mean and maximum displacement magnitude.
pub fn displacement_summary(v: &FlowField) -> Vec<(f64, f64)> {
    (0..v.pairs())
        .map(|k| {
            let mags: Vec<f64> = v.pair(k).chunks(2).map(|c| c[0].hypot(c[1])).collect();
            let mean = mags.iter().sum::<f64>() / mags.len() as f64;
            (mean, mags.iter().fold(0.0, |m: f64, &x| m.max(x)))
        })
        .collect()
}
