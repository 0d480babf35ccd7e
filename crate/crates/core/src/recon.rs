//! Reconstruction methods and the joint objective.
//!
//! The joint objective over a complex sequence `u` and flow `v` is
//!
//! ```text
//! sum_k 1/2 |A_k u_k - y_k|^2 + gamma TV(u_k)
//!   + beta sum_k |grad(u_k) . v_k + u_{k+1} - u_k|_1
//!   + delta sum_k sum_l TV(v_{k,l})
//! ```
//!
//! with isotropic spatial TV (complex `u`: pointwise norm over the real and
//! imaginary parts of both derivatives) and the complex modulus in the
//! motion term.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::flow::estimate_flow_complex;
use crate::operators::{
    as_complex, as_real, encode_adjoint, grad, operator_norm, Encoder, GradientOp, LinearOperator,
    MotionOp, Stack,
};
use crate::pdhg::{
    self, soft_threshold_complex, svt, BallProjection, BlockProx, Prox, QuadraticConjugate,
    SaddleProblem, Trace, Zero,
};
use crate::types::{
    CoilMaps, DErrorMode, FlowField, ImageSequence, KSpaceData, ModelParams, SolverConfig,
};

/// Low-rank and sparse parts of an L+S reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankSparse {
    pub low_rank: ImageSequence,
    pub sparse: ImageSequence,
}

impl LowRankSparse {
    /// `|S|^2 / (|L|^2 + |S|^2)`.
    pub fn sparse_energy_fraction(&self) -> f64 {
        let e = |u: &ImageSequence| u.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
        let (l, s) = (e(&self.low_rank), e(&self.sparse));
        if l + s == 0.0 {
            0.0
        } else {
            s / (l + s)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconResult {
    pub image: ImageSequence,
    pub flow: Option<FlowField>,
    /// Objective after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Stopping quantity after every outer iteration.
    pub d_errors: Vec<f64>,
    /// Seconds since the start of the optimisation, per outer iteration.
    pub elapsed: Vec<f64>,
    pub outer_iters: usize,
    pub wall_time: f64,
    /// Inner primal-dual traces, one per sub-problem solve.
    pub inner_traces: Vec<Trace>,
    pub components: Option<LowRankSparse>,
}

impl ReconResult {
    fn single(image: ImageSequence, objective: f64, wall_time: f64, inner: Vec<Trace>) -> Self {
        Self {
            image,
            flow: None,
            objective_trace: vec![objective],
            d_errors: vec![0.0],
            elapsed: vec![wall_time],
            outer_iters: 1,
            wall_time,
            inner_traces: inner,
            components: None,
        }
    }

    /// Columns `outer_iter, objective, d_error, wall_time`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["outer_iter", "objective", "d_error", "wall_time"])
            .map_err(io)?;
        for i in 0..self.objective_trace.len() {
            w.write_record([
                (i + 1).to_string(),
                self.objective_trace[i].to_string(),
                self.d_errors[i].to_string(),
                self.elapsed[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_maps(y: &KSpaceData, maps: &CoilMaps) -> Result<()> {
    if y.coils() != maps.coils() || y.height() != maps.height() || y.width() != maps.width() {
        return Err(Error::Dimension(format!(
            "k-space is {}x{}x{} (coils x rows x cols), maps are {}x{}x{}",
            y.coils(),
            y.height(),
            y.width(),
            maps.coils(),
            maps.height(),
            maps.width()
        )));
    }
    Ok(())
}

fn to_sequence(y: &KSpaceData, x: &[f64]) -> Result<ImageSequence> {
    ImageSequence::new(y.frames(), y.height(), y.width(), as_complex(x).to_vec())
}

/// `A^H y`.
pub fn zero_fill(y: &KSpaceData, maps: &CoilMaps) -> Result<ImageSequence> {
    check_maps(y, maps)?;
    encode_adjoint(y, maps)
}

/// Per-frame sum-of-squares of the inverse-transformed coil images.
pub fn gold_standard(y_full: &KSpaceData, maps: &CoilMaps) -> Result<ImageSequence> {
    check_maps(y_full, maps)?;
    if !y_full.mask().is_full() {
        return Err(Error::InvalidArgument(
            "gold standard needs fully sampled k-space".into(),
        ));
    }
    let fft = crate::operators::fft::Fft2::new(y_full.height(), y_full.width());
    let n = y_full.height() * y_full.width();
    let mut out = Vec::with_capacity(y_full.frames() * n);
    for k in 0..y_full.frames() {
        let mut sos = vec![0.0; n];
        for c in 0..y_full.coils() {
            let mut img = y_full.slice(k, c).to_vec();
            fft.inverse(&mut img);
            for (s, z) in sos.iter_mut().zip(&img) {
                *s += z.norm_sqr();
            }
        }
        out.extend(sos.iter().map(|s| Complex64::new(s.sqrt(), 0.0)));
    }
    ImageSequence::new(y_full.frames(), y_full.height(), y_full.width(), out)
}

/// Sum over frames and pixels of the isotropic complex gradient norm.
pub fn total_variation(u: &ImageSequence) -> f64 {
    let (h, w, n) = (u.height(), u.width(), u.frame_len());
    let mut g = vec![Complex64::new(0.0, 0.0); 2 * n];
    let mut total = 0.0;
    for k in 0..u.frames() {
        grad(u.frame(k), h, w, &mut g);
        total += g
            .chunks(2)
            .map(|p| (p[0].norm_sqr() + p[1].norm_sqr()).sqrt())
            .sum::<f64>();
    }
    total
}

/// `sum_k sum_l TV(v_{k,l})`.
pub fn flow_total_variation(v: &FlowField) -> f64 {
    let (h, w, n) = (v.height(), v.width(), v.height() * v.width());
    let mut comp = vec![0.0; n];
    let mut g = vec![0.0; 2 * n];
    let mut total = 0.0;
    for k in 0..v.pairs() {
        let p = v.pair(k);
        for l in 0..2 {
            for (i, c) in comp.iter_mut().enumerate() {
                *c = p[2 * i + l];
            }
            grad(&comp, h, w, &mut g);
            total += g.chunks(2).map(|d| d[0].hypot(d[1])).sum::<f64>();
        }
    }
    total
}

/// The four-term joint objective; the mask is the one carried by `y`.
pub fn objective_eq7(
    u: &ImageSequence,
    v: &FlowField,
    y: &KSpaceData,
    maps: &CoilMaps,
    params: &ModelParams,
) -> Result<f64> {
    check_maps(y, maps)?;
    let enc = Encoder::new(maps, y.mask())?;
    Objective {
        enc: &enc,
        y_meas: &enc.measurements(y)?,
        params,
    }
    .eval(u, v)
}

struct Objective<'a> {
    enc: &'a Encoder,
    y_meas: &'a [f64],
    params: &'a ModelParams,
}

impl Objective<'_> {
    fn eval(&self, u: &ImageSequence, v: &FlowField) -> Result<f64> {
        let mask = self.enc.mask();
        if u.frames() != mask.frames() || u.height() != mask.height() || u.width() != mask.width() {
            return Err(Error::Dimension("image and k-space grids differ".into()));
        }
        let p = self.params;
        let mut total = data_term(self.enc, u, self.y_meas) + p.gamma * total_variation(u);
        if u.frames() >= 2 {
            let motion = MotionOp::new(u.frames(), u.height(), u.width(), v)?;
            let r = motion.apply_vec(as_real(u.data()));
            total += p.beta * as_complex(&r).iter().map(|z| z.norm()).sum::<f64>();
            total += p.delta * flow_total_variation(v);
        }
        Ok(total)
    }
}

fn data_term(enc: &Encoder, u: &ImageSequence, y_meas: &[f64]) -> f64 {
    let au = enc.apply_vec(as_real(u.data()));
    0.5 * au
        .iter()
        .zip(y_meas)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

/// Primal-dual state of an image sub-problem, reused as a warm start.
struct Warm {
    x: Vec<f64>,
    r: Vec<f64>,
}

/// Solves `min_u 1/2 |Au - y|^2 + gamma TV(u) + beta |M u|_1`; the motion
/// block is omitted when `motion` is `None`. Starts from zero unless a
/// warm start is given.
fn solve_u(
    y: &KSpaceData,
    y_meas: &[f64],
    enc: &Encoder,
    gamma: f64,
    motion: Option<(&MotionOp, f64)>,
    warm: Option<Warm>,
    steps: Option<(f64, f64)>,
    cfg: &SolverConfig,
) -> Result<(ImageSequence, Warm, Trace)> {
    let grad_op = GradientOp::complex(y.frames(), y.height(), y.width())?;
    let mut blocks: Vec<&dyn LinearOperator> = vec![enc, &grad_op];
    if let Some((m, _)) = motion {
        blocks.push(m);
    }
    let k = Stack::new(blocks)?;
    let ranges = k.ranges();
    let data = QuadraticConjugate { y: y_meas };
    let tv = BallProjection {
        radius: gamma,
        group: 4,
    };
    let mut proxes: Vec<(std::ops::Range<usize>, &dyn Prox)> =
        vec![(ranges[0].clone(), &data), (ranges[1].clone(), &tv)];
    let coupling = motion.map(|(_, beta)| BallProjection {
        radius: beta,
        group: 2,
    });
    if let Some(c) = &coupling {
        proxes.push((ranges[2].clone(), c));
    }
    let f_star = BlockProx::new(proxes);
    let mut problem = SaddleProblem::new(&k, &Zero, &f_star);
    if let Some(w) = warm {
        problem.x0 = Some(w.x);
        problem.r0 = Some(w.r);
    }
    let sol = match steps {
        Some((tau, sigma)) => pdhg::solve_with_steps(&problem, cfg, tau, sigma)?,
        None => pdhg::solve(&problem, cfg)?,
    };
    Ok((
        to_sequence(y, &sol.x)?,
        Warm { x: sol.x, r: sol.r },
        sol.trace,
    ))
}

/// `|[A; grad]|` by power iteration.
fn base_operator_norm(y: &KSpaceData, enc: &Encoder, cfg: &SolverConfig) -> Result<f64> {
    let grad_op = GradientOp::complex(y.frames(), y.height(), y.width())?;
    let k = Stack::new(vec![enc as &dyn LinearOperator, &grad_op])?;
    operator_norm(&k, cfg.power_iters, cfg.seed)
}

/// Steps for `K = [A; grad; M]` from `|K|^2 <= |[A; grad]|^2 + |M|^2`, so
/// only the cheap motion block is power-iterated per flow. User-given steps
/// go through the solver's own check instead.
fn coupled_steps(base: f64, motion: &MotionOp, cfg: &SolverConfig) -> Result<Option<(f64, f64)>> {
    if cfg.tau.is_some() || cfg.sigma.is_some() {
        return Ok(None);
    }
    let m = operator_norm(motion, cfg.power_iters, cfg.seed)?;
    let l = pdhg::STEP_SAFETY * (base * base + m * m).sqrt();
    Ok(Some((1.0 / l, 1.0 / l)))
}

/// The image sub-problem for a fixed flow, solved from a zero start.
pub fn solve_image_step(
    y: &KSpaceData,
    maps: &CoilMaps,
    v: &FlowField,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<ImageSequence> {
    check_maps(y, maps)?;
    params.validate()?;
    let enc = Encoder::new(maps, y.mask())?;
    let y_meas = enc.measurements(y)?;
    let motion = MotionOp::new(y.frames(), y.height(), y.width(), v)?;
    let coupling = (params.beta > 0.0).then_some((&motion, params.beta));
    Ok(solve_u(y, &y_meas, &enc, params.gamma, coupling, None, None, cfg)?.0)
}

/// Frame-wise TV-regularised least squares,
/// `min_u 1/2 |Au - y|^2 + gamma TV(u)`, solved jointly over frames.
pub fn reconstruct_cs(
    y: &KSpaceData,
    maps: &CoilMaps,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<ReconResult> {
    check_maps(y, maps)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be > 0")));
    }
    let start = Instant::now();
    let enc = Encoder::new(maps, y.mask())?;
    let y_meas = enc.measurements(y)?;
    let (u, _, trace) = solve_u(y, &y_meas, &enc, gamma, None, None, None, cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let objective = data_term(&enc, &u, &y_meas) + gamma * total_variation(&u);
    Ok(ReconResult::single(u, objective, wall, vec![trace]))
}

fn mean_abs_diff_complex(a: &[Complex64], b: &[Complex64], mode: DErrorMode) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum();
    match mode {
        DErrorMode::Mean => s / a.len() as f64,
        DErrorMode::Sum => s,
    }
}

fn mean_abs_diff(a: &[f64], b: &[f64], mode: DErrorMode) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    match mode {
        DErrorMode::Mean => s / a.len() as f64,
        DErrorMode::Sum => s,
    }
}

/// Flow step sizes tried along the segment from the previous flow to the
/// freshly estimated one.
const FLOW_BACKTRACK: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Alternating minimisation of the joint objective.
///
/// Each outer iteration solves the image sub-problem for the current flow,
/// warm-started from the previous primal and dual iterates, then
/// re-estimates the flow on the complex frames starting from the old flow. A step that would raise the joint
/// objective is not taken: the image update is rejected, and the flow
/// update is shortened along the segment from the old flow (the objective
/// is convex in the flow for fixed `u`). With `beta = 0` the coupling
/// vanishes, the flow step is skipped and the image equals
/// [`reconstruct_cs`].
pub fn reconstruct_csm(
    y: &KSpaceData,
    maps: &CoilMaps,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<ReconResult> {
    check_maps(y, maps)?;
    params.validate()?;
    if y.frames() < 2 {
        return Err(Error::Dimension(
            "joint reconstruction needs at least two frames".into(),
        ));
    }
    if params.gamma <= 0.0 {
        return Err(Error::InvalidArgument("gamma must be > 0".into()));
    }
    let (f, h, w) = (y.frames(), y.height(), y.width());
    let start = Instant::now();
    let enc = Encoder::new(maps, y.mask())?;
    let y_meas = enc.measurements(y)?;
    let eq7 = Objective {
        enc: &enc,
        y_meas: &y_meas,
        params,
    };
    let mut u = ImageSequence::zeros(f, h, w)?;
    let mut v = FlowField::zeros(f - 1, h, w)?;
    let mut objective = eq7.eval(&u, &v)?;
    let mut result = ReconResult {
        image: u.clone(),
        flow: None,
        objective_trace: Vec::new(),
        d_errors: Vec::new(),
        elapsed: Vec::new(),
        outer_iters: 0,
        wall_time: 0.0,
        inner_traces: Vec::new(),
        components: None,
    };
    let mut warm: Option<Warm> = None;
    let mut base_norm: Option<f64> = None;
    let mut flow_changed = true;

    for _ in 0..params.max_outer {
        let u_prev = u.clone();
        let v_prev = v.clone();

        // An unchanged flow leaves the image sub-problem as it was solved.
        if flow_changed {
            let motion = if params.beta > 0.0 {
                Some(MotionOp::new(f, h, w, &v)?)
            } else {
                None
            };
            let coupling = motion.as_ref().map(|m| (m, params.beta));
            let steps = match &motion {
                Some(m) => {
                    let base = match base_norm {
                        Some(b) => b,
                        None => *base_norm.insert(base_operator_norm(y, &enc, cfg)?),
                    };
                    coupled_steps(base, m, cfg)?
                }
                None => None,
            };
            let (u_new, state, trace) = solve_u(
                y,
                &y_meas,
                &enc,
                params.gamma,
                coupling,
                warm.take(),
                steps,
                cfg,
            )?;
            result.inner_traces.push(trace);
            warm = Some(state);
            let obj_u = eq7.eval(&u_new, &v)?;
            if obj_u <= objective {
                u = u_new;
                objective = obj_u;
            }
        }

        flow_changed = false;
        if params.beta > 0.0 {
            let v_new = estimate_flow_complex(&u, params, Some(&v), cfg)?;
            for t in FLOW_BACKTRACK {
                let data: Vec<f64> = v_prev
                    .data()
                    .iter()
                    .zip(v_new.data())
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                let cand = FlowField::new(f - 1, h, w, data)?;
                let obj_v = eq7.eval(&u, &cand)?;
                if obj_v <= objective {
                    flow_changed = cand != v;
                    v = cand;
                    objective = obj_v;
                    break;
                }
            }
        }

        let d_error = mean_abs_diff_complex(u.data(), u_prev.data(), params.d_error_mode)
            + mean_abs_diff(v.data(), v_prev.data(), params.d_error_mode);
        if !d_error.is_finite() {
            return Err(Error::Divergence(
                "non-finite change between outer iterations".into(),
            ));
        }
        result.outer_iters += 1;
        result.objective_trace.push(objective);
        result.d_errors.push(d_error);
        result.elapsed.push(start.elapsed().as_secs_f64());
        if d_error <= params.zeta_stop {
            break;
        }
    }
    result.wall_time = start.elapsed().as_secs_f64();
    result.image = u;
    result.flow = Some(v);
    Ok(result)
}

/// Regularisation weights of the L+S baseline; `None` picks the
/// scale-relative defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LsParams {
    pub lambda_l: Option<f64>,
    pub lambda_s: Option<f64>,
}

pub const LS_LAMBDA_L_FACTOR: f64 = 0.01;
pub const LS_LAMBDA_S_FACTOR: f64 = 0.025;

/// Unitary FFT along time for every pixel of a `[frame][pixel]` array.
struct TemporalFft {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    frames: usize,
    pixels: usize,
}

impl TemporalFft {
    fn new(frames: usize, pixels: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(frames),
            inv: planner.plan_fft_inverse(frames),
            frames,
            pixels,
        }
    }

    fn run(&self, x: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let (f, n) = (self.frames, self.pixels);
        let mut buf = vec![Complex64::new(0.0, 0.0); f * n];
        for k in 0..f {
            for p in 0..n {
                buf[p * f + k] = x[k * n + p];
            }
        }
        plan.process(&mut buf);
        let s = 1.0 / (f as f64).sqrt();
        for k in 0..f {
            for p in 0..n {
                x[k * n + p] = buf[p * f + k] * s;
            }
        }
    }

    fn forward(&self, x: &mut [Complex64]) {
        self.run(x, &self.fwd);
    }

    fn inverse(&self, x: &mut [Complex64]) {
        self.run(x, &self.inv);
    }
}

/// Default weights: `0.01 * sigma_max(Casorati(A^H y))` and
/// `0.025 * max |A^H y|`.
pub fn ls_default_lambdas(y: &KSpaceData, maps: &CoilMaps) -> Result<(f64, f64)> {
    let m = zero_fill(y, maps)?;
    let s = pdhg::singular_values(m.data(), m.frame_len(), m.frames())?;
    let peak = m.data().iter().fold(0.0f64, |a, z| a.max(z.norm()));
    Ok((LS_LAMBDA_L_FACTOR * s[0], LS_LAMBDA_S_FACTOR * peak))
}

/// Low-rank plus sparse reconstruction by iterative soft-thresholding:
/// `L = SVT(M - S)`, `S = T^H soft(T(M - L_prev))` with `T` the unitary
/// temporal FFT, then the data-consistency step
/// `M = L + S - A^H(A(L + S) - y)`. Stops when the relative change of `M`
/// drops below `inner_tol` or after `max_inner` iterations.
pub fn reconstruct_ls(
    y: &KSpaceData,
    maps: &CoilMaps,
    params: &LsParams,
    cfg: &SolverConfig,
) -> Result<ReconResult> {
    check_maps(y, maps)?;
    cfg.validate()?;
    let start = Instant::now();
    let (default_l, default_s) = ls_default_lambdas(y, maps)?;
    let lambda_l = params.lambda_l.unwrap_or(default_l);
    let lambda_s = params.lambda_s.unwrap_or(default_s);
    for (name, v) in [("lambda_L", lambda_l), ("lambda_S", lambda_s)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be >= 0")));
        }
    }
    let (f, h, w) = (y.frames(), y.height(), y.width());
    let n = h * w;
    let enc = Encoder::new(maps, y.mask())?;
    let tfft = TemporalFft::new(f, n);
    let y_meas = enc.measurements(y)?;
    let y_flat = y_meas.as_slice();

    let mut m: Vec<Complex64> = as_complex(&enc.adjoint_vec(y_flat)).to_vec();
    let mut l_prev = m.clone();
    let mut l = vec![Complex64::new(0.0, 0.0); f * n];
    let mut s = vec![Complex64::new(0.0, 0.0); f * n];
    let mut result = ReconResult {
        image: ImageSequence::zeros(f, h, w)?,
        flow: None,
        objective_trace: Vec::new(),
        d_errors: Vec::new(),
        elapsed: Vec::new(),
        outer_iters: 0,
        wall_time: 0.0,
        inner_traces: Vec::new(),
        components: None,
    };

    for _ in 0..cfg.max_inner {
        for ((li, mi), si) in l.iter_mut().zip(&m).zip(&s) {
            *li = mi - si;
        }
        let sv = svt(&mut l, n, f, lambda_l)?;
        for ((si, mi), lp) in s.iter_mut().zip(&m).zip(&l_prev) {
            *si = mi - lp;
        }
        tfft.forward(&mut s);
        soft_threshold_complex(&mut s, lambda_s);
        let sparse_l1: f64 = s.iter().map(|z| z.norm()).sum();
        tfft.inverse(&mut s);

        let ls: Vec<Complex64> = l.iter().zip(&s).map(|(a, b)| a + b).collect();
        let mut resid = enc.apply_vec(as_real(&ls));
        for (r, yv) in resid.iter_mut().zip(y_flat) {
            *r -= yv;
        }
        let data = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
        let correction = enc.adjoint_vec(&resid);
        let m_new: Vec<Complex64> = ls
            .iter()
            .zip(as_complex(&correction))
            .map(|(a, c)| a - c)
            .collect();
        if m_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Divergence("non-finite L+S iterate".into()));
        }
        let change = m_new
            .iter()
            .zip(&m)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = m
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(pdhg::REL_EPS);
        let nuclear: f64 = sv.iter().map(|v| (v - lambda_l).max(0.0)).sum();
        m = m_new;
        l_prev.copy_from_slice(&l);

        result.outer_iters += 1;
        result
            .objective_trace
            .push(data + lambda_l * nuclear + lambda_s * sparse_l1);
        result.d_errors.push(change / scale);
        result.elapsed.push(start.elapsed().as_secs_f64());
        if change / scale < cfg.inner_tol {
            break;
        }
    }
    result.wall_time = start.elapsed().as_secs_f64();
    result.image = ImageSequence::new(f, h, w, m)?;
    result.components = Some(LowRankSparse {
        low_rank: ImageSequence::new(f, h, w, l)?,
        sparse: ImageSequence::new(f, h, w, s)?,
    });
    Ok(result)
}
