//! First-order primal-dual solver for `min_x max_r <Kx, r> + G(x) - F*(r)`
//! together with the proximal maps the reconstruction problems need.
//!
//! Each iteration performs
//! `r <- prox_{sigma F*}(r + sigma K xbar)`,
//! `x+ <- prox_{tau G}(x - tau K^T r)`,
//! `xbar <- x+ + theta (x+ - x)`.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{as_complex_mut, norm, operator_norm, LinearOperator};
use crate::types::SolverConfig;

/// Guard in the relative-change denominator for zero starts.
pub const REL_EPS: f64 = 1e-12;

/// Auto-derived steps use `1 / (SAFETY * |K|)` so that the power-method
/// estimate, which approaches `|K|` from below, cannot break the step rule.
pub const STEP_SAFETY: f64 = 1.01;

/// Proximal map `x <- argmin_z f(z) + |z - x|^2 / (2 step)`, in place.
pub trait Prox: Sync {
    fn prox(&self, x: &mut [f64], step: f64);

    /// The prox in the metric `diag(1 / steps)`. The fallback uses the first
    /// step and is only right for uniform steps.
    fn prox_diag(&self, x: &mut [f64], steps: &[f64]) {
        self.prox(x, steps.first().copied().unwrap_or(1.0));
    }
}

/// `f = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl Prox for Zero {
    fn prox(&self, _x: &mut [f64], _step: f64) {}

    fn prox_diag(&self, _x: &mut [f64], _steps: &[f64]) {}
}

/// `lambda |x|_1`; with `complex` the modulus of each interleaved pair.
#[derive(Clone, Copy, Debug)]
pub struct L1 {
    pub lambda: f64,
    pub complex: bool,
}

impl Prox for L1 {
    fn prox(&self, x: &mut [f64], step: f64) {
        let t = self.lambda * step;
        if self.complex {
            soft_threshold_complex(as_complex_mut(x), t);
        } else {
            for v in x.iter_mut() {
                *v = v.signum() * (v.abs() - t).max(0.0);
            }
        }
    }

    fn prox_diag(&self, x: &mut [f64], steps: &[f64]) {
        if self.complex {
            for (z, s) in x.chunks_mut(2).zip(steps.chunks(2)) {
                let t = self.lambda * s[0];
                let m = z[0].hypot(z[1]);
                let f = if m > t { (m - t) / m } else { 0.0 };
                z[0] *= f;
                z[1] *= f;
            }
        } else {
            for (v, s) in x.iter_mut().zip(steps) {
                *v = v.signum() * (v.abs() - self.lambda * s).max(0.0);
            }
        }
    }
}

pub fn soft_threshold_complex(z: &mut [Complex64], t: f64) {
    for v in z.iter_mut() {
        let m = v.norm();
        *v = if m > t {
            *v * ((m - t) / m)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
}

/// Projection of consecutive groups of `group` values onto the Euclidean
/// ball of `radius`: the conjugate prox of `radius * sum |x_g|_2`.
#[derive(Clone, Copy, Debug)]
pub struct BallProjection {
    pub radius: f64,
    pub group: usize,
}

impl Prox for BallProjection {
    fn prox(&self, x: &mut [f64], _step: f64) {
        project_groups(x, self.radius, self.group);
    }

    fn prox_diag(&self, x: &mut [f64], _steps: &[f64]) {
        project_groups(x, self.radius, self.group);
    }
}

fn project_groups(x: &mut [f64], radius: f64, group: usize) {
    for g in x.chunks_mut(group) {
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > radius {
            let s = radius / n;
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Conjugate prox of `1/2 |z - y|^2`: `r <- (r - sigma y) / (1 + sigma)`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticConjugate<'a> {
    pub y: &'a [f64],
}

impl Prox for QuadraticConjugate<'_> {
    fn prox(&self, r: &mut [f64], sigma: f64) {
        let d = 1.0 / (1.0 + sigma);
        for (v, y) in r.iter_mut().zip(self.y) {
            *v = (*v - sigma * y) * d;
        }
    }

    fn prox_diag(&self, r: &mut [f64], steps: &[f64]) {
        for ((v, y), s) in r.iter_mut().zip(self.y).zip(steps) {
            *v = (*v - s * y) / (1.0 + s);
        }
    }
}

/// Prox of `1/2 |x - b|^2`: `x <- (x + tau b) / (1 + tau)`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticPrimal<'a> {
    pub b: &'a [f64],
}

impl Prox for QuadraticPrimal<'_> {
    fn prox(&self, x: &mut [f64], tau: f64) {
        let d = 1.0 / (1.0 + tau);
        for (v, b) in x.iter_mut().zip(self.b) {
            *v = (*v + tau * b) * d;
        }
    }

    fn prox_diag(&self, x: &mut [f64], steps: &[f64]) {
        for ((v, b), s) in x.iter_mut().zip(self.b).zip(steps) {
            *v = (*v + s * b) / (1.0 + s);
        }
    }
}

/// Conjugate prox of `radius * sum |z_g - b_g|_2`: `proj(r - sigma b)`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedBall<'a> {
    pub shift: &'a [f64],
    pub radius: f64,
    pub group: usize,
}

impl Prox for ShiftedBall<'_> {
    fn prox(&self, r: &mut [f64], sigma: f64) {
        for (v, b) in r.iter_mut().zip(self.shift) {
            *v -= sigma * b;
        }
        project_groups(r, self.radius, self.group);
    }

    fn prox_diag(&self, r: &mut [f64], steps: &[f64]) {
        for ((v, b), s) in r.iter_mut().zip(self.shift).zip(steps) {
            *v -= s * b;
        }
        project_groups(r, self.radius, self.group);
    }
}

/// Separable sum of proxes over disjoint ranges.
pub struct BlockProx<'a> {
    blocks: Vec<(Range<usize>, &'a dyn Prox)>,
}

impl<'a> BlockProx<'a> {
    pub fn new(blocks: Vec<(Range<usize>, &'a dyn Prox)>) -> Self {
        Self { blocks }
    }
}

impl Prox for BlockProx<'_> {
    fn prox(&self, x: &mut [f64], step: f64) {
        for (range, p) in &self.blocks {
            p.prox(&mut x[range.clone()], step);
        }
    }

    fn prox_diag(&self, x: &mut [f64], steps: &[f64]) {
        for (range, p) in &self.blocks {
            p.prox_diag(&mut x[range.clone()], &steps[range.clone()]);
        }
    }
}

/// `lambda |X|_*` of the complex `rows x cols` matrix stored column-major
/// (one column per frame): singular-value soft-thresholding.
#[derive(Clone, Copy, Debug)]
pub struct NuclearNorm {
    pub lambda: f64,
    pub rows: usize,
    pub cols: usize,
}

impl NuclearNorm {
    pub fn try_prox(&self, x: &mut [f64], step: f64) -> Result<()> {
        svt(as_complex_mut(x), self.rows, self.cols, self.lambda * step).map(|_| ())
    }
}

impl Prox for NuclearNorm {
    /// Panics if the eigen-solver fails; use [`NuclearNorm::try_prox`] to
    /// handle that case.
    fn prox(&self, x: &mut [f64], step: f64) {
        self.try_prox(x, step)
            .expect("singular value thresholding failed");
    }
}

/// Singular values of a complex column-major `rows x cols` matrix, largest
/// first.
pub fn singular_values(m: &[Complex64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let (_, values) = gram_eigen(m, rows, cols)?;
    let mut s: Vec<f64> = values.iter().map(|&e| e.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// In-place singular-value soft-threshold at `t`; returns the singular
/// values before thresholding.
///
/// Works through the `cols x cols` Gram matrix, which is cheap for tall
/// Casorati matrices: with `M^H M = V S^2 V^H` the result is
/// `M V diag(max(s - t, 0) / s) V^H`.
pub fn svt(m: &mut [Complex64], rows: usize, cols: usize, t: f64) -> Result<Vec<f64>> {
    let (vecs, values) = gram_eigen(m, rows, cols)?;
    let s: Vec<f64> = values.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let shrink: Vec<f64> = s
        .iter()
        .map(|&v| if v > t { (v - t) / v } else { 0.0 })
        .collect();
    // W = V diag(shrink) V^H, then M <- M W row by row.
    let mut w = DMatrix::<Complex64>::zeros(cols, cols);
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &f) in shrink.iter().enumerate() {
                if f != 0.0 {
                    acc += vecs[(i, k)] * vecs[(j, k)].conj() * f;
                }
            }
            w[(i, j)] = acc;
        }
    }
    let mut row = vec![Complex64::new(0.0, 0.0); cols];
    for p in 0..rows {
        for (j, r) in row.iter_mut().enumerate() {
            *r = m[j * rows + p];
        }
        for j in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, r) in row.iter().enumerate() {
                acc += r * w[(i, j)];
            }
            m[j * rows + p] = acc;
        }
    }
    let mut sorted = s;
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted)
}

fn gram_eigen(m: &[Complex64], rows: usize, cols: usize) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    if m.len() != rows * cols {
        return Err(Error::Dimension(
            "matrix storage does not match its shape".into(),
        ));
    }
    let mut g = DMatrix::<Complex64>::zeros(cols, cols);
    for i in 0..cols {
        let ci = &m[i * rows..(i + 1) * rows];
        for j in i..cols {
            let cj = &m[j * rows..(j + 1) * rows];
            let v: Complex64 = ci.iter().zip(cj).map(|(a, b)| a.conj() * b).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Svd(
            "non-finite entries in the Casorati matrix".into(),
        ));
    }
    let eig = SymmetricEigen::try_new(g, 1e-14, 10_000).ok_or_else(|| {
        Error::Svd("eigen-decomposition of the Gram matrix did not converge".into())
    })?;
    Ok((eig.eigenvectors, eig.eigenvalues.iter().copied().collect()))
}

/// A saddle-point problem; missing starting points default to zero.
pub struct SaddleProblem<'a> {
    pub k: &'a dyn LinearOperator,
    pub g: &'a dyn Prox,
    pub f_star: &'a dyn Prox,
    pub x0: Option<Vec<f64>>,
    pub r0: Option<Vec<f64>>,
    /// Evaluated on every iterate when present.
    pub objective: Option<&'a dyn Fn(&[f64]) -> f64>,
}

impl<'a> SaddleProblem<'a> {
    pub fn new(k: &'a dyn LinearOperator, g: &'a dyn Prox, f_star: &'a dyn Prox) -> Self {
        Self {
            k,
            g,
            f_star,
            x0: None,
            r0: None,
            objective: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub tau: f64,
    pub sigma: f64,
    pub residuals: Vec<f64>,
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    /// Columns `iteration, primal_residual, objective`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "primal_residual", "objective"])
            .map_err(csv_err)?;
        for (i, r) in self.residuals.iter().enumerate() {
            let obj = self
                .objective
                .get(i)
                .map(|v| v.to_string())
                .unwrap_or_default();
            w.write_record([(i + 1).to_string(), r.to_string(), obj])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub trace: Trace,
}

/// Steps obeying `tau sigma |K|^2 <= 1`.
pub fn step_sizes(k: &dyn LinearOperator, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let norm = operator_norm(k, cfg.power_iters, cfg.seed)?;
    if norm == 0.0 {
        // No coupling: any step is admissible and a long one makes the
        // primal prox the exact minimiser of G.
        return Ok((cfg.tau.unwrap_or(1e8), cfg.sigma.unwrap_or(1e8)));
    }
    let l = STEP_SAFETY * norm;
    match (cfg.tau, cfg.sigma) {
        (None, None) => Ok((1.0 / l, 1.0 / l)),
        (Some(t), None) => Ok((t, 1.0 / (t * l * l))),
        (None, Some(s)) => Ok((1.0 / (s * l * l), s)),
        (Some(t), Some(s)) => {
            if t * s * norm * norm > 1.0 + 1e-12 {
                Err(Error::StepSize {
                    tau: t,
                    sigma: s,
                    norm,
                })
            } else {
                Ok((t, s))
            }
        }
    }
}

pub fn solve(p: &SaddleProblem<'_>, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let (tau, sigma) = step_sizes(p.k, cfg)?;
    solve_with_steps(p, cfg, tau, sigma)
}

/// Runs the iteration with the given steps, which the caller has checked.
pub fn solve_with_steps(
    p: &SaddleProblem<'_>,
    cfg: &SolverConfig,
    tau: f64,
    sigma: f64,
) -> Result<Solution> {
    let trace = Trace {
        tau,
        sigma,
        ..Default::default()
    };
    iterate(
        p,
        cfg,
        trace,
        &|r, kx| {
            for (ri, ki) in r.iter_mut().zip(kx) {
                *ri += sigma * ki;
            }
            p.f_star.prox(r, sigma);
        },
        &|x_new, x, ktr| {
            for ((xn, xi), gi) in x_new.iter_mut().zip(x).zip(ktr) {
                *xn = xi - tau * gi;
            }
            p.g.prox(x_new, tau);
        },
    )
}

/// Diagonal steps `tau_j = 1 / sum_i |K_ij|`, `sigma_i = 1 / sum_j |K_ij|`
/// (zero sums may take any positive value). These satisfy the convergence
/// condition by construction, so no norm estimate is needed. The trace
/// records the largest steps.
pub fn solve_preconditioned(
    p: &SaddleProblem<'_>,
    cfg: &SolverConfig,
    tau: &[f64],
    sigma: &[f64],
) -> Result<Solution> {
    cfg.validate()?;
    if tau.len() != p.k.dim_in() || sigma.len() != p.k.dim_out() {
        return Err(Error::Dimension(
            "step vectors do not match the operator".into(),
        ));
    }
    if tau
        .iter()
        .chain(sigma)
        .any(|s| !(s.is_finite() && *s > 0.0))
    {
        return Err(Error::InvalidArgument(
            "diagonal steps must be positive and finite".into(),
        ));
    }
    let top = |v: &[f64]| v.iter().fold(0.0f64, |m, &s| m.max(s));
    let trace = Trace {
        tau: top(tau),
        sigma: top(sigma),
        ..Default::default()
    };
    iterate(
        p,
        cfg,
        trace,
        &|r, kx| {
            for ((ri, ki), s) in r.iter_mut().zip(kx).zip(sigma) {
                *ri += s * ki;
            }
            p.f_star.prox_diag(r, sigma);
        },
        &|x_new, x, ktr| {
            for (((xn, xi), gi), t) in x_new.iter_mut().zip(x).zip(ktr).zip(tau) {
                *xn = xi - t * gi;
            }
            p.g.prox_diag(x_new, tau);
        },
    )
}

type DualStep<'a> = dyn Fn(&mut [f64], &[f64]) + 'a;
type PrimalStep<'a> = dyn Fn(&mut [f64], &[f64], &[f64]) + 'a;

fn iterate(
    p: &SaddleProblem<'_>,
    cfg: &SolverConfig,
    mut trace: Trace,
    dual: &DualStep<'_>,
    primal: &PrimalStep<'_>,
) -> Result<Solution> {
    let (n, m) = (p.k.dim_in(), p.k.dim_out());
    let mut x = p.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut r = p.r0.clone().unwrap_or_else(|| vec![0.0; m]);
    if x.len() != n || r.len() != m {
        return Err(Error::Dimension(
            "starting point does not match the operator".into(),
        ));
    }
    let mut x_bar = x.clone();
    let mut kx = vec![0.0; m];
    let mut ktr = vec![0.0; n];
    let mut x_new = vec![0.0; n];

    for it in 0..cfg.max_inner {
        p.k.apply(&x_bar, &mut kx);
        dual(&mut r, &kx);
        p.k.adjoint(&r, &mut ktr);
        primal(&mut x_new, &x, &ktr);
        if x_new.iter().any(|v| !v.is_finite()) || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite iterate at iteration {}",
                it + 1
            )));
        }

        let mut diff = 0.0;
        for ((xb, xn), xo) in x_bar.iter_mut().zip(&x_new).zip(&x) {
            let d = xn - xo;
            diff += d * d;
            *xb = xn + cfg.theta * d;
        }
        let rel = diff.sqrt() / norm(&x).max(REL_EPS);
        std::mem::swap(&mut x, &mut x_new);
        trace.residuals.push(rel);
        if let Some(f) = p.objective {
            trace.objective.push(f(&x));
        }
        if rel < cfg.inner_tol {
            trace.converged = true;
            break;
        }
    }
    Ok(Solution { x, r, trace })
}
