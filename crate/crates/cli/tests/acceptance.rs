//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! The benchmark criteria share one full run of the default plan; the
//! determinism criterion repeats it single-threaded.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csm::flow::{estimate_flow_pair, pair_objective};
use csm::metrics::{slmse, ssim};
use csm::operators::fft::Fft2;
use csm::operators::{
    Encoder, GradientOp, Identity, LinearOperator, MotionOp, Scaled, Stack, TemporalDiffOp,
};
use csm::pdhg::{self, BallProjection, QuadraticConjugate, QuadraticPrimal, SaddleProblem, L1};
use csm::phantom::PhantomKind;
use csm::recon::{reconstruct_cs, reconstruct_csm};
use csm::sampling::make_mask;
use csm::{FlowField, ModelParams, SolverConfig};
use csm_cli::bench::{prepare, read_table, reconstruct, BenchPlan};
use csm_cli::{run_bench, BenchRow, Method};
use csm_oracles::adjoint::max_pairing_error;
use csm_oracles::dft::{centered_dft2, centered_idft2};
use csm_oracles::lasso::oracle_lasso;
use csm_oracles::metrics::oracle_metrics;
use csm_oracles::rof::{oracle_rof_1d, rof_objective};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    ensure(
        elapsed <= limit,
        format!(
            "{detail}; {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn adjoint_error(op: &dyn LinearOperator, seed: u64) -> f64 {
    max_pairing_error(
        op.dim_in(),
        op.dim_out(),
        |x| op.apply_vec(x),
        |y| op.adjoint_vec(y),
        20,
        seed,
    )
}

fn operator_soundness() -> Outcome {
    let start = Instant::now();
    let (f, h, w) = (3, 16, 12);
    let maps = csm::phantom::generate_coilmaps(4, h, w, 1).map_err(|e| e.to_string())?;
    let mask = make_mask(f, h, w, 4.0, 4, 3.0, 2).map_err(|e| e.to_string())?;
    let enc = Encoder::new(&maps, &mask).map_err(|e| e.to_string())?;
    let flow =
        FlowField::new(f - 1, h, w, random(2 * (f - 1) * h * w, 3)).map_err(|e| e.to_string())?;
    let motion = MotionOp::new(f, h, w, &flow).map_err(|e| e.to_string())?;
    let grad_r = GradientOp::real(f, h, w).map_err(|e| e.to_string())?;
    let grad_c = GradientOp::complex(f, h, w).map_err(|e| e.to_string())?;
    let tdiff = TemporalDiffOp::new(f, h, w).map_err(|e| e.to_string())?;
    let frame = random(h * w, 4);
    let cframe: Vec<Complex64> = random(2 * h * w, 5)
        .chunks(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let flow_r = csm::flow::FlowOp::real(&frame, h, w).map_err(|e| e.to_string())?;
    let flow_c = csm::flow::FlowOp::complex(&cframe, h, w).map_err(|e| e.to_string())?;
    let id = Identity { n: 2 * f * h * w };
    let scaled = Scaled {
        op: &grad_c,
        factor: -2.5,
    };
    let stack = Stack::new(vec![&enc, &grad_c, &motion]).map_err(|e| e.to_string())?;
    let ops: [(&str, &dyn LinearOperator); 10] = [
        ("encoder", &enc),
        ("gradient(real)", &grad_r),
        ("gradient(complex)", &grad_c),
        ("temporal diff", &tdiff),
        ("motion", &motion),
        ("flow(real)", &flow_r),
        ("flow(complex)", &flow_c),
        ("identity", &id),
        ("scaled", &scaled),
        ("stack", &stack),
    ];
    let mut worst = (0.0f64, "");
    for (i, (name, op)) in ops.iter().enumerate() {
        let e = adjoint_error(*op, 100 + i as u64);
        if e > worst.0 {
            worst = (e, name);
        }
    }
    let x: Vec<Complex64> = random(128, 6)
        .chunks(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let fft = Fft2::new(8, 8);
    let mut fwd = x.clone();
    fft.forward(&mut fwd);
    let mut inv = x.clone();
    fft.inverse(&mut inv);
    let dist = |a: &[Complex64], b: &[Complex64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    };
    let dft_err = dist(&fwd, &centered_dft2(&x, 8, 8)).max(dist(&inv, &centered_idft2(&x, 8, 8)));
    let detail = format!(
        "worst adjoint error {:.2e} ({}) over {} operators x 20 draws; FFT vs DFT oracle {:.2e}",
        worst.0,
        worst.1,
        ops.len(),
        dft_err
    );
    if worst.0 > 1e-9 || dft_err > 1e-10 {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(10), detail)
}

/// Dense row-major matrix for the LASSO check.
struct Dense {
    a: Vec<f64>,
    m: usize,
    n: usize,
}

impl LinearOperator for Dense {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.m
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..self.m).map(|i| self.a[i * self.n + j] * y[i]).sum();
        }
    }
}

/// 1-D forward difference with a zero last entry.
struct Diff1 {
    n: usize,
}

impl LinearOperator for Diff1 {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = if i + 1 < self.n { x[i + 1] - x[i] } else { 0.0 };
        }
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let left = if i > 0 { y[i - 1] } else { 0.0 };
            let own = if i + 1 < self.n { y[i] } else { 0.0 };
            out[i] = left - own;
        }
    }
}

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let f: Vec<f64> = (0..48)
        .map(|i| match i {
            0..=11 => 0.0,
            12..=23 => 1.0,
            24..=35 => 0.3,
            _ => 0.8,
        } + 0.05 * (i as f64 * 1.7).sin())
        .collect();
    let lambda = 0.4;
    let k = Diff1 { n: f.len() };
    let g = QuadraticPrimal { b: &f };
    let fs = BallProjection {
        radius: lambda,
        group: 1,
    };
    let obj = |x: &[f64]| rof_objective(x, &f, lambda);
    let mut p = SaddleProblem::new(&k, &g, &fs);
    p.objective = Some(&obj);
    let cfg = SolverConfig {
        max_inner: 100_000,
        inner_tol: 1e-12,
        ..Default::default()
    };
    let rof = pdhg::solve(&p, &cfg).map_err(|e| e.to_string())?;
    let rof_err = sup(&rof.x, &oracle_rof_1d(&f, lambda));
    let trace = &rof.trace.objective;
    let rises = (10..trace.len().saturating_sub(1))
        .filter(|&i| trace[i + 1] > trace[i])
        .count();

    let (m, n) = (6, 4);
    let a = random(m * n, 21);
    let b = random(m, 22);
    let dense = Dense { a: a.clone(), m, n };
    let l1 = L1 {
        lambda: 0.1,
        complex: false,
    };
    let fs = QuadraticConjugate { y: &b };
    let cfg = SolverConfig {
        max_inner: 200_000,
        inner_tol: 1e-14,
        ..Default::default()
    };
    let lasso =
        pdhg::solve(&SaddleProblem::new(&dense, &l1, &fs), &cfg).map_err(|e| e.to_string())?;
    let lasso_err = sup(&lasso.x, &oracle_lasso(&a, m, n, &b, 0.1));
    let detail = format!(
        "ROF sup error {rof_err:.2e}, LASSO sup error {lasso_err:.2e}, ROF objective rises after iteration 10: {rises}"
    );
    if rof_err > 1e-4 || lasso_err > 1e-6 || rises > 0 {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(30), detail)
}

fn blob(h: usize, w: usize, cx: f64, cy: f64, s: f64) -> Vec<f64> {
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as f64, (i % w) as f64);
            (-((c - cx).powi(2) + (r - cy).powi(2)) / (2.0 * s * s)).exp()
        })
        .collect()
}

fn flow_correctness() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig {
        max_inner: 3000,
        inner_tol: 1e-7,
        ..Default::default()
    };
    let (h, w, weight) = (32, 32, 0.2);
    let a = blob(h, w, 15.0, 16.0, 3.5);
    let b = blob(h, w, 16.0, 16.0, 3.5);
    let still = estimate_flow_pair(&a, &a, h, w, weight, &cfg).map_err(|e| e.to_string())?;
    let still_max = still.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let v = estimate_flow_pair(&a, &b, h, w, weight, &cfg).map_err(|e| e.to_string())?;
    let support: Vec<usize> = (0..h * w).filter(|&i| a[i].max(b[i]) > 0.1).collect();
    let mean = |l: usize| support.iter().map(|&i| v[2 * i + l]).sum::<f64>() / support.len() as f64;
    let (ex, ey) = ((mean(0) - 1.0).abs(), mean(1).abs());
    let at_v = pair_objective(&a, &b, h, w, &v, weight).map_err(|e| e.to_string())?;
    let at_zero =
        pair_objective(&a, &b, h, w, &vec![0.0; 2 * h * w], weight).map_err(|e| e.to_string())?;
    let detail = format!(
        "identical frames |v|max {still_max:.1e}; translation error x {ex:.3} y {ey:.3} px; energy {at_v:.4} vs {at_zero:.4} at zero"
    );
    if still_max > 1e-6 || ex > 0.15 || ey > 0.15 || at_v > at_zero {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(30), detail)
}

fn reduction_identity() -> Outcome {
    let start = Instant::now();
    let mut plan = BenchPlan::new(std::env::temp_dir());
    plan.accels = vec![8.0];
    let prep = prepare(&plan).map_err(|e| e.to_string())?;
    let cfg = plan.solver;
    let y = &prep.data[0];
    let cs = reconstruct_cs(y, &prep.maps, plan.csm.gamma, &cfg).map_err(|e| e.to_string())?;
    let params = ModelParams {
        beta: 0.0,
        ..plan.csm
    };
    let csm = reconstruct_csm(y, &prep.maps, &params, &cfg).map_err(|e| e.to_string())?;
    let diff = cs
        .image
        .data()
        .iter()
        .zip(csm.image.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let detail = format!(
        "max |u_csm(beta=0) - u_cs| = {diff:.2e} (bound {:.0e})",
        2.0 * cfg.inner_tol
    );
    if diff > 2.0 * cfg.inner_tol {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(300), detail)
}

fn rows_for(rows: &[BenchRow], m: Method) -> Vec<&BenchRow> {
    let mut r: Vec<&BenchRow> = rows.iter().filter(|r| r.method == m).collect();
    r.sort_by(|a, b| a.accel.total_cmp(&b.accel));
    r
}

fn descent_and_termination(dir: &Path, plan: &BenchPlan, rows: &[BenchRow]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for r in rows_for(rows, Method::Csm) {
        let path = dir.join(format!("trace_csm_accel{}.csv", r.accel));
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let recs: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| {
                l.split(',')
                    .map(|v| v.parse().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        let obj: Vec<f64> = recs.iter().map(|r| r[1]).collect();
        let last_d = recs.last().map(|r| r[2]).unwrap_or(f64::NAN);
        let monotone = obj.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-6));
        let finite = obj
            .iter()
            .chain(recs.iter().map(|r| &r[2]))
            .all(|v| v.is_finite());
        let by_tol = last_d <= plan.csm.zeta_stop;
        let by_cap = recs.len() == plan.csm.max_outer;
        ok &= monotone && finite && (by_tol || by_cap) && r.ok();
        notes.push(format!(
            "{}x: {} iters, {}, stop by {}",
            r.accel,
            recs.len(),
            if monotone { "monotone" } else { "NOT monotone" },
            if by_tol {
                "tolerance"
            } else if by_cap {
                "max_outer"
            } else {
                "neither"
            }
        ));
    }
    ensure(ok && !notes.is_empty(), notes.join("; "))
}

const TIE: f64 = 0.002;

fn ordering(rows: &[BenchRow], elapsed: Duration) -> Outcome {
    let order = [Method::ZeroFill, Method::Cs, Method::Ls, Method::Csm];
    let mut ok = true;
    let mut notes = Vec::new();
    let accels: Vec<f64> = rows_for(rows, Method::Cs).iter().map(|r| r.accel).collect();
    for &a in &accels {
        let at: Vec<&BenchRow> = order
            .iter()
            .filter_map(|&m| rows.iter().find(|r| r.method == m && r.accel == a))
            .collect();
        if at.len() != order.len() || at.iter().any(|r| !r.ok()) {
            ok = false;
            notes.push(format!("{a}x: missing or failed cells"));
            continue;
        }
        for (metric, get) in [
            ("ssim", (|r: &BenchRow| r.ssim) as fn(&BenchRow) -> f64),
            ("slmse", |r: &BenchRow| r.slmse),
        ] {
            for p in at.windows(2) {
                if get(p[0]) > get(p[1]) + TIE {
                    ok = false;
                    notes.push(format!(
                        "{a}x {metric}: {} {:.4} > {} {:.4}",
                        p[0].method,
                        get(p[0]),
                        p[1].method,
                        get(p[1])
                    ));
                }
            }
        }
    }
    let gain = rows
        .iter()
        .find(|r| r.method == Method::Csm && r.accel == 8.0)
        .map(|r| r.ssim)
        .unwrap_or(f64::NAN)
        - rows
            .iter()
            .find(|r| r.method == Method::Cs && r.accel == 8.0)
            .map(|r| r.ssim)
            .unwrap_or(f64::NAN);
    if !(gain >= 0.01) {
        ok = false;
    }
    notes.push(format!("csm - cs ssim at 8x = {gain:.4}"));
    if ok {
        within(elapsed, Duration::from_secs(1800), notes.join("; "))
    } else {
        Err(notes.join("; "))
    }
}

fn monotone_degradation(rows: &[BenchRow]) -> Outcome {
    let mut bad = Vec::new();
    for m in Method::ALL {
        let r = rows_for(rows, m);
        for p in r.windows(2) {
            if !(p[1].ssim < p[0].ssim) || !(p[1].slmse < p[0].slmse) {
                bad.push(format!(
                    "{m} {}x->{}x: ssim {:.4}->{:.4}, slmse {:.4}->{:.4}",
                    p[0].accel, p[1].accel, p[0].ssim, p[1].ssim, p[0].slmse, p[1].slmse
                ));
            }
        }
    }
    if bad.is_empty() {
        Ok("both metrics strictly decrease with acceleration for every method".into())
    } else {
        Err(bad.join("; "))
    }
}

fn metric_fidelity() -> Outcome {
    let (h, w) = (40, 40);
    let u: Vec<f64> = random(h * w, 31).iter().map(|v| 0.5 + 0.5 * v).collect();
    let v: Vec<f64> = random(h * w, 32)
        .iter()
        .zip(&u)
        .map(|(n, x)| (x + 0.2 * n).max(0.0))
        .collect();
    let (os, ol) = oracle_metrics(&u, &v, h, w);
    let s = ssim(&u, &v, h, w).map_err(|e| e.to_string())?;
    let l = slmse(&u, &v, h, w).map_err(|e| e.to_string())?;
    let zero = vec![0.0; h * w];
    let half: Vec<f64> = u.iter().map(|x| 0.5 * x).collect();
    let ids = [
        ssim(&u, &u, h, w).map_err(|e| e.to_string())? - 1.0,
        slmse(&u, &u, h, w).map_err(|e| e.to_string())? - 1.0,
        slmse(&u, &zero, h, w).map_err(|e| e.to_string())?,
        slmse(&u, &half, h, w).map_err(|e| e.to_string())? - 0.75,
    ];
    let id_err = ids.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let detail = format!(
        "oracle gap ssim {:.1e} slmse {:.1e}; identity errors {id_err:.1e}",
        (s - os).abs(),
        (l - ol).abs()
    );
    ensure(
        (s - os).abs() <= 1e-10 && (l - ol).abs() <= 1e-10 && id_err <= 1e-12,
        detail,
    )
}

fn static_scene(plan: &BenchPlan) -> Outcome {
    let mut plan = plan.clone();
    plan.phantom.kind = PhantomKind::Static;
    plan.accels = vec![8.0];
    let prep = prepare(&plan).map_err(|e| e.to_string())?;
    let y = &prep.data[0];
    let csm = reconstruct(&plan, Method::Csm, y, &prep.maps).map_err(|e| e.to_string())?;
    let ls = reconstruct(&plan, Method::Ls, y, &prep.maps).map_err(|e| e.to_string())?;
    let vmax = csm.flow.as_ref().map(|v| v.max_abs()).unwrap_or(f64::NAN);
    let frac = ls
        .components
        .as_ref()
        .map(|c| c.sparse_energy_fraction())
        .unwrap_or(f64::NAN);
    ensure(
        vmax <= 1e-3 && frac <= 0.05,
        format!("csm |v|max {vmax:.2e}; L+S sparse energy fraction {frac:.4}"),
    )
}

/// Non-timing content of every output file of a run.
fn fingerprint(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    for name in names {
        let text = fs::read_to_string(dir.join(&name)).map_err(|e| e.to_string())?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let keep: Vec<usize> = (0..header.len())
            .filter(|&i| header[i] != "wall_time")
            .collect();
        let body: Vec<String> = std::iter::once(header.join(","))
            .chain(lines.map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                keep.iter()
                    .map(|&i| f.get(i).copied().unwrap_or(""))
                    .collect::<Vec<_>>()
                    .join(",")
            }))
            .collect();
        out.push((name, body.join("\n")));
    }
    Ok(out)
}

fn determinism(first: &Path, plan: &BenchPlan) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut again = plan.clone();
    again.out_dir = dir.path().to_path_buf();
    again.threads = 1;
    run_bench(&again).map_err(|e| e.to_string())?;
    let (a, b) = (fingerprint(first)?, fingerprint(dir.path())?);
    if a.len() != b.len() {
        return Err(format!("file sets differ: {} vs {}", a.len(), b.len()));
    }
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    ensure(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} CSV files identical apart from wall_time", a.len())
        } else {
            format!("differences in {}", differing.join(", "))
        },
    )
}

fn main() {
    // Free arguments select criteria by number or by a word of the name;
    // harness flags are ignored.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |name: &str| {
        filters.is_empty()
            || filters
                .iter()
                .any(|f| name.split(' ').any(|word| word == f.as_str()))
    };
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, check: &mut dyn FnMut() -> Outcome| {
        if !wanted(name) {
            return;
        }
        let outcome = check();
        match &outcome {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => println!("FAIL  {name}: {d}"),
        }
        results.push((name, outcome));
    };

    run("1 operator soundness", &mut operator_soundness);
    run("2 solver correctness", &mut solver_correctness);
    run("3 flow correctness", &mut flow_correctness);
    run("4 reduction identity", &mut reduction_identity);
    run("8 metric fidelity", &mut metric_fidelity);

    let dir = tempfile::tempdir().expect("temp dir");
    let plan = BenchPlan::new(dir.path());
    let bench_names = [
        "5 descent and termination",
        "6 ordering",
        "7 monotone degradation",
        "10 determinism",
    ];
    if bench_names.iter().any(|n| wanted(n)) {
        let start = Instant::now();
        let bench = run_bench(&plan).map_err(|e| e.to_string());
        let elapsed = start.elapsed();
        let rows =
            bench.and_then(|_| read_table(dir.path().join("table.csv")).map_err(|e| e.to_string()));
        match &rows {
            Ok(rows) => {
                println!("      benchmark ({:.0}s):", elapsed.as_secs_f64());
                for r in rows {
                    println!(
                        "        {:<8} {:>4}x ssim {:.4} slmse {:.4} rmse {:.4} {:>6.1}s outer {} {}",
                        r.method, r.accel, r.ssim, r.slmse, r.rmse, r.wall_time, r.outer_iters, r.status
                    );
                }
            }
            Err(e) => println!("      benchmark failed: {e}"),
        }
        let failed = |e: &String| Err(format!("benchmark failed: {e}"));
        run(bench_names[0], &mut || {
            rows.as_ref()
                .map_or_else(failed, |r| descent_and_termination(dir.path(), &plan, r))
        });
        run(bench_names[1], &mut || {
            rows.as_ref().map_or_else(failed, |r| ordering(r, elapsed))
        });
        run(bench_names[2], &mut || {
            rows.as_ref()
                .map_or_else(failed, |r| monotone_degradation(r))
        });
        run(bench_names[3], &mut || {
            rows.as_ref()
                .map_or_else(failed, |_| determinism(dir.path(), &plan))
        });
    }
    run("9 static scene", &mut || static_scene(&plan));

    let failed = results.iter().filter(|(_, o)| o.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
