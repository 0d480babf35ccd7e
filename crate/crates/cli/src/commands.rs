//! One function per subcommand.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use csm::io::{load_dataset, save_dataset, save_dataset_with_extras, Payload};
use csm::metrics::{evaluate, temporal_profile};
use csm::phantom::{acquire, generate_coilmaps, generate_phantom, PhantomSpec};
use csm::recon::gold_standard;
use csm::sampling::{make_frozen_mask, make_mask, DEFAULT_CENTER_LINES, DEFAULT_DENSITY_POWER};
use csm::{CoilMaps, ImageSequence, ModelParams, SamplingMask, SolverConfig};

use crate::args::{
    BenchArgs, Cli, Command, MaskArgs, MetricsArgs, PhantomArgs, ReconArgs, SolverArgs,
};
use crate::bench::{reconstruct, run_bench, BenchPlan, Seeds};
use crate::{CliError, Method, Result};

pub fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.out_dir)?;
    if let Command::Bench(args) = &cli.command {
        return cmd_bench(cli, args).map(|_| ());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Phantom(a) => cmd_phantom(cli, a).map(|_| ()),
        Command::Mask(a) => cmd_mask(cli, a).map(|_| ()),
        Command::Recon(a) => cmd_recon(cli, a).map(|_| ()),
        Command::Metrics(a) => cmd_metrics(cli, a).map(|_| ()),
        Command::Bench(_) => unreachable!(),
    })
}

fn phantom_spec(cli: &Cli, a: &PhantomArgs) -> PhantomSpec {
    PhantomSpec {
        kind: a.kind,
        frames: a.frames,
        height: a.size,
        width: a.size,
        motion_amplitude: a.amplitude,
        period: a.period,
        respiratory_amplitude: a.respiratory,
        seed: Seeds::from_master(cli.seed).phantom,
        ..PhantomSpec::default()
    }
}

fn spec_extras(spec: &PhantomSpec) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("phantom_kind".into(), Value::from(spec.kind.to_string()));
    m.insert("seed".into(), Value::from(spec.seed));
    m.insert(
        "motion_amplitude".into(),
        Value::from(spec.motion_amplitude),
    );
    m.insert("period".into(), Value::from(spec.period));
    m.insert(
        "respiratory_amplitude".into(),
        Value::from(spec.respiratory_amplitude),
    );
    m
}

/// Writes `phantom.csmd` and `coils.csmd`.
pub fn cmd_phantom(cli: &Cli, a: &PhantomArgs) -> Result<Vec<PathBuf>> {
    // Every downstream reconstruction of a sequence is dynamic.
    if a.frames < 2 {
        return Err(CliError::Usage(format!(
            "--frames {} must be >= 2 for a dynamic sequence",
            a.frames
        )));
    }
    let spec = phantom_spec(cli, a);
    let truth = generate_phantom(&spec)?;
    let maps = generate_coilmaps(a.coils, a.size, a.size, Seeds::from_master(cli.seed).coils)?;
    let p = cli.out_dir.join("phantom.csmd");
    let c = cli.out_dir.join("coils.csmd");
    save_dataset_with_extras(&p, &Payload::Image(truth), spec_extras(&spec))?;
    save_dataset(&c, &Payload::Coils(maps))?;
    Ok(vec![p, c])
}

/// Writes `mask.csmd`.
pub fn cmd_mask(cli: &Cli, a: &MaskArgs) -> Result<PathBuf> {
    let build = if a.frozen {
        make_frozen_mask
    } else {
        make_mask
    };
    let mask = build(
        a.frames,
        a.size,
        a.size,
        a.accel,
        a.center_lines,
        a.density_power,
        Seeds::from_master(cli.seed).mask,
    )?;
    let p = cli.out_dir.join("mask.csmd");
    save_dataset(&p, &Payload::Mask(mask))?;
    Ok(p)
}

fn load_image(path: &Path) -> Result<ImageSequence> {
    match load_dataset(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))? {
        Payload::Image(u) => Ok(u),
        other => Err(CliError::Data(format!(
            "{} holds {}, expected an image",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_coils(path: &Path) -> Result<CoilMaps> {
    match load_dataset(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))? {
        Payload::Coils(c) => Ok(c),
        other => Err(CliError::Data(format!(
            "{} holds {}, expected coil maps",
            path.display(),
            other.kind()
        ))),
    }
}

fn solver_config(s: &SolverArgs) -> SolverConfig {
    SolverConfig {
        max_inner: s.max_inner,
        inner_tol: s.inner_tol,
        ..SolverConfig::default()
    }
}

/// Summary of one `recon` run.
#[derive(Clone, Debug)]
pub struct ReconSummary {
    pub ssim: f64,
    pub slmse: f64,
    pub rmse: f64,
    pub outer_iters: usize,
    pub files: Vec<PathBuf>,
}

/// Simulates an acquisition of the given (or default) phantom at `--accel`
/// and reconstructs it. Writes `mask.csmd`, `kspace.csmd`, `gold.csmd`,
/// `recon_{method}.csmd`, `flow.csmd` (csm only) and `trace_{method}.csv`.
pub fn cmd_recon(cli: &Cli, a: &ReconArgs) -> Result<ReconSummary> {
    let seeds = Seeds::from_master(cli.seed);
    let (truth, maps) = match (&a.phantom, &a.coils) {
        (Some(p), Some(c)) => (load_image(p)?, load_coils(c)?),
        _ => {
            let spec = PhantomSpec {
                kind: a.kind,
                seed: seeds.phantom,
                ..PhantomSpec::default()
            };
            (
                generate_phantom(&spec)?,
                generate_coilmaps(4, spec.height, spec.width, seeds.coils)?,
            )
        }
    };
    if truth.height() != maps.height() || truth.width() != maps.width() {
        return Err(CliError::Data(
            "phantom and coil maps differ in size".into(),
        ));
    }
    let (f, h, w) = (truth.frames(), truth.height(), truth.width());
    let y_full = acquire(
        &truth,
        &maps,
        &SamplingMask::full(f, h, w)?,
        a.noise_sigma,
        seeds.noise,
    )?;
    let gold = gold_standard(&y_full, &maps)?;
    let mask = make_mask(
        f,
        h,
        w,
        a.accel,
        DEFAULT_CENTER_LINES,
        DEFAULT_DENSITY_POWER,
        seeds.mask,
    )?;
    let y = y_full.undersample(&mask)?;

    let gamma = a.gamma_or_default();
    let mut plan = BenchPlan::new(&cli.out_dir);
    plan.cs_gamma = gamma;
    plan.csm = ModelParams {
        gamma,
        delta: a.delta,
        beta: a.beta,
        zeta_stop: a.solver.zeta_stop,
        max_outer: a.solver.max_outer,
        ..ModelParams::default()
    };
    plan.ls_factors = (a.lambda_l, a.lambda_s);
    plan.solver = solver_config(&a.solver);
    plan.csm.validate()?;
    plan.solver.validate()?;
    let r = reconstruct(&plan, a.method, &y, &maps)?;
    let report = evaluate(&gold, &r.image)?;

    let dir = &cli.out_dir;
    let mut files = Vec::new();
    let mut save = |name: String, p: Payload| -> Result<()> {
        let path = dir.join(name);
        save_dataset(&path, &p)?;
        files.push(path);
        Ok(())
    };
    save("mask.csmd".into(), Payload::Mask(mask))?;
    save("kspace.csmd".into(), Payload::KSpace(y))?;
    save("gold.csmd".into(), Payload::Image(gold))?;
    save(
        format!("recon_{}.csmd", a.method),
        Payload::Image(r.image.clone()),
    )?;
    if let Some(v) = &r.flow {
        save("flow.csmd".into(), Payload::Flow(v.clone()))?;
    }
    if a.method != Method::ZeroFill {
        let path = dir.join(format!("trace_{}.csv", a.method));
        r.write_trace_csv(BufWriter::new(File::create(&path)?))?;
        files.push(path);
    }
    println!(
        "method={} accel={} ssim={:.4} slmse={:.4} rmse={:.4} outer_iters={} wall_time={:.2}s",
        a.method, a.accel, report.ssim, report.slmse, report.rmse, r.outer_iters, r.wall_time
    );
    Ok(ReconSummary {
        ssim: report.ssim,
        slmse: report.slmse,
        rmse: report.rmse,
        outer_iters: r.outer_iters,
        files,
    })
}

/// Writes `metrics.csv` (`ssim, slmse, rmse`) and, with a region,
/// `profile.csv` (`frame, gold, candidate`).
pub fn cmd_metrics(cli: &Cli, a: &MetricsArgs) -> Result<csm::metrics::MetricReport> {
    let gold = load_image(&a.gold)?;
    let cand = load_image(&a.candidate)?;
    let report = evaluate(&gold, &cand)?;
    let mut w = csv::Writer::from_path(cli.out_dir.join("metrics.csv"))?;
    w.write_record(["ssim", "slmse", "rmse"])?;
    w.write_record([
        report.ssim.to_string(),
        report.slmse.to_string(),
        report.rmse.to_string(),
    ])?;
    w.flush()?;
    if let Some(region) = a.region {
        let pg = temporal_profile(&gold, region)?;
        let pc = temporal_profile(&cand, region)?;
        let mut w = csv::Writer::from_path(cli.out_dir.join("profile.csv"))?;
        w.write_record(["frame", "gold", "candidate"])?;
        for (k, (g, c)) in pg.iter().zip(&pc).enumerate() {
            w.write_record([k.to_string(), g.to_string(), c.to_string()])?;
        }
        w.flush()?;
    }
    println!(
        "ssim={} slmse={} rmse={}",
        report.ssim, report.slmse, report.rmse
    );
    Ok(report)
}

pub fn bench_plan(cli: &Cli, a: &BenchArgs) -> BenchPlan {
    let mut plan = BenchPlan::new(&cli.out_dir);
    plan.phantom = PhantomSpec {
        kind: a.kind,
        frames: a.frames,
        height: a.size,
        width: a.size,
        motion_amplitude: a.amplitude,
        period: a.period,
        ..plan.phantom
    };
    plan.coils = a.coils;
    plan.noise_sigma = a.noise_sigma;
    plan.accels = a.accels.clone();
    plan.methods = a.methods.clone();
    plan.cs_gamma = a.cs_gamma;
    plan.csm = ModelParams {
        gamma: a.gamma,
        delta: a.delta,
        beta: a.beta,
        zeta_stop: a.solver.zeta_stop,
        max_outer: a.solver.max_outer,
        ..ModelParams::default()
    };
    plan.ls_factors = (a.lambda_l, a.lambda_s);
    plan.solver = solver_config(&a.solver);
    plan.seeds = Seeds::from_master(cli.seed);
    plan.phantom.seed = plan.seeds.phantom;
    plan.region = a.region;
    plan.threads = cli.threads;
    plan
}

pub fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<crate::BenchOutcome> {
    let out = run_bench(&bench_plan(cli, a))?;
    println!(
        "{:<9} {:>5} {:>8} {:>8} {:>8} {:>9}",
        "method", "accel", "ssim", "slmse", "rmse", "time[s]"
    );
    for r in &out.rows {
        if r.ok() {
            println!(
                "{:<9} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>9.1}",
                r.method, r.accel, r.ssim, r.slmse, r.rmse, r.wall_time
            );
        } else {
            println!("{:<9} {:>5} {}", r.method, r.accel, r.status);
        }
    }
    Ok(out)
}
