//! Argument grammar. Every flag carries its default in `--help`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use csm::phantom::PhantomKind;

use crate::bench::{
    DEFAULT_ACCELS, DEFAULT_CSM_BETA, DEFAULT_CSM_DELTA, DEFAULT_CSM_GAMMA, DEFAULT_CS_GAMMA,
    DEFAULT_LS_L_FACTOR, DEFAULT_LS_S_FACTOR, DEFAULT_NOISE_SIGMA,
};
use crate::Method;

#[derive(Debug, Parser)]
#[command(
    name = "csm",
    version,
    about = "Joint CS reconstruction and motion estimation for dynamic MRI"
)]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Master seed; phantom, coil, noise and mask seeds derive from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic phantom (phantom.csmd) and coil maps (coils.csmd).
    Phantom(PhantomArgs),
    /// Write a variable-density Cartesian sampling mask (mask.csmd).
    Mask(MaskArgs),
    /// Simulate an undersampled acquisition and reconstruct it.
    Recon(ReconArgs),
    /// Compare a candidate image sequence with a gold standard.
    Metrics(MetricsArgs),
    /// Run every method at every acceleration and write the result tables.
    Bench(BenchArgs),
}

fn parse_kind(s: &str) -> Result<PhantomKind, String> {
    s.parse().map_err(|e: csm::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    /// cine, perfusion or static.
    #[arg(long, default_value = "cine", value_parser = parse_kind)]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    /// Image height and width in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Peak ventricle contraction in pixels.
    #[arg(long, default_value_t = 6.0)]
    pub amplitude: f64,
    /// Frames per cardiac cycle.
    #[arg(long, default_value_t = 24.0)]
    pub period: f64,
    /// Amplitude of the slow respiratory drift in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub respiratory: f64,
    #[arg(long, default_value_t = 4)]
    pub coils: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MaskArgs {
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 8.0)]
    pub accel: f64,
    /// Always-sampled rows around the k-space centre.
    #[arg(long, default_value_t = csm::sampling::DEFAULT_CENTER_LINES)]
    pub center_lines: usize,
    /// Exponent of the variable-density weight.
    #[arg(long, default_value_t = csm::sampling::DEFAULT_DENSITY_POWER)]
    pub density_power: f64,
    /// Repeat the first frame's pattern in every frame.
    #[arg(long)]
    pub frozen: bool,
}

/// Inner solver controls shared by `recon` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Inner primal-dual iteration cap.
    #[arg(long, default_value_t = 300)]
    pub max_inner: usize,
    /// Inner relative-change tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub inner_tol: f64,
    /// Outer (image/flow) iteration cap of csm.
    #[arg(long, default_value_t = 10)]
    pub max_outer: usize,
    /// Outer stopping tolerance of csm.
    #[arg(long, default_value_t = 1e-5)]
    pub zeta_stop: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReconArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, default_value_t = 8.0)]
    pub accel: f64,
    /// TV weight [default: 0.01 for cs, 0.015 for csm].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Flow regularity weight of csm.
    #[arg(long, default_value_t = DEFAULT_CSM_DELTA)]
    pub delta: f64,
    /// Motion coupling weight of csm.
    #[arg(long, default_value_t = DEFAULT_CSM_BETA)]
    pub beta: f64,
    /// Low-rank threshold of ls as a fraction of the zero-filled spectral norm.
    #[arg(long, default_value_t = DEFAULT_LS_L_FACTOR)]
    pub lambda_l: f64,
    /// Sparse threshold of ls as a fraction of the zero-filled peak magnitude.
    #[arg(long, default_value_t = DEFAULT_LS_S_FACTOR)]
    pub lambda_s: f64,
    /// Standard deviation of the complex k-space noise.
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    pub noise_sigma: f64,
    /// Ground-truth sequence; generated from the default phantom when absent.
    #[arg(long, requires = "coils")]
    pub phantom: Option<PathBuf>,
    /// Coil maps matching --phantom.
    #[arg(long, requires = "phantom")]
    pub coils: Option<PathBuf>,
    /// Phantom kind used when --phantom is absent.
    #[arg(long, default_value = "cine", value_parser = parse_kind)]
    pub kind: PhantomKind,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl ReconArgs {
    pub fn gamma_or_default(&self) -> f64 {
        self.gamma.unwrap_or(match self.method {
            Method::Csm => DEFAULT_CSM_GAMMA,
            _ => DEFAULT_CS_GAMMA,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    /// Region `top,left,height,width` for a temporal profile (profile.csv).
    #[arg(long, value_parser = parse_region)]
    pub region: Option<csm::metrics::Region>,
}

pub fn parse_region(s: &str) -> Result<csm::metrics::Region, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad region '{s}': {e}"))
        })
        .collect::<Result<_, _>>()?;
    match v[..] {
        [top, left, height, width] => Ok(csm::metrics::Region {
            top,
            left,
            height,
            width,
        }),
        _ => Err(format!(
            "region '{s}' needs four values top,left,height,width"
        )),
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ACCELS)]
    pub accels: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Method::ALL)]
    pub methods: Vec<Method>,
    #[arg(long, default_value = "cine", value_parser = parse_kind)]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 4)]
    pub coils: usize,
    /// Peak ventricle contraction in pixels.
    #[arg(long, default_value_t = 6.0)]
    pub amplitude: f64,
    /// Frames per cardiac cycle.
    #[arg(long, default_value_t = 24.0)]
    pub period: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    pub noise_sigma: f64,
    /// TV weight of cs.
    #[arg(long, default_value_t = DEFAULT_CS_GAMMA)]
    pub cs_gamma: f64,
    /// TV weight of csm.
    #[arg(long, default_value_t = DEFAULT_CSM_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_CSM_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_CSM_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_LS_L_FACTOR)]
    pub lambda_l: f64,
    #[arg(long, default_value_t = DEFAULT_LS_S_FACTOR)]
    pub lambda_s: f64,
    /// Temporal-profile region `top,left,height,width` [default: a box on the ventricle wall].
    #[arg(long, value_parser = parse_region)]
    pub region: Option<csm::metrics::Region>,
    #[command(flatten)]
    pub solver: SolverArgs,
}
