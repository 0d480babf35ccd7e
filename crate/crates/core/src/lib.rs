//! Joint compressed-sensing reconstruction and motion estimation for
//! dynamic MRI, with zero-filling, plain CS and low-rank plus sparse
//! baselines, synthetic phantoms and image-quality metrics.

pub mod error;
pub mod flow;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod pdhg;
pub mod phantom;
pub mod recon;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    CoilMaps, DErrorMode, FlowField, ImageSequence, KSpaceData, ModelParams, SamplingMask,
    SolverConfig,
};
