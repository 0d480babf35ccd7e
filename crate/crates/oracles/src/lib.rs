//! Brute-force reference implementations for the test suites.
//!
//! Nothing here depends on `csm-core`; every routine is a literal, slow
//! transcription of the quantity it checks so that agreement with the fast
//! path is meaningful.

pub mod adjoint;
pub mod dft;
pub mod lasso;
pub mod metrics;
pub mod rof;
