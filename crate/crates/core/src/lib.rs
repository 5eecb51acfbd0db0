//! Sparse subspace clustering when data columns are only partially observed.
//!
//! The crate covers the whole pipeline: union-of-subspaces data generation
//! with observation masks ([`uosgen`]), the two entry-wise zero-filling SSC
//! variants plus LASSO and thresholding baselines ([`cluster`]), the l1
//! solvers they rely on ([`solvers`]), executable deterministic success
//! conditions built on centro-symmetric polytope geometry ([`geomcert`]),
//! per-cluster matrix completion ([`complete`]), evaluation metrics
//! ([`metrics`]) and the experiment sweep harness ([`harness`]).
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the harness uses.

pub mod cluster;
pub mod complete;
mod error;
pub mod geomcert;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod numkit;
mod scalar;
pub mod solvers;
pub mod uosgen;

pub use error::{Error, Result};
pub use scalar::{round_half_away, Real};

pub type Mat = numkit::Matrix<f64>;
pub type Mat32 = numkit::Matrix<f32>;
pub type Model = uosgen::UosModel<f64>;
pub type Observed = uosgen::ObservedMatrix<f64>;
pub type Solution = solvers::SparseSolution<f64>;
pub type Report = geomcert::CertificateReport<f64>;
