//! Coarse-to-fine low-rank tensor completion.
//!
//! Dense column-major tensors ([`DenseTensor`]), two completion solvers
//! ([`solvers`]), patch geometry ([`patch`]), the coarse-to-fine driver
//! ([`c2f`]), quality metrics ([`metrics`]), file I/O ([`io`]) and the batch
//! experiment runner ([`experiment`]). Modes are numbered from zero.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod c2f;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod patch;
pub mod solvers;
pub mod tensor;

pub use c2f::{run_c2f, run_shortcut, C2FPlan, C2FResult, StageRecord};
pub use error::{Error, Result};
pub use faer::{Mat, MatRef};
pub use solvers::{CompletionResult, CompletionSolver, SolverConfig, SolverKind};
pub use tensor::{DenseTensor, FactorSet, ObservationMask};
