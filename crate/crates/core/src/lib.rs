//! Alternating least squares for multilinear tensor formats, with the
//! instrumentation needed to study its local convergence.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod als;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod formats;
pub mod gallery;
pub mod oracle;
pub mod tensor;
pub mod verify;

pub use als::{lowdin_basis, micro_step, run, sweep, AlsState, LowdinBasis, RunTrace, StopRule};
pub use error::{AlsError, Result};
pub use formats::{evaluate, materialize_w, FormatDescriptor, ParamSystem};
pub use gallery::ProblemInstance;
pub use tensor::{DenseTensor, Shape, SpdOperator};
