//! Matrix-factorization mechanisms for differentially private SGD under
//! learning-rate schedules.
//!
//! The crate builds the workload `A_chi = A_1 * diag(chi)` for a learning-rate
//! schedule, factorizes it as `B * C` with one of several strategies, and
//! evaluates sensitivity, MaxSE/MeanSE and multi-participation error together
//! with computable lower bounds. [`noise_engine`] streams the correlated noise
//! `C^{-1} Z` and runs a small DP-SGD simulator on synthetic objectives.
//!
//! Indexing: formulas in the docs are 1-based (`chi_1 .. chi_n`), storage is
//! 0-based everywhere (`values[0] == chi_1`).
//!
//! With the default `parallel` feature, the dense kernels, pattern
//! enumeration and Monte Carlo loops run on rayon. Every parallel loop writes
//! disjoint outputs computed in a fixed sequential order, so results are
//! bit-identical to the sequential build for any thread count.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod closed_forms;
mod error;
pub mod factorizations;
pub mod metrics;
pub mod noise_engine;
pub(crate) mod par;
pub mod schedules;
pub mod tri_matrix;
pub mod workload;

pub use error::{Error, Result};
pub use factorizations::{factorize, BisrBase, Factorization, Strategy};
pub use metrics::{ErrorReport, ParticipationSchema, SensitivityMode};
pub use schedules::{make_schedule, Schedule, ScheduleKind};
pub use tri_matrix::{LowerTriangular, ToeplitzLT};
pub use workload::{build_workload, Workload};

/// Whether this build runs its data-parallel loops on rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
