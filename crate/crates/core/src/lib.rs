//! Monte Carlo and deterministic solvers for parabolic problems with a
//! nonlocal time derivative on `(-1, 1)` and a historical datum on `t ≤ 0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fdm;
pub mod feynman_kac;
pub mod heat_kernel;
pub mod kernel;
pub mod quad;
pub mod rng;
pub mod space_walk;
pub mod stats;
pub mod time_walk;
pub mod tridiag;

pub use error::{Error, Result};
pub use fdm::{exact_atomic_solution, solve_atomic_fd, solve_nonlocal_fd, Field, HistoryMode};
pub use feynman_kac::{DataFn, FeynmanKac, ProblemData, SpaceTimeFn};
pub use heat_kernel::StableParams;
pub use kernel::Kernel;
pub use space_walk::LatticeConfig;
pub use stats::{McEstimate, RunningStats};
pub use time_walk::{compute_weights, JumpWeights};
