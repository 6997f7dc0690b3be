//! Compressed sensing with Kronecker-structured dictionaries.
//!
//! Signals `x = vec(X)` with `X` of shape `N2 × N1` are observed through
//! `y = (H1 ⊗ H2)x + n`. The crate provides sparse-signal generators for three
//! block-sparsity models, SMV/MMV solvers (SBL, OMP, HTP, HiHTP), the two-stage
//! recovery that never forms `H1 ⊗ H2`, and exact restricted-isometry analysis
//! for small dictionaries.

pub mod error;
pub mod linalg;
pub mod models;
pub mod rip;
pub mod solvers;
pub mod two_stage;

pub use error::{Error, Result};
pub use linalg::{kron, kron_matvec, BlockLayout, Matrix, Vector};
pub use models::{KronDims, SparseInstance, Sparsity, SparsityModel, Support, TrialRng};
pub use solvers::{MmvResult, NoiseMode, SmvResult, SolverConfig, StepRule};
pub use two_stage::{tsr, StageSolver, TsrConfig, TsrResult};
