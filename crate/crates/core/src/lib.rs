//! Precision matrix estimation by penalizing an affine characteristic.
//!
//! The estimator solves
//!
//! ```text
//! Ω̂ = argmin_{Ω ≻ 0}  tr(SΩ) − log det Ω + λ |AΩB − C|₁
//! ```
//!
//! for user-chosen `A`, `B`, `C`, so that the part of Ω a downstream model
//! actually uses (for example `Ω(μ_j − μ_k)` in discriminant analysis) is
//! the part that gets shrunk toward sparsity.

pub mod error;
pub mod estimators;
pub mod io;
pub mod lda;
pub mod matrix;
pub mod simulation;
pub mod solver;
pub mod tuning;
pub mod verification;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, EigenPair, SpdMatrix, SymmetricMatrix};
pub use solver::{ProblemSpec, Solution, SolverConfig, SolverState, TauRule};
