//! Isometry pursuit: pick `D` columns of a wide rank-`D` matrix that form a
//! submatrix as close to orthonormal as possible.
//!
//! The pipeline is
//!
//! 1. [`normalize_matrix`] rescales every column so that its length peaks at
//!    one for unit-length inputs and decays symmetrically in `log ‖x‖`;
//! 2. [`solve_mbp`] runs multitask basis pursuit (minimum `‖β‖₁,₂` subject to
//!    `Aβ = I_D`) with an alternating-direction splitting method whose
//!    proximal iterate is exactly row-sparse;
//! 3. the nonzero rows give the support `Ŝ_IP`, which
//!    [`two_stage_isometry_pursuit`] then searches exhaustively.
//!
//! [`brute_search`] and [`greedy_search`] are the combinatorial baselines,
//! scored with the spectral loss [`isometry_loss`] or the subset penalty
//! [`subset_penalty_loss`]. The [`data`], [`stats`] and [`experiment`]
//! modules hold the replicate harness used to compare the methods on the
//! bundled Iris and Wine tables.
//!
//! All column indices are 0-based.

pub mod data;
mod error;
pub mod experiment;
pub mod loss;
pub mod normalization;
pub mod record;
pub mod rng;
pub mod search;
pub mod solver;
pub mod stats;

pub use error::{Error, NotConverged, Result};
pub use loss::{
    isometry_loss, multitask_penalty, singular_values, subset_penalty_loss, DesignMatrix, RANK_TOL,
};
pub use normalization::{
    g_scalar, normalize_matrix, normalize_vector, normalized_length, NormalizedMatrix,
    ScalingConfig,
};
pub use search::{
    brute_search, greedy_search, two_stage_isometry_pursuit, Method, Objective, SelectionOutcome,
    DEFAULT_CAP,
};
pub use solver::{
    certify_optimality, extract_support, isometry_pursuit, solve_mbp, Coefficients,
    SolveDiagnostics, SolverConfig, Support,
};
