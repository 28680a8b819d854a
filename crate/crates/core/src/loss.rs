//! Spectral isometry loss and the multitask basis pursuit penalty.

use nalgebra::{DMatrix, DVector};

use crate::normalization::{g_scalar, normalized_length};
use crate::{Error, Result};

/// Relative rank tolerance: `σ < RANK_TOL · σ_max` counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Wide `D × P` matrix of candidate columns with full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (d, p) = entries.shape();
        if d == 0 || p == 0 {
            return Err(Error::Dimension(format!("design matrix is {d}x{p}")));
        }
        if d > p {
            return Err(Error::Dimension(format!(
                "design matrix needs at least as many columns as rows, got {d}x{p}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design matrix has non-finite entries".into()));
        }
        let sv = singular_values(&entries);
        let (sigma_max, sigma_min) = (sv[0], sv[d - 1]);
        if !(sigma_max > 0.0 && sigma_min > RANK_TOL * sigma_max) {
            return Err(Error::RankDeficient {
                sigma_min,
                sigma_max,
            });
        }
        Ok(Self { entries })
    }

    /// Number of rows `D`.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of candidate columns `P`.
    pub fn candidates(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// `X_{.S}` for the given column indices.
    pub fn columns(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.candidates()) {
            return Err(Error::InvalidSupport(format!(
                "column {bad} out of range for P = {}",
                self.candidates()
            )));
        }
        Ok(self.entries.select_columns(indices))
    }
}

/// Singular values of `m` in nonincreasing order, zero-padded to `m.ncols()`.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.ncols();
    if m.is_empty() {
        return vec![0.0; k];
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.resize(k, 0.0);
    sv
}

/// True when the spectrum has a value below [`RANK_TOL`] relative to its max.
fn has_null_direction(sv: &[f64]) -> bool {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) => !(hi > 0.0 && lo >= RANK_TOL * hi),
        _ => true,
    }
}

/// `l_c(M) = Σ_k g(σ_k(M), c)` over all `k` columns of the `D × k` matrix `M`.
///
/// Returns `+∞` when `M` has a zero singular value (including `k > D`).
pub fn isometry_loss(m: &DMatrix<f64>, c: f64) -> f64 {
    let sv = singular_values(m);
    if has_null_direction(&sv) {
        return f64::INFINITY;
    }
    sv.iter()
        .map(|&s| g_scalar(s, c).unwrap_or(f64::INFINITY))
        .sum()
}

/// `‖β‖₁,₂`: the sum of the Euclidean norms of the rows of `β`.
pub fn multitask_penalty(beta: &DMatrix<f64>) -> f64 {
    beta.row_iter().map(|r| r.norm()).sum()
}

/// `‖w(M, c)^+‖₁,₂` for a `D × k` matrix `M` (`k ≤ D`).
///
/// For square `M` this is the penalty of the unique solution of
/// `w(M, c) β = I_D`. Zero columns and rank deficiency give `+∞`.
pub fn penalty_of_columns(m: &DMatrix<f64>, c: f64) -> f64 {
    let mut w = m.clone();
    for mut col in w.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return f64::INFINITY;
        }
        match normalized_length(norm, c) {
            Ok(len) if len > 0.0 => col *= len / norm,
            _ => return f64::INFINITY,
        }
    }
    let svd = w.svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let hi = sv.iter().copied().fold(0.0, f64::max);
    if sv.len() < m.ncols() || hi <= 0.0 || sv.iter().any(|&s| s < RANK_TOL * hi) {
        return f64::INFINITY;
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return f64::INFINITY;
    };
    let inv_sigma = DMatrix::from_diagonal(&DVector::from_iterator(
        sv.len(),
        sv.iter().map(|s| s.recip()),
    ));
    let pinv = v_t.transpose() * inv_sigma * u.transpose();
    multitask_penalty(&pinv)
}

/// `‖(w(X, c)_{.S})^{-1}‖₁,₂` for a size-`D` subset `S`.
pub fn subset_penalty_loss(x: &DesignMatrix, support: &[usize], c: f64) -> Result<f64> {
    if support.len() != x.dim() {
        return Err(Error::InvalidSupport(format!(
            "subset has {} columns, expected D = {}",
            support.len(),
            x.dim()
        )));
    }
    Ok(penalty_of_columns(&x.columns(support)?, c))
}
