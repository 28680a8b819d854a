//! Multitask basis pursuit `min ‖β‖₁,₂ s.t. Aβ = Y` and isometry pursuit.
//!
//! The program is split as `min ‖z‖₁,₂ + 1{Aβ = Y}` with the coupling
//! `β = z` and solved by scaled alternating-direction iterations:
//!
//! ```text
//! β ← Π(z − u)                         affine projection onto {Aβ = Y}
//! z ← blocksoft(β + u, 1/ρ)            row-wise shrinkage, exact zeros
//! u ← u + β − z
//! ```
//!
//! `Π(v) = v − Aᵀ(AAᵀ)⁻¹(Av − Y)` uses one Cholesky factor of `AAᵀ`, which does
//! not depend on `ρ`, so penalty adaptation costs nothing. At a fixed point
//! `ρu ∈ ∂‖z‖₁,₂` and `ν = ρ(AAᵀ)⁻¹Au` is a dual certificate.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::loss::{multitask_penalty, singular_values, DesignMatrix, RANK_TOL};
use crate::normalization::normalize_matrix;
use crate::record::{sig9, sig9_opt};
use crate::{Error, NotConverged, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Splitting penalty ρ.
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Relative support threshold τ.
    pub support_threshold: f64,
    /// Compute a duality gap for the returned point.
    pub certify: bool,
    /// Residual-balancing update of ρ (×2 / ÷2 every 10 iterations).
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_abs: 1e-7,
            eps_rel: 1e-7,
            max_iter: 50_000,
            support_threshold: 1e-6,
            certify: true,
            adaptive_rho: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rho", self.rho)?;
        positive("eps_abs", self.eps_abs)?;
        positive("eps_rel", self.eps_rel)?;
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        if !(self.support_threshold >= 0.0 && self.support_threshold.is_finite()) {
            return Err(Error::Domain(format!(
                "support threshold must be nonnegative, got {}",
                self.support_threshold
            )));
        }
        Ok(())
    }
}

/// Selected column indices, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Support(Vec<usize>);

impl Support {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSupport(format!(
                "indices must be strictly increasing: {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Every index is below `p`.
    pub fn fits(&self, p: usize) -> bool {
        self.0.last().is_none_or(|&i| i < p)
    }
}

impl TryFrom<Vec<usize>> for Support {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Support> for Vec<usize> {
    fn from(s: Support) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// `P × D` coefficient matrix.
    pub beta: DMatrix<f64>,
    /// Rows come from the shrinkage step and are exactly zero off the support.
    pub from_sparse_iterate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    #[serde(serialize_with = "sig9")]
    pub primal_residual: f64,
    #[serde(serialize_with = "sig9")]
    pub dual_residual: f64,
    #[serde(serialize_with = "sig9")]
    pub constraint_residual: f64,
    #[serde(serialize_with = "sig9")]
    pub objective: f64,
    #[serde(serialize_with = "sig9_opt")]
    pub duality_gap: Option<f64>,
    pub converged: bool,
    /// Final penalty parameter (differs from the configured one only with
    /// adaptive updates).
    #[serde(serialize_with = "sig9")]
    pub rho: f64,
    pub empty_support: bool,
}

/// Row-wise block soft-threshold of `v` with radius `kappa`.
fn block_soft_threshold(v: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let mut out = v.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm <= kappa {
            row.fill(0.0);
        } else {
            row *= 1.0 - kappa / norm;
        }
    }
    out
}

struct AffineProjector<'a> {
    a: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl<'a> AffineProjector<'a> {
    fn new(a: &'a DMatrix<f64>, y: &'a DMatrix<f64>) -> Option<Self> {
        let gram = (a * a.transpose()).cholesky()?;
        Some(Self { a, y, gram })
    }

    fn project(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let residual = self.a * v - self.y;
        v - self.a.transpose() * self.gram.solve(&residual)
    }

    /// `(AAᵀ)⁻¹ A m`.
    fn lift(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.gram.solve(&(self.a * m))
    }
}

fn check_full_row_rank(a: &DMatrix<f64>) -> Result<()> {
    let sv = singular_values(&a.transpose());
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.get(a.nrows().saturating_sub(1)).copied().unwrap_or(0.0);
    if a.nrows() > a.ncols() || !(sigma_max > 0.0 && sigma_min > RANK_TOL * sigma_max) {
        return Err(Error::RankDeficient {
            sigma_min,
            sigma_max,
        });
    }
    Ok(())
}

/// Exact feasibility restoration on the rows that survived shrinkage.
///
/// Returns `None` when the surviving columns do not span `ℝ^D`.
fn polish(a: &DMatrix<f64>, y: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let rows: Vec<usize> = z
        .row_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|&v| v != 0.0))
        .map(|(i, _)| i)
        .collect();
    if rows.len() < a.nrows() {
        return None;
    }
    let a_s = a.select_columns(&rows);
    check_full_row_rank(&a_s).ok()?;
    let z_s = z.select_rows(&rows);
    let projected = AffineProjector::new(&a_s, y)?.project(&z_s);
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for (k, &i) in rows.iter().enumerate() {
        out.set_row(i, &projected.row(k));
    }
    Some(out)
}

/// Solve `min ‖β‖₁,₂ s.t. Aβ = Y` for a `D × P` matrix `A` and `D × D` `Y`.
///
/// On `max_iter` exhaustion the best iterate is returned inside
/// [`Error::NotConverged`].
pub fn solve_mbp(
    a: &DMatrix<f64>,
    y: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<(Coefficients, SolveDiagnostics)> {
    config.validate()?;
    let (d, p) = a.shape();
    if y.nrows() != d {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, design has {d}",
            y.nrows()
        )));
    }
    if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite entries in solver input".into()));
    }
    check_full_row_rank(a)?;
    let projector = AffineProjector::new(a, y).ok_or(Error::RankDeficient {
        sigma_min: 0.0,
        sigma_max: 0.0,
    })?;

    let k = y.ncols();
    let scale = ((p * k) as f64).sqrt();
    let mut rho = config.rho;
    let mut z = DMatrix::<f64>::zeros(p, k);
    let mut u = DMatrix::<f64>::zeros(p, k);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iter {
        iterations += 1;
        let beta = projector.project(&(&z - &u));
        let z_next = block_soft_threshold(&(&beta + &u), rho.recip());
        u += &beta - &z_next;

        primal = (&beta - &z_next).norm();
        dual = rho * (&z_next - &z).norm();
        z = z_next;

        let eps_pri = scale * config.eps_abs + config.eps_rel * beta.norm().max(z.norm());
        let eps_dual = scale * config.eps_abs + config.eps_rel * rho * u.norm();
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        if config.adaptive_rho && iterations % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    let beta = polish(a, y, &z).unwrap_or(z);
    let constraint_residual = (a * &beta - y).norm();
    let coefficients = Coefficients {
        beta,
        from_sparse_iterate: true,
    };
    let objective = multitask_penalty(&coefficients.beta);
    let duality_gap = config.certify.then(|| {
        let nu = projector.lift(&(&u * rho));
        certify_optimality(a, &coefficients, &nu)
    });
    let feasibility = config.eps_abs * ((d * k) as f64).sqrt() + config.eps_rel * y.norm();
    let diagnostics = SolveDiagnostics {
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        constraint_residual,
        objective,
        duality_gap,
        converged: converged && constraint_residual <= feasibility.max(1e-12),
        rho,
        empty_support: objective == 0.0,
    };
    if !diagnostics.converged {
        return Err(Error::NotConverged(Box::new(NotConverged {
            coefficients,
            diagnostics,
        })));
    }
    Ok((coefficients, diagnostics))
}

/// Rows whose norm exceeds `tau` times the largest row norm.
pub fn extract_support(beta: &Coefficients, tau: f64) -> Support {
    let norms: Vec<f64> = beta.beta.row_iter().map(|r| r.norm()).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Support::default();
    }
    let cut = tau * max;
    Support(
        norms
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > cut)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Duality gap `‖β‖₁,₂ − ⟨ν̃, Aβ⟩` for the dual-feasible rescaling
/// `ν̃ = ν / max(1, max_p ‖(Aᵀν)_{p.}‖)`.
///
/// The right-hand side is taken as `Aβ`, so weak duality makes the result
/// nonnegative up to rounding.
pub fn certify_optimality(a: &DMatrix<f64>, beta: &Coefficients, nu: &DMatrix<f64>) -> f64 {
    let dual_rows = a.transpose() * nu;
    let worst = dual_rows.row_iter().map(|r| r.norm()).fold(1.0, f64::max);
    let rhs = a * &beta.beta;
    let lower = nu.dot(&rhs) / worst;
    multitask_penalty(&beta.beta) - lower
}

/// Isometry pursuit: basis pursuit on `w(X, c)` with right-hand side `I_D`.
pub fn isometry_pursuit(
    x: &DesignMatrix,
    c: f64,
    config: &SolverConfig,
) -> Result<(Coefficients, Support, SolveDiagnostics)> {
    let normalized = normalize_matrix(x.entries(), c)?;
    let eye = DMatrix::identity(x.dim(), x.dim());
    let (coefficients, diagnostics) = solve_mbp(&normalized.entries, &eye, config)?;
    let support = extract_support(&coefficients, config.support_threshold);
    Ok((coefficients, support, diagnostics))
}
