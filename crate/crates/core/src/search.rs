//! Combinatorial subset selection: brute force, greedy, and the two-stage
//! estimator that brute-forces only the isometry pursuit support.

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loss::{isometry_loss, penalty_of_columns, DesignMatrix};
use crate::solver::{isometry_pursuit, SolveDiagnostics, SolverConfig, Support};
use crate::{Error, Result};

/// Default limit on the number of subsets [`brute_search`] may enumerate.
pub const DEFAULT_CAP: u64 = 2_000_000;

/// Subsets scored per parallel batch.
const BATCH: usize = 4096;

/// Score assigned to a `D × k` column submatrix; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `l_c(X_{.S})`.
    IsometryLoss { c: f64 },
    /// `‖w(X_{.S}, c)^+‖₁,₂`.
    SubsetPenalty { c: f64 },
}

impl Objective {
    pub fn c(&self) -> f64 {
        match *self {
            Self::IsometryLoss { c } | Self::SubsetPenalty { c } => c,
        }
    }

    /// `+∞` for rank-deficient submatrices; NaN is mapped to `+∞` as well.
    pub fn evaluate(&self, m: &DMatrix<f64>) -> f64 {
        let v = match *self {
            Self::IsometryLoss { c } => isometry_loss(m, c),
            Self::SubsetPenalty { c } => penalty_of_columns(m, c),
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn validate(&self) -> Result<()> {
        let c = self.c();
        if c > 0.0 && c.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "objective exponent c must be positive, got {c}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Brute,
    Greedy,
    TwoStage,
    IsometryPursuitOnly,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Brute => "brute",
            Self::Greedy => "greedy",
            Self::TwoStage => "two-stage",
            Self::IsometryPursuitOnly => "isometry-pursuit-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub support: Support,
    pub objective_value: f64,
    pub method: Method,
    pub evaluations: u64,
    /// `Ŝ_IP` for two-stage runs.
    pub intermediate_support: Option<Support>,
    pub diagnostics: Option<SolveDiagnostics>,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exhaustive search over all size-`D` column subsets of `x`.
///
/// Ties resolve to the lexicographically smallest subset.
pub fn brute_search(x: &DesignMatrix, f: Objective, cap: u64) -> Result<SelectionOutcome> {
    brute_search_columns(x.entries(), f, cap)
}

/// [`brute_search`] on a raw `D × P` matrix, with no rank precondition.
pub fn brute_search_columns(x: &DMatrix<f64>, f: Objective, cap: u64) -> Result<SelectionOutcome> {
    f.validate()?;
    let (d, p) = x.shape();
    if d == 0 || d > p {
        return Err(Error::Dimension(format!("cannot pick {d} of {p} columns")));
    }
    let count = binomial(p, d);
    if count > cap as u128 {
        return Err(Error::CombinatorialBlowup { p, d, count, cap });
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for batch in &(0..p).combinations(d).chunks(BATCH) {
        let subsets: Vec<Vec<usize>> = batch.collect();
        let scores: Vec<f64> = subsets
            .par_iter()
            .map(|s| f.evaluate(&x.select_columns(s)))
            .collect();
        for (score, subset) in scores.into_iter().zip(subsets) {
            if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, subset));
            }
        }
    }

    let (objective_value, subset) = best.ok_or(Error::AllInfeasible)?;
    Ok(SelectionOutcome {
        support: Support::new(subset)?,
        objective_value,
        method: Method::Brute,
        evaluations: count as u64,
        intermediate_support: None,
        diagnostics: None,
    })
}

/// Forward selection: add the column that minimizes `f` on the partial set.
///
/// Rank-deficient candidates are skipped; ties go to the smallest index.
pub fn greedy_search(x: &DesignMatrix, f: Objective) -> Result<SelectionOutcome> {
    greedy_search_columns(x.entries(), f)
}

/// [`greedy_search`] on a raw `D × P` matrix.
pub fn greedy_search_columns(x: &DMatrix<f64>, f: Objective) -> Result<SelectionOutcome> {
    f.validate()?;
    let (d, p) = x.shape();
    if d == 0 || d > p {
        return Err(Error::Dimension(format!("cannot pick {d} of {p} columns")));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(d);
    let mut value = f64::INFINITY;
    let mut evaluations = 0u64;
    while selected.len() < d {
        let mut step_best: Option<(f64, usize)> = None;
        for candidate in (0..p).filter(|i| !selected.contains(i)) {
            let mut trial = selected.clone();
            trial.push(candidate);
            trial.sort_unstable();
            let score = f.evaluate(&x.select_columns(&trial));
            evaluations += 1;
            if score.is_finite() && step_best.is_none_or(|(b, _)| score < b) {
                step_best = Some((score, candidate));
            }
        }
        let Some((score, chosen)) = step_best else {
            return Err(Error::Stuck {
                selected: selected.len(),
                target: d,
            });
        };
        selected.push(chosen);
        value = score;
    }
    Ok(SelectionOutcome {
        support: Support::from_unsorted(selected),
        objective_value: value,
        method: Method::Greedy,
        evaluations,
        intermediate_support: None,
        diagnostics: None,
    })
}

/// Isometry pursuit alone, reported as a selection whose value is the basis
/// pursuit objective. The support may be larger than `D`.
pub fn pursuit_selection(
    x: &DesignMatrix,
    c: f64,
    config: &SolverConfig,
) -> Result<SelectionOutcome> {
    let (_, support, diagnostics) = isometry_pursuit(x, c, config)?;
    Ok(SelectionOutcome {
        support,
        objective_value: diagnostics.objective,
        method: Method::IsometryPursuitOnly,
        evaluations: 0,
        intermediate_support: None,
        diagnostics: Some(diagnostics),
    })
}

/// Isometry pursuit to prune, then brute search over the surviving columns.
pub fn two_stage_isometry_pursuit(
    x: &DesignMatrix,
    c: f64,
    solver: &SolverConfig,
    second_stage: Objective,
    cap: u64,
) -> Result<SelectionOutcome> {
    let (_, pruned, diagnostics) = isometry_pursuit(x, c, solver)?;
    if pruned.len() < x.dim() {
        return Err(Error::SupportTooSmall {
            found: pruned.len(),
            needed: x.dim(),
        });
    }
    let restricted = x.columns(pruned.indices())?;
    let inner = brute_search_columns(&restricted, second_stage, cap)?;
    let mapped = inner
        .support
        .indices()
        .iter()
        .map(|&k| pruned.indices()[k])
        .collect();
    Ok(SelectionOutcome {
        support: Support::new(mapped)?,
        objective_value: inner.objective_value,
        method: Method::TwoStage,
        evaluations: inner.evaluations,
        intermediate_support: Some(pruned),
        diagnostics: Some(diagnostics),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    const G_2: f64 = 1.662_406_244_085_839_3;

    fn small() -> DesignMatrix {
        DesignMatrix::new(dmatrix![1.0, 0.0, 2.0; 0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(20, 6), 38_760);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(1000, 500), u128::MAX);
    }

    #[test]
    fn brute_small_example() {
        // the three subsets score 2, +inf, and g(2) + 1
        let f = Objective::IsometryLoss { c: 1.0 };
        let m = small();
        assert!((f.evaluate(&m.columns(&[1, 2]).unwrap()) - (G_2 + 1.0)).abs() < 1e-12);
        assert!(f.evaluate(&m.columns(&[0, 2]).unwrap()).is_infinite());
        let out = brute_search(&m, f, DEFAULT_CAP).unwrap();
        assert_eq!(out.support.indices(), &[0, 1]);
        assert!((out.objective_value - 2.0).abs() < 1e-12);
        assert_eq!(out.evaluations, 3);
        assert_eq!(out.method, Method::Brute);
    }

    #[test]
    fn identity_selections() {
        let x = DesignMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let f = Objective::IsometryLoss { c: 1.0 };
        let b = brute_search(&x, f, 10).unwrap();
        let g = greedy_search(&x, f).unwrap();
        assert_eq!(b.support.indices(), &[0, 1, 2]);
        assert_eq!(g.support.indices(), &[0, 1, 2]);
        assert!((b.objective_value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn blowup_is_reported() {
        let x = DesignMatrix::new(DMatrix::from_fn(6, 20, |i, j| {
            if j % 6 == i {
                1.0 + j as f64
            } else {
                0.0
            }
        }))
        .unwrap();
        let err = brute_search(&x, Objective::IsometryLoss { c: 1.0 }, 1000).unwrap_err();
        assert!(matches!(
            err,
            Error::CombinatorialBlowup { count: 38_760, .. }
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        // every pair of distinct axes is orthonormal
        let x = DesignMatrix::new(dmatrix![1.0, 0.0, -1.0; 0.0, 1.0, 0.0]).unwrap();
        let f = Objective::IsometryLoss { c: 1.0 };
        assert_eq!(brute_search(&x, f, 10).unwrap().support.indices(), &[0, 1]);
        let x = DesignMatrix::new(dmatrix![0.0, 1.0, 1.0; 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(greedy_search(&x, f).unwrap().support.indices(), &[0, 1]);
    }

    #[test]
    fn greedy_small_example() {
        let out = greedy_search(&small(), Objective::IsometryLoss { c: 1.0 }).unwrap();
        assert_eq!(out.support.indices(), &[0, 1]);
        assert!((out.objective_value - 2.0).abs() < 1e-12);
        // 3 candidates in step one, 2 in step two
        assert_eq!(out.evaluations, 5);
    }

    #[test]
    fn greedy_stuck_on_raw_rank_one() {
        let x = dmatrix![1.0, 2.0, -3.0; 0.0, 0.0, 0.0];
        let err = greedy_search_columns(&x, Objective::IsometryLoss { c: 1.0 }).unwrap_err();
        assert!(matches!(
            err,
            Error::Stuck {
                selected: 1,
                target: 2
            }
        ));
        let err = brute_search_columns(&x, Objective::IsometryLoss { c: 1.0 }, 10).unwrap_err();
        assert!(matches!(err, Error::AllInfeasible));
    }

    #[test]
    fn brute_never_worse_than_greedy() {
        let x = DesignMatrix::new(dmatrix![
            0.72, 1.0, 0.0;
            0.72, 0.0, 1.0
        ])
        .unwrap();
        let f = Objective::IsometryLoss { c: 1.0 };
        let b = brute_search(&x, f, 10).unwrap();
        let g = greedy_search(&x, f).unwrap();
        assert!(b.objective_value <= g.objective_value);
        assert_eq!(b.support.indices(), &[1, 2]);
    }

    #[test]
    fn two_stage_examples() {
        let cfg = SolverConfig::default();
        let f = Objective::IsometryLoss { c: 1.0 };
        let out = two_stage_isometry_pursuit(&small(), 1.0, &cfg, f, DEFAULT_CAP).unwrap();
        assert_eq!(
            out.intermediate_support.as_ref().unwrap().indices(),
            &[0, 1]
        );
        assert_eq!(out.support.indices(), &[0, 1]);
        assert!((out.objective_value - 2.0).abs() < 1e-12);
        assert_eq!(out.method, Method::TwoStage);

        let eye = DesignMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let out = two_stage_isometry_pursuit(&eye, 1.0, &cfg, f, DEFAULT_CAP).unwrap();
        assert_eq!(out.support.indices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn two_stage_maps_indices_back() {
        // planted orthonormal pair at columns 2 and 4 among long distractors
        let x = DesignMatrix::new(dmatrix![
            3.0, 0.1, 0.6, 2.5, 0.8;
            0.2, 4.0, 0.8, 2.5, -0.6
        ])
        .unwrap();
        let f = Objective::IsometryLoss { c: 1.0 };
        let out =
            two_stage_isometry_pursuit(&x, 1.0, &SolverConfig::default(), f, DEFAULT_CAP).unwrap();
        assert_eq!(out.support.indices(), &[2, 4]);
        assert!(out.intermediate_support.unwrap().contains(2));
    }

    #[test]
    fn pursuit_only_outcome() {
        let out = pursuit_selection(&small(), 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(out.method, Method::IsometryPursuitOnly);
        assert_eq!(out.support.indices(), &[0, 1]);
        assert!((out.objective_value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn objective_rejects_bad_exponent() {
        let err = greedy_search(&small(), Objective::SubsetPenalty { c: 0.0 }).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
