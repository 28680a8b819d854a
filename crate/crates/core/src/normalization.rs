//! Symmetric column normalization.
//!
//! A column `v` is rescaled to length `2e / (e^{‖v‖^c} + e^{‖v‖^{-c}})`. The
//! map keeps direction, sends unit vectors to unit vectors, shrinks every
//! other vector, and gives `v` and `v / ‖v‖²` the same normalized length.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// `t^c` above which the closed form is evaluated in log space.
const EXP_GUARD: f64 = 700.0;

/// Width parameter `c` of the normalization basin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig {
    c: f64,
}

impl ScalingConfig {
    pub fn new(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "scaling exponent c must be positive, got {c}"
        )))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("length must be positive, got {t}")))
    }
}

/// `(a, b) = (t^c, t^{-c})`, computed so that `t` and `1/t` swap them.
fn exponents(t: f64, c: f64) -> (f64, f64) {
    let a = t.powf(c);
    (a, a.recip())
}

/// `ln(e^a + e^b) - 1 - ln 2`, stable for large arguments.
fn log_g(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p() - 1.0 - std::f64::consts::LN_2
}

/// `g(t, c) = (e^{t^c} + e^{t^{-c}}) / 2e`.
///
/// Minimum value 1 at `t = 1`, symmetric under `t ↦ 1/t`. Returns `+∞` once
/// the value exceeds the `f64` range.
pub fn g_scalar(t: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    check_c(c)?;
    let (a, b) = exponents(t, c);
    if a.max(b) <= EXP_GUARD {
        Ok((a.exp() + b.exp()) / (2.0 * std::f64::consts::E))
    } else {
        Ok(log_g(a, b).exp())
    }
}

/// Length of a normalized vector whose source length is `t`: `1 / g(t, c)`.
///
/// Lies in `(0, 1]`, underflowing towards zero for extreme `t`.
pub fn normalized_length(t: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    check_c(c)?;
    let (a, b) = exponents(t, c);
    if a.max(b) <= EXP_GUARD {
        Ok(2.0 * std::f64::consts::E / (a.exp() + b.exp()))
    } else {
        Ok((-log_g(a, b)).exp())
    }
}

/// Rescale `v` to length [`normalized_length`]`(‖v‖, c)`.
///
/// A zero vector is reported as `ZeroColumn { index: 0 }`; [`normalize_matrix`]
/// fills in the real column index.
pub fn normalize_vector(v: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroColumn { index: 0 });
    }
    let scale = normalized_length(norm, c)? / norm;
    Ok(v * scale)
}

/// Column-wise normalized design matrix together with the original norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub entries: DMatrix<f64>,
    pub source_norms: Vec<f64>,
}

/// Apply [`normalize_vector`] to every column of `x`.
pub fn normalize_matrix(x: &DMatrix<f64>, c: f64) -> Result<NormalizedMatrix> {
    check_c(c)?;
    let mut entries = x.clone();
    let mut source_norms = Vec::with_capacity(x.ncols());
    for (index, mut col) in entries.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn { index });
        }
        col *= normalized_length(norm, c)? / norm;
        source_norms.push(norm);
    }
    Ok(NormalizedMatrix {
        entries,
        source_norms,
    })
}
