//! Machine-readable run records and numeric formatting.
//!
//! Every number written by the command-line tool goes through [`round_sig9`]
//! so serialized output carries 9 significant digits.

use serde::{Deserialize, Serialize, Serializer};

use crate::solver::SolveDiagnostics;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// `v` rounded to 9 significant digits. Non-finite values pass through.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    match format!("{v:.8e}").parse::<f64>() {
        // rounding up near f64::MAX overflows
        Ok(r) if r.is_finite() => r,
        _ => v,
    }
}

/// Shortest text form of [`round_sig9`]`(v)`; exponent notation outside
/// `[1e-5, 1e16)`.
pub fn format_sig9(v: f64) -> String {
    let r = round_sig9(v);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() {
        return if r.is_nan() {
            "nan".into()
        } else if r > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = r.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn sig9<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*v))
}

pub fn sig9_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round_sig9(*v)),
        None => s.serialize_none(),
    }
}

/// Wall-clock seconds per phase; absent phases were not run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    #[serde(
        serialize_with = "sig9_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub stage1_seconds: Option<f64>,
    #[serde(
        serialize_with = "sig9_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub stage2_seconds: Option<f64>,
    #[serde(
        serialize_with = "sig9_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub greedy_seconds: Option<f64>,
    #[serde(
        serialize_with = "sig9_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub brute_seconds: Option<f64>,
}

/// Result of one `solve` or `select` invocation. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub method: String,
    pub support: Vec<usize>,
    /// Value of the method's own objective on `support`.
    #[serde(serialize_with = "sig9")]
    pub objective_value: f64,
    /// `l_c` on `support` (when `|support| = D`).
    #[serde(serialize_with = "sig9_opt", default)]
    pub isometry_loss: Option<f64>,
    /// `‖w(X_{.S}, c)^{-1}‖₁,₂` on `support` (when `|support| = D`).
    #[serde(serialize_with = "sig9_opt", default)]
    pub subset_penalty: Option<f64>,
    #[serde(default)]
    pub intermediate_support: Option<Vec<usize>>,
    #[serde(default)]
    pub intermediate_support_size: Option<usize>,
    #[serde(serialize_with = "sig9")]
    pub c: f64,
    #[serde(serialize_with = "sig9")]
    pub wall_time_seconds: f64,
    #[serde(default)]
    pub timings: PhaseTimings,
    #[serde(default)]
    pub diagnostics: Option<SolveDiagnostics>,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One header line and one value line.
    pub fn to_csv(&self) -> String {
        let join = |s: &[usize]| s.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let opt = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
        format!(
            "method,support,objective_value,isometry_loss,subset_penalty,intermediate_support_size,c,wall_time_seconds\n{},{},{},{},{},{},{},{}\n",
            self.method,
            join(&self.support),
            format_sig9(self.objective_value),
            opt(self.isometry_loss),
            opt(self.subset_penalty),
            self.intermediate_support_size.map(|n| n.to_string()).unwrap_or_default(),
            format_sig9(self.c),
            format_sig9(self.wall_time_seconds),
        )
    }
}

fn strictly_increasing(s: &[usize]) -> bool {
    s.windows(2).all(|w| w[0] < w[1])
}

/// Parse and validate a [`RunRecord`] JSON document.
pub fn parse_run_record(text: &str) -> Result<RunRecord> {
    let record: RunRecord = serde_json::from_str(text)?;
    if record.schema_version != SCHEMA_VERSION {
        return Err(Error::Domain(format!(
            "unsupported schema version {}",
            record.schema_version
        )));
    }
    if !strictly_increasing(&record.support)
        || !record
            .intermediate_support
            .as_deref()
            .is_none_or(strictly_increasing)
    {
        return Err(Error::InvalidSupport(
            "support indices must be strictly increasing".into(),
        ));
    }
    if let (Some(s), Some(n)) = (
        &record.intermediate_support,
        record.intermediate_support_size,
    ) {
        if s.len() != n {
            return Err(Error::InvalidSupport(format!(
                "intermediate support has {} entries but size {n}",
                s.len()
            )));
        }
    }
    Ok(record)
}
