//! Replicate harness comparing greedy search with two-stage isometry pursuit.
//!
//! Each replicate is prepared independently (standardize the full table,
//! downsample columns with a seed derived from the master seed, truncate
//! rows), then scored by `l_c` on the greedy and two-stage supports.
//! Replicates run in parallel but results are always reported in replicate
//! order, so the per-replicate CSV is byte-identical for a given master seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_fixture, load_matrix_csv, prepare_replicate, Fixture, Orientation, RawTable, ReplicateSpec,
};
use crate::loss::{isometry_loss, DesignMatrix};
use crate::record::{format_sig9, sig9, SCHEMA_VERSION};
use crate::rng::derive_seed;
use crate::search::{brute_search, greedy_search, two_stage_isometry_pursuit, Objective};
use crate::solver::SolverConfig;
use crate::stats::{ExperimentReport, MeanSd, PairedLosses, EQ_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSource {
    Fixture(Fixture),
    /// One `D × P` CSV per replicate, taken in file-name order.
    Directory {
        path: PathBuf,
        orientation: Orientation,
        has_header: bool,
    },
}

impl ExperimentSource {
    pub fn label(&self) -> String {
        match self {
            Self::Fixture(f) => f.name().to_owned(),
            Self::Directory { path, .. } => path.display().to_string(),
        }
    }
}

/// Second-stage objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    #[default]
    Isometry,
    Penalty,
}

impl ObjectiveKind {
    pub fn with_c(self, c: f64) -> Objective {
        match self {
            Self::Isometry => Objective::IsometryLoss { c },
            Self::Penalty => Objective::SubsetPenalty { c },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub replicates: usize,
    pub master_seed: u64,
    pub c: f64,
    pub downsample_factor: f64,
    pub standardize: bool,
    pub truncate_rows: Option<usize>,
    pub solver: SolverConfig,
    pub cap: u64,
    pub second_stage: ObjectiveKind,
    pub eq_tol: f64,
}

impl ExperimentConfig {
    /// Bundled-table defaults: 25 replicates, factor-2 downsampling, standardized rows.
    pub fn for_fixture(fixture: Fixture) -> Self {
        Self {
            replicates: 25,
            master_seed: 0,
            c: 1.0,
            downsample_factor: 2.0,
            standardize: true,
            truncate_rows: fixture.default_truncation(),
            solver: SolverConfig::default(),
            cap: crate::search::DEFAULT_CAP,
            second_stage: ObjectiveKind::Isometry,
            eq_tol: EQ_TOL,
        }
    }

    /// Defaults for a directory of precomputed matrices: used as given.
    pub fn for_directory() -> Self {
        Self {
            replicates: 100,
            downsample_factor: 1.0,
            standardize: false,
            truncate_rows: None,
            ..Self::for_fixture(Fixture::Iris)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub greedy_loss: f64,
    pub two_stage_loss: f64,
    pub support_ip_size: usize,
    pub greedy_support: Vec<usize>,
    pub two_stage_support: Vec<usize>,
    pub stage1_seconds: f64,
    pub stage2_seconds: f64,
    pub greedy_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTimings {
    #[serde(serialize_with = "sig9")]
    pub stage1_seconds: f64,
    #[serde(serialize_with = "sig9")]
    pub stage2_seconds: f64,
    #[serde(serialize_with = "sig9")]
    pub greedy_seconds: f64,
}

/// Summary JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub dataset: String,
    pub master_seed: u64,
    #[serde(serialize_with = "sig9")]
    pub c: f64,
    #[serde(serialize_with = "sig9")]
    pub downsample_factor: f64,
    pub standardize: bool,
    pub truncate_rows: Option<usize>,
    pub dimension: usize,
    pub candidates: usize,
    pub second_stage: ObjectiveKind,
    pub report: ExperimentReport,
    pub mean_timings: MeanTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub replicates: Vec<ReplicateResult>,
    pub summary: ExperimentSummary,
}

enum Inputs {
    Shared(RawTable),
    PerReplicate(Vec<RawTable>),
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_inputs(source: &ExperimentSource, replicates: usize) -> Result<Inputs> {
    match source {
        ExperimentSource::Fixture(f) => Ok(Inputs::Shared(load_fixture(*f)?)),
        ExperimentSource::Directory {
            path,
            orientation,
            has_header,
        } => {
            let files = csv_files(path)?;
            if files.len() < replicates {
                return Err(Error::Dimension(format!(
                    "{} holds {} matrices, {replicates} replicates requested",
                    path.display(),
                    files.len()
                )));
            }
            files[..replicates]
                .iter()
                .enumerate()
                .map(|(index, f)| {
                    load_matrix_csv(f, *orientation, *has_header).map_err(|e| Error::Replicate {
                        index,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Inputs::PerReplicate)
        }
    }
}

/// Greedy and two-stage selection on one prepared matrix. `index` and `seed`
/// of the result are left at zero.
pub fn run_replicate(x: &DesignMatrix, cfg: &ExperimentConfig) -> Result<ReplicateResult> {
    let objective = Objective::IsometryLoss { c: cfg.c };

    let start = Instant::now();
    let greedy = greedy_search(x, objective)?;
    let greedy_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (_, pruned, _) = crate::solver::isometry_pursuit(x, cfg.c, &cfg.solver)?;
    let stage1_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let two_stage = two_stage_from_support(x, &pruned, cfg)?;
    let stage2_seconds = start.elapsed().as_secs_f64();

    let greedy_loss = isometry_loss(&x.columns(greedy.support.indices())?, cfg.c);
    let two_stage_loss = isometry_loss(&x.columns(&two_stage)?, cfg.c);
    Ok(ReplicateResult {
        index: 0,
        seed: 0,
        greedy_loss,
        two_stage_loss,
        support_ip_size: pruned.len(),
        greedy_support: greedy.support.indices().to_vec(),
        two_stage_support: two_stage,
        stage1_seconds,
        stage2_seconds,
        greedy_seconds,
    })
}

fn two_stage_from_support(
    x: &DesignMatrix,
    pruned: &crate::solver::Support,
    cfg: &ExperimentConfig,
) -> Result<Vec<usize>> {
    if pruned.len() < x.dim() {
        return Err(Error::SupportTooSmall {
            found: pruned.len(),
            needed: x.dim(),
        });
    }
    let restricted = x.columns(pruned.indices())?;
    let inner =
        crate::search::brute_search_columns(&restricted, cfg.second_stage.with_c(cfg.c), cfg.cap)?;
    Ok(inner
        .support
        .indices()
        .iter()
        .map(|&k| pruned.indices()[k])
        .collect())
}

/// Run all replicates. A failing replicate aborts the run with its index.
pub fn run_experiment(
    source: &ExperimentSource,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    if cfg.replicates < 2 {
        return Err(Error::Dimension(format!(
            "an experiment needs at least 2 replicates, got {}",
            cfg.replicates
        )));
    }
    cfg.solver.validate()?;
    let inputs = load_inputs(source, cfg.replicates)?;

    let results: Vec<Result<(ReplicateResult, (usize, usize))>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(cfg.master_seed, index as u64);
            let spec = ReplicateSpec {
                seed,
                downsample_factor: cfg.downsample_factor,
                standardize: cfg.standardize,
                truncate_rows: cfg.truncate_rows,
            };
            let run = || -> Result<(ReplicateResult, (usize, usize))> {
                let table = match &inputs {
                    Inputs::Shared(t) => prepare_replicate(t, &spec)?,
                    Inputs::PerReplicate(ts) => prepare_replicate(&ts[index], &spec)?,
                };
                let x = table.design()?;
                let rep = ReplicateResult {
                    index,
                    seed,
                    ..run_replicate(&x, cfg)?
                };
                Ok((rep, (x.dim(), x.candidates())))
            };
            run().map_err(|e| Error::Replicate {
                index,
                source: Box::new(e),
            })
        })
        .collect();

    let mut replicates = Vec::with_capacity(cfg.replicates);
    let mut shape = (0, 0);
    for r in results {
        let (rep, s) = r?;
        shape = s;
        replicates.push(rep);
    }

    let paired = PairedLosses::new(
        replicates.iter().map(|r| r.greedy_loss).collect(),
        replicates.iter().map(|r| r.two_stage_loss).collect(),
        replicates.iter().map(|r| r.support_ip_size).collect(),
    )?;
    let report = ExperimentReport::from_paired(&paired, cfg.eq_tol)?;
    let mean = |f: fn(&ReplicateResult) -> f64| {
        MeanSd::of(&replicates.iter().map(f).collect::<Vec<_>>()).mean
    };
    let summary = ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        dataset: source.label(),
        master_seed: cfg.master_seed,
        c: cfg.c,
        downsample_factor: cfg.downsample_factor,
        standardize: cfg.standardize,
        truncate_rows: cfg.truncate_rows,
        dimension: shape.0,
        candidates: shape.1,
        second_stage: cfg.second_stage,
        report,
        mean_timings: MeanTimings {
            stage1_seconds: mean(|r| r.stage1_seconds),
            stage2_seconds: mean(|r| r.stage2_seconds),
            greedy_seconds: mean(|r| r.greedy_seconds),
        },
    };
    Ok(ExperimentOutcome {
        replicates,
        summary,
    })
}

/// Per-replicate table: `replicate,greedy_loss,two_stage_loss,support_ip_size,seed`.
pub fn replicate_csv(results: &[ReplicateResult]) -> String {
    let mut out = String::from("replicate,greedy_loss,two_stage_loss,support_ip_size,seed\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.index,
            format_sig9(r.greedy_loss),
            format_sig9(r.two_stage_loss),
            r.support_ip_size,
            r.seed
        );
    }
    out
}

/// One replicate of the penalty-objective comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepDiveReplicate {
    pub index: usize,
    pub seed: u64,
    pub brute_support: Vec<usize>,
    pub brute_penalty: f64,
    pub two_stage_support: Vec<usize>,
    pub two_stage_penalty: f64,
    pub support_ip_size: usize,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepDiveOutcome {
    pub replicates: Vec<DeepDiveReplicate>,
    pub match_rate: f64,
}

/// Compare exhaustive minimization of the subset penalty with two-stage
/// isometry pursuit whose second stage uses the same penalty.
///
/// Replicates are drawn from the fixture with `cfg`'s preparation settings;
/// a small `P` (large `downsample_factor`) keeps the full brute search cheap.
pub fn run_deep_dive(fixture: Fixture, cfg: &ExperimentConfig) -> Result<DeepDiveOutcome> {
    let table = load_fixture(fixture)?;
    let penalty = Objective::SubsetPenalty { c: cfg.c };
    let replicates: Vec<DeepDiveReplicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(cfg.master_seed, index as u64);
            let spec = ReplicateSpec {
                seed,
                downsample_factor: cfg.downsample_factor,
                standardize: cfg.standardize,
                truncate_rows: cfg.truncate_rows,
            };
            let run = || -> Result<DeepDiveReplicate> {
                let x = prepare_replicate(&table, &spec)?.design()?;
                let brute = brute_search(&x, penalty, cfg.cap)?;
                let two = two_stage_isometry_pursuit(&x, cfg.c, &cfg.solver, penalty, cfg.cap)?;
                Ok(DeepDiveReplicate {
                    index,
                    seed,
                    matched: brute.support == two.support,
                    brute_support: brute.support.indices().to_vec(),
                    brute_penalty: brute.objective_value,
                    two_stage_support: two.support.indices().to_vec(),
                    two_stage_penalty: two.objective_value,
                    support_ip_size: two.intermediate_support.map_or(0, |s| s.len()),
                })
            };
            run().map_err(|e| Error::Replicate {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let matches = replicates.iter().filter(|r| r.matched).count();
    let match_rate = matches as f64 / replicates.len().max(1) as f64;
    Ok(DeepDiveOutcome {
        replicates,
        match_rate,
    })
}

/// `replicate,brute_penalty,two_stage_penalty,support_ip_size,matched,seed`.
pub fn deep_dive_csv(outcome: &DeepDiveOutcome) -> String {
    let mut out =
        String::from("replicate,brute_penalty,two_stage_penalty,support_ip_size,matched,seed\n");
    for r in &outcome.replicates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            format_sig9(r.brute_penalty),
            format_sig9(r.two_stage_penalty),
            r.support_ip_size,
            r.matched,
            r.seed
        );
    }
    out
}
