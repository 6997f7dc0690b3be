//! Monte-Carlo driver: every (SNR, trial) cell gets its own instance, seeded
//! from the master seed and the cell coordinates, and every configured
//! algorithm runs on that same instance.

use std::collections::BTreeMap;
use std::time::Instant;

use kronsense::models::{derive_seed, seeded_rng, SparseInstance, Support};
use kronsense::solvers::{hihtp, htp, omp, sbl, NoiseMode, SolverConfig};
use kronsense::two_stage::{tsr, Execution, StageSolver, Stage2Variant, TsrConfig};
use kronsense::{kron, Matrix, SparsityModel, Vector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::metrics::{mean, nmse};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "KRONSENSE_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: String,
    pub snr_db: f64,
    pub trial: usize,
    pub nmse: f64,
    pub runtime_s: f64,
    pub support_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub algorithm: String,
    pub snr_db: f64,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_nmse: f64,
    pub mean_runtime_s: f64,
    pub exact_rate: f64,
}

/// Worker threads to use: [`WORKERS_ENV`] if set to a positive integer,
/// otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Seed of the instance in cell `(snr_index, trial)`.
pub fn trial_seed(master_seed: u64, snr_index: usize, trial: usize) -> u64 {
    derive_seed(master_seed, &[snr_index as u64, trial as u64])
}

pub fn generate_instance(cfg: &ExperimentConfig, model: &SparsityModel, snr_index: usize, trial: usize) -> Result<SparseInstance> {
    let mut rng = seeded_rng(trial_seed(cfg.master_seed, snr_index, trial));
    Ok(SparseInstance::generate(cfg.dims, model, cfg.snr_grid[snr_index], &mut rng)?)
}

/// Runs one pipeline on the problem `y = (H1 ⊗ H2)x + n`. SBL (and the
/// first SBL stage) uses `noise`; the second SBL stage always estimates
/// its own. `direct` is the materialized `H1 ⊗ H2`, needed only by the
/// non-two-stage algorithms.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    h1: &Matrix,
    h2: &Matrix,
    y: &[f64],
    model: &SparsityModel,
    base: &SolverConfig,
    noise: NoiseMode,
    direct: Option<&Matrix>,
) -> kronsense::Result<Vector> {
    let tsr_cfg = |stage1: StageSolver, stage2: StageSolver| {
        let mut cfg = TsrConfig::with_solvers(stage1, stage2, model, noise, Execution::Sequential);
        cfg.stage1_cfg = SolverConfig { noise_mode: noise, ..*base };
        cfg.stage2_cfg = SolverConfig { noise_mode: NoiseMode::Estimated, ..*base };
        cfg
    };
    let need_direct = || {
        direct.ok_or_else(|| kronsense::Error::InvalidParameter("materialized dictionary missing".into()))
    };
    let total = model.total_sparsity();
    match spec {
        AlgorithmSpec::TsrSbl => Ok(tsr(h1, h2, y, model, &tsr_cfg(StageSolver::Sbl, StageSolver::Sbl))?.x_hat),
        AlgorithmSpec::TsrOmp => Ok(tsr(h1, h2, y, model, &tsr_cfg(StageSolver::omp(), StageSolver::omp()))?.x_hat),
        AlgorithmSpec::TsrHtp => {
            let mut cfg = tsr_cfg(StageSolver::omp(), StageSolver::htp());
            cfg.mode.variant = Stage2Variant::PerBlockSmv;
            Ok(tsr(h1, h2, y, model, &cfg)?.x_hat)
        }
        AlgorithmSpec::Sbl => Ok(sbl(need_direct()?, y, &SolverConfig { noise_mode: noise, ..*base })?.x_hat),
        AlgorithmSpec::Omp => {
            let tol = 1e-9 * y.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(omp(need_direct()?, y, total, tol)?.x_hat)
        }
        AlgorithmSpec::Htp => Ok(htp(need_direct()?, y, total, base)?.x_hat),
        AlgorithmSpec::Hihtp { .. } => {
            let (s1, s2) = spec.hihtp_levels(model).expect("hihtp spec has levels");
            Ok(hihtp(need_direct()?, y, s1, s2, model.layout, base)?.x_hat)
        }
    }
}

enum Outcome {
    Record(TrialRecord),
    Failure(TrialFailure),
}

fn run_cell(cfg: &ExperimentConfig, model: &SparsityModel, snr_index: usize, trial: usize) -> Result<Vec<Outcome>> {
    let inst = generate_instance(cfg, model, snr_index, trial)?;
    let direct = cfg.algorithms.iter().any(AlgorithmSpec::is_direct).then(|| kron(&inst.h1, &inst.h2));
    let snr_db = cfg.snr_grid[snr_index];
    let noise = if cfg.oracle_noise { NoiseMode::Fixed { sigma2: inst.noise_variance } } else { cfg.solver_cfg.noise_mode };
    let mut out = Vec::with_capacity(cfg.algorithms.len());
    for spec in &cfg.algorithms {
        let algorithm = spec.name();
        let start = Instant::now();
        let result = run_algorithm(spec, &inst.h1, &inst.h2, &inst.y, model, &cfg.solver_cfg, noise, direct.as_ref());
        let runtime_s = start.elapsed().as_secs_f64();
        let scored = result.and_then(|x_hat| {
            let err = nmse(&inst.x, &x_hat)?;
            if !err.is_finite() {
                return Err(kronsense::Error::NonFinite { iteration: 0 });
            }
            Ok((err, Support::of_nonzeros(&x_hat, 0.0) == inst.support))
        });
        out.push(match scored {
            Ok((nmse, support_exact)) => {
                Outcome::Record(TrialRecord { algorithm, snr_db, trial, nmse, runtime_s, support_exact })
            }
            Err(e) => Outcome::Failure(TrialFailure { algorithm, snr_db, trial, error: e.to_string() }),
        });
    }
    Ok(out)
}

/// Runs every configured algorithm on every (SNR, trial) instance.
///
/// Solver errors are collected as [`TrialFailure`]s rather than aborting.
/// Output is ordered by SNR index, trial, then algorithm order in the
/// config, so parallel and sequential runs produce the same sequence.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = cfg.sparsity_model()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.snr_grid.len()).flat_map(|s| (0..cfg.trials).map(move |t| (s, t))).collect();

    let results: Vec<Result<Vec<Outcome>>> = if cfg.parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(|&(s, t)| run_cell(cfg, &model, s, t)).collect())
    } else {
        cells.iter().map(|&(s, t)| run_cell(cfg, &model, s, t)).collect()
    };

    let mut output = ExperimentOutput::default();
    for cell in results {
        for outcome in cell? {
            match outcome {
                Outcome::Record(r) => output.records.push(r),
                Outcome::Failure(f) => output.failures.push(f),
            }
        }
    }
    Ok(output)
}

/// Mean NMSE, runtime and exact-support rate per (algorithm, SNR), in order
/// of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut cells: BTreeMap<(String, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.algorithm.clone(), r.snr_db.to_bits());
        let entry = cells.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &cells[&key];
            SummaryRow {
                algorithm: key.0.clone(),
                snr_db: f64::from_bits(key.1),
                trials: rs.len(),
                mean_nmse: mean(rs.iter().map(|r| r.nmse)),
                mean_runtime_s: mean(rs.iter().map(|r| r.runtime_s)),
                exact_rate: mean(rs.iter().map(|r| if r.support_exact { 1.0 } else { 0.0 })),
            }
        })
        .collect()
}
