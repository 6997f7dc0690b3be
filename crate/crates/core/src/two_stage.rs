//! Two-stage recovery for Kronecker dictionaries.
//!
//! Write `x = vec(X)` with the blocks of `x` as the columns of `X` (`N2 x N1`)
//! and `y = vec(Y)` with `Y` of shape `M2 x M1`. Then
//!
//! ```text
//! Yᵀ = H1 (H2 X)ᵀ + Nᵀ
//! ```
//!
//! and `Z = (H2 X)ᵀ` is row sparse: row `i` is nonzero exactly when block `i`
//! of `x` is. Stage 1 estimates `Z` with an MMV solver over `H1`; its row
//! support is the set of active blocks. Stage 2 treats the active rows of
//! `Ẑ` as measurements of the blocks through `H2`, either one SMV problem
//! per block or, when all blocks share a support, one MMV problem.
//!
//! Blocks dropped by stage 1 are never reconsidered, so a block whose
//! measured energy is swamped by noise is lost for good.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::{SparsityModel, Support};
use crate::solvers::{htp, mmv_sbl, omp, sbl, somp, MmvResult, NoiseMode, SmvResult, SolverConfig};

/// Recovery algorithm usable at either stage. The MMV form of `Omp` is
/// simultaneous OMP and that of `Sbl` is MMV-SBL; `Htp` has no MMV form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSolver {
    /// `max_atoms` defaults to the sparsity bound of the stage; iteration
    /// also stops once `‖R‖_F ≤ rel_tol · ‖Y‖_F`.
    Omp {
        #[serde(default)]
        max_atoms: Option<usize>,
        #[serde(default = "default_rel_tol")]
        rel_tol: f64,
    },
    Sbl,
    /// `sparsity` defaults to the sparsity bound of the stage.
    Htp {
        #[serde(default)]
        sparsity: Option<usize>,
    },
}

fn default_rel_tol() -> f64 {
    1e-9
}

impl StageSolver {
    pub fn omp() -> Self {
        StageSolver::Omp { max_atoms: None, rel_tol: default_rel_tol() }
    }

    pub fn htp() -> Self {
        StageSolver::Htp { sparsity: None }
    }

    fn solve_smv(&self, h: &Matrix, y: &[f64], bound: usize, cfg: &SolverConfig) -> Result<SmvResult> {
        match *self {
            StageSolver::Omp { max_atoms, rel_tol } => {
                let tol = rel_tol * y.iter().map(|v| v * v).sum::<f64>().sqrt();
                omp(h, y, max_atoms.unwrap_or(bound), tol)
            }
            StageSolver::Sbl => sbl(h, y, cfg),
            StageSolver::Htp { sparsity } => htp(h, y, sparsity.unwrap_or(bound).min(h.cols()), cfg),
        }
    }

    fn solve_mmv(&self, h: &Matrix, y: &Matrix, bound: usize, cfg: &SolverConfig) -> Result<MmvResult> {
        match *self {
            StageSolver::Omp { max_atoms, rel_tol } => {
                somp(h, y, max_atoms.unwrap_or(bound), rel_tol * y.frobenius_norm())
            }
            StageSolver::Sbl => mmv_sbl(h, y, cfg),
            StageSolver::Htp { .. } => {
                Err(Error::InvalidParameter("hard thresholding pursuit has no MMV variant".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Variant {
    /// Independent SMV problem per active block.
    PerBlockSmv,
    /// One MMV problem over all active blocks (common within-block support).
    JointMmv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMode {
    pub variant: Stage2Variant,
    pub execution: Execution,
}

impl StageMode {
    /// Joint MMV for Kronecker-supported models, per-block SMV otherwise.
    pub fn for_model(model: &SparsityModel, execution: Execution) -> Self {
        let variant = if model.is_kronecker_supported() {
            Stage2Variant::JointMmv
        } else {
            Stage2Variant::PerBlockSmv
        };
        Self { variant, execution }
    }

    pub fn validate(&self, model: &SparsityModel) -> Result<()> {
        if self.variant == Stage2Variant::JointMmv && !model.is_kronecker_supported() {
            return Err(Error::InvalidParameter(
                "joint MMV second stage needs a Kronecker-supported model".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsrConfig {
    pub stage1: StageSolver,
    pub stage2: StageSolver,
    pub mode: StageMode,
    pub stage1_cfg: SolverConfig,
    pub stage2_cfg: SolverConfig,
    /// When set, blocks whose stage-1 row norm is at most this fraction of
    /// the largest row norm are dropped, in addition to the solver's own
    /// support decision.
    #[serde(default)]
    pub block_threshold: Option<f64>,
}

impl TsrConfig {
    /// MMV-SBL then SBL (or MMV-SBL for Kronecker-supported models). Stage 1
    /// uses `stage1_noise`; stage 2 estimates its own noise level, since its
    /// "noise" is the stage-1 estimation error.
    pub fn sbl(model: &SparsityModel, stage1_noise: NoiseMode, execution: Execution) -> Self {
        Self::with_solvers(StageSolver::Sbl, StageSolver::Sbl, model, stage1_noise, execution)
    }

    /// Simultaneous OMP then OMP (or simultaneous OMP).
    pub fn omp(model: &SparsityModel, execution: Execution) -> Self {
        Self::with_solvers(StageSolver::omp(), StageSolver::omp(), model, NoiseMode::Estimated, execution)
    }

    pub fn with_solvers(
        stage1: StageSolver,
        stage2: StageSolver,
        model: &SparsityModel,
        stage1_noise: NoiseMode,
        execution: Execution,
    ) -> Self {
        let base = SolverConfig::default();
        Self {
            stage1,
            stage2,
            mode: StageMode::for_model(model, execution),
            stage1_cfg: base.with_noise(stage1_noise),
            stage2_cfg: base.with_noise(NoiseMode::Estimated),
            block_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub stage1_s: f64,
    pub stage2_s: f64,
}

impl StageTimings {
    pub fn total_s(&self) -> f64 {
        self.stage1_s + self.stage2_s
    }
}

#[derive(Debug, Clone)]
pub struct TsrResult {
    pub x_hat: Vector,
    /// Block indices kept after stage 1.
    pub active_blocks: Support,
    pub stage1: MmvResult,
    /// Iterations summed over all stage-2 solves.
    pub stage2_iterations: usize,
    pub timings: StageTimings,
}

/// Stage 1: estimate `Z = (H2 X)ᵀ` from `Yᵀ = H1 Z + Nᵀ`. `y_mat` is the
/// `M2 x M1` reshape of `y`.
pub fn stage1(
    h1: &Matrix,
    y_mat: &Matrix,
    solver: &StageSolver,
    row_bound: usize,
    cfg: &SolverConfig,
) -> Result<MmvResult> {
    solver.solve_mmv(h1, &y_mat.transpose(), row_bound, cfg)
}

/// Stage 2: recover the `N2 x N1` matrix `X` from the stage-1 estimate
/// `x_tilde` (`N1 x M2`). Blocks outside `active_blocks` are zero.
pub fn stage2(
    h2: &Matrix,
    x_tilde: &Matrix,
    active_blocks: &Support,
    mode: StageMode,
    solver: &StageSolver,
    entry_bound: usize,
    cfg: &SolverConfig,
) -> Result<(Matrix, usize)> {
    let (m2, n2) = h2.shape();
    let n1 = x_tilde.rows();
    if x_tilde.cols() != m2 {
        return Err(Error::DimensionMismatch(format!(
            "stage-1 estimate has {} columns, H2 has {m2} rows",
            x_tilde.cols()
        )));
    }
    if active_blocks.indices().last().is_some_and(|&b| b >= n1) {
        return Err(Error::DimensionMismatch("active block out of range".into()));
    }
    let mut x_mat = Matrix::zeros(n2, n1);
    if active_blocks.is_empty() {
        return Ok((x_mat, 0));
    }

    match mode.variant {
        Stage2Variant::PerBlockSmv => {
            let solve = |&b: &usize| solver.solve_smv(h2, x_tilde.row(b), entry_bound, cfg);
            let results: Vec<Result<SmvResult>> = match mode.execution {
                Execution::Sequential => active_blocks.indices().iter().map(solve).collect(),
                Execution::Parallel => active_blocks.indices().par_iter().map(solve).collect(),
            };
            let mut iterations = 0;
            for (&b, res) in active_blocks.indices().iter().zip(results) {
                let res = res?;
                iterations += res.iterations;
                x_mat.set_col(b, &res.x_hat);
            }
            Ok((x_mat, iterations))
        }
        Stage2Variant::JointMmv => {
            let y2 = x_tilde.select_rows(active_blocks.indices()).transpose();
            let res = solver.solve_mmv(h2, &y2, entry_bound, cfg)?;
            for (k, &b) in active_blocks.indices().iter().enumerate() {
                x_mat.set_col(b, res.x_hat.col(k).as_slice());
            }
            Ok((x_mat, res.iterations))
        }
    }
}

/// Two-stage recovery of `x` from `y = (H1 ⊗ H2) x + n`.
pub fn tsr(h1: &Matrix, h2: &Matrix, y: &[f64], model: &SparsityModel, cfg: &TsrConfig) -> Result<TsrResult> {
    let (m1, n1) = h1.shape();
    let (m2, n2) = h2.shape();
    if y.len() != m1 * m2 {
        return Err(Error::DimensionMismatch(format!(
            "measurement length {} differs from {m1}·{m2}",
            y.len()
        )));
    }
    if model.layout.n_blocks != n1 || model.layout.block_len != n2 {
        return Err(Error::DimensionMismatch(format!(
            "model layout {:?} does not match dictionaries with {n1} and {n2} columns",
            model.layout
        )));
    }
    cfg.mode.validate(model)?;
    let (row_bound, entry_bound) = model.block_sparsity_bounds();

    let start = Instant::now();
    let y_mat = Matrix::unvec(y, m2, m1)?;
    let stage1_res = stage1(h1, &y_mat, &cfg.stage1, row_bound, &cfg.stage1_cfg)?;
    let active_blocks = match cfg.block_threshold {
        Some(frac) => {
            let norms: Vec<f64> =
                (0..n1).map(|b| stage1_res.x_hat.row(b).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            let cutoff = frac * norms.iter().cloned().fold(0.0, f64::max);
            Support::from_sorted(
                stage1_res.row_support.indices().iter().copied().filter(|&b| norms[b] > cutoff).collect(),
            )
        }
        None => stage1_res.row_support.clone(),
    };
    let stage1_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (x_mat, stage2_iterations) =
        stage2(h2, &stage1_res.x_hat, &active_blocks, cfg.mode, &cfg.stage2, entry_bound, &cfg.stage2_cfg)?;
    let x_hat = x_mat.vec();
    let stage2_s = start.elapsed().as_secs_f64();

    Ok(TsrResult {
        x_hat,
        active_blocks,
        stage1: stage1_res,
        stage2_iterations,
        timings: StageTimings { stage1_s, stage2_s },
    })
}
