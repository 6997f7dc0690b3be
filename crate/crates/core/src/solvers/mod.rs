//! Single- and multiple-measurement-vector sparse recovery algorithms.
//!
//! Every solver is deterministic: ties in any top-k selection go to the
//! lowest index, and no solver draws random numbers.

mod htp;
mod omp;
mod sbl;

pub use htp::{hierarchical_threshold, hihtp, hihtp_traced, htp, htp_traced, top_k};
pub use omp::{omp, somp};
pub use sbl::{mmv_sbl, mmv_sbl_observed, posterior_covariance, sbl, SblIterate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::Support;

/// How SBL treats the noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseMode {
    /// Use the given variance throughout.
    Fixed { sigma2: f64 },
    /// Start from a tenth of the per-entry measurement power and refine it
    /// with the EM noise update each iteration.
    Estimated,
}

/// Gradient step of the hard-thresholding pursuits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// η = 1, the classic choice for dictionaries with unit-norm columns.
    Unit,
    Fixed { eta: f64 },
    /// η = N/‖H‖_F², i.e. η = 1 after rescaling `H` to unit mean squared
    /// column norm. The usual choice for unnormalized Gaussian dictionaries.
    ColumnNormalized,
    /// η = 1/‖H‖₂², which makes the thresholded step a majorization and the
    /// residual non-increasing, at the price of small steps.
    InverseSpectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative hyperparameter change (SBL) below which iteration stops.
    pub conv_tol: f64,
    /// Hyperparameters below `prune_threshold · max γ` are dropped for the rest of the run.
    pub prune_threshold: f64,
    /// SBL only: after the last iteration, hyperparameters below
    /// `support_threshold · max γ` are dropped before the final posterior, so
    /// they appear neither in the reported support nor in the estimate.
    pub support_threshold: f64,
    pub noise_mode: NoiseMode,
    pub step: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            conv_tol: 1e-6,
            prune_threshold: 1e-4,
            support_threshold: 1e-3,
            noise_mode: NoiseMode::Estimated,
            step: StepRule::Unit,
        }
    }
}

impl SolverConfig {
    pub fn with_noise(mut self, noise_mode: NoiseMode) -> Self {
        self.noise_mode = noise_mode;
        self
    }

    pub fn with_fixed_noise(self, sigma2: f64) -> Self {
        self.with_noise(NoiseMode::Fixed { sigma2 })
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("conv_tol {} must be positive", self.conv_tol)));
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return Err(Error::InvalidParameter(format!(
                "prune_threshold {} must lie in [0, 1)",
                self.prune_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.support_threshold) {
            return Err(Error::InvalidParameter(format!(
                "support_threshold {} must lie in [0, 1)",
                self.support_threshold
            )));
        }
        match self.noise_mode {
            NoiseMode::Fixed { sigma2 } if !(sigma2 >= 0.0) || !sigma2.is_finite() => {
                return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
            }
            _ => {}
        }
        match self.step {
            StepRule::Fixed { eta } if !(eta > 0.0) || !eta.is_finite() => {
                Err(Error::InvalidParameter(format!("step size {eta}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmvResult {
    pub x_hat: Vector,
    pub support_hat: Support,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmvResult {
    /// Row-sparse estimate, one column per measurement vector.
    pub x_hat: Matrix,
    pub row_support: Support,
    pub iterations: usize,
    pub converged: bool,
}

impl MmvResult {
    pub(crate) fn into_smv(self) -> SmvResult {
        let x_hat = self.x_hat.col(0);
        SmvResult {
            x_hat,
            support_hat: self.row_support,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    pub(crate) fn zero(rows: usize, cols: usize) -> Self {
        Self { x_hat: Matrix::zeros(rows, cols), row_support: Support::empty(), iterations: 0, converged: true }
    }
}

pub(crate) fn check_rows(h: &Matrix, rows: usize) -> Result<()> {
    if h.rows() != rows {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} rows but the measurements have {rows}",
            h.rows()
        )));
    }
    Ok(())
}

/// Scatters the rows of `values` (one per entry of `rows`) into an `n x cols` zero matrix.
pub(crate) fn embed_rows(values: &Matrix, rows: &[usize], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, values.cols());
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(values.row(k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_documented_values() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.max_iter, 300);
        assert_eq!(cfg.conv_tol, 1e-6);
        assert_eq!(cfg.prune_threshold, 1e-4);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let base = SolverConfig::default();
        assert!(SolverConfig { max_iter: 0, ..base }.validate().is_err());
        assert!(SolverConfig { conv_tol: 0.0, ..base }.validate().is_err());
        assert!(SolverConfig { prune_threshold: 1.0, ..base }.validate().is_err());
        assert!(base.with_fixed_noise(-1.0).validate().is_err());
        assert!(base.with_step(StepRule::Fixed { eta: 0.0 }).validate().is_err());
    }

    #[test]
    fn config_json_uses_defaults_for_missing_fields() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"max_iter": 50}"#).unwrap();
        assert_eq!(cfg.max_iter, 50);
        assert_eq!(cfg.prune_threshold, 1e-4);
        let cfg: SolverConfig =
            serde_json::from_str(r#"{"noise_mode": {"mode": "fixed", "sigma2": 0.5}}"#).unwrap();
        assert_eq!(cfg.noise_mode, NoiseMode::Fixed { sigma2: 0.5 });
        assert!(serde_json::from_str::<SolverConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
