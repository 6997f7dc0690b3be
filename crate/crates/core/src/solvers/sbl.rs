//! Sparse Bayesian learning by expectation-maximization.
//!
//! Prior `x_i ~ N(0, γ_i)` (one `γ_i` per dictionary column, shared by all
//! measurement columns in the MMV case), noise `N(0, σ²)`. The E-step gives
//!
//! ```text
//! Σ = (σ⁻² HᵀH + Γ⁻¹)⁻¹,   μ = σ⁻² Σ Hᵀ Y
//! ```
//!
//! and the M-step sets `γ_i = mean_l(μ_il²) + Σ_ii`. With estimated noise,
//! `σ² = (‖Y − Hμ‖_F² / L + σ² Σ_i (1 − Σ_ii/γ_i)) / M`.
//!
//! The posterior is evaluated in whichever of two equivalent forms is
//! cheaper: `Γ^½ (I + σ⁻² Γ^½ HᵀH Γ^½)⁻¹ Γ^½` when the active set has at
//! most `M` columns, and the Woodbury form through `σ²I + HΓHᵀ` otherwise.
//! Both are well conditioned for vanishing `γ_i`.

use crate::error::{Error, Result};
use crate::linalg::{gemm, Cholesky, Matrix};
use crate::models::Support;

use super::{check_rows, embed_rows, MmvResult, NoiseMode, SmvResult, SolverConfig};

/// Relative floor on the noise variance; lets noiseless problems run with `σ² = 0`.
const NOISE_FLOOR: f64 = 1e-10;
/// Initial variance in [`NoiseMode::Estimated`], relative to the measurement power.
const NOISE_INIT: f64 = 1e-1;

/// State after one EM iteration, passed to [`mmv_sbl_observed`] observers.
#[derive(Debug)]
pub struct SblIterate<'a> {
    pub iteration: usize,
    /// Hyperparameters over all dictionary columns; pruned entries are zero.
    pub gamma: &'a [f64],
    pub sigma2: f64,
}

pub fn sbl(h: &Matrix, y: &[f64], cfg: &SolverConfig) -> Result<SmvResult> {
    check_rows(h, y.len())?;
    let y_mat = Matrix::new(y.len(), 1, y.to_vec())?;
    Ok(mmv_sbl(h, &y_mat, cfg)?.into_smv())
}

pub fn mmv_sbl(h: &Matrix, y_mat: &Matrix, cfg: &SolverConfig) -> Result<MmvResult> {
    mmv_sbl_observed(h, y_mat, cfg, |_| {})
}

/// [`mmv_sbl`] that reports the hyperparameters after every iteration.
pub fn mmv_sbl_observed(
    h: &Matrix,
    y_mat: &Matrix,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&SblIterate<'_>),
) -> Result<MmvResult> {
    check_rows(h, y_mat.rows())?;
    cfg.validate()?;
    let (m, n) = h.shape();
    let l = y_mat.cols();

    let power = y_mat.frobenius_norm_sq() / (m * l) as f64;
    if power == 0.0 {
        return Ok(MmvResult::zero(n, l));
    }
    let floor = NOISE_FLOOR * power;
    let mut sigma2 = match cfg.noise_mode {
        NoiseMode::Fixed { sigma2 } => sigma2.max(floor),
        NoiseMode::Estimated => NOISE_INIT * power,
    };

    let mut active: Vec<usize> = (0..n).collect();
    let mut gamma = vec![1.0; n];
    let mut gamma_full = vec![1.0; n];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let h_a = h.select_columns(&active);
        let post = posterior(&h_a, y_mat, &gamma, sigma2).ok_or(Error::NonFinite { iteration: iter })?;

        let mut new_gamma = Vec::with_capacity(active.len());
        for k in 0..active.len() {
            let second_moment = post.mean.row(k).iter().map(|v| v * v).sum::<f64>() / l as f64;
            new_gamma.push(second_moment + post.diag[k]);
        }
        if new_gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: iter });
        }

        if matches!(cfg.noise_mode, NoiseMode::Estimated) {
            let mut resid = y_mat.clone();
            gemm(-1.0, &h_a, false, &post.mean, false, 1.0, &mut resid);
            let dof: f64 = gamma.iter().zip(&post.diag).map(|(g, d)| 1.0 - d / g).sum();
            sigma2 = ((resid.frobenius_norm_sq() / l as f64 + sigma2 * dof) / m as f64).max(floor);
            if !sigma2.is_finite() {
                return Err(Error::NonFinite { iteration: iter });
            }
        }

        let max_new = new_gamma.iter().cloned().fold(0.0, f64::max);
        let max_change = gamma.iter().zip(&new_gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        converged = max_change <= cfg.conv_tol * max_new;

        let cutoff = cfg.prune_threshold * max_new;
        let (kept_idx, kept_gamma): (Vec<usize>, Vec<f64>) = active
            .iter()
            .zip(&new_gamma)
            .filter(|(_, &g)| g > cutoff && g > 0.0)
            .map(|(&i, &g)| (i, g))
            .unzip();
        active = kept_idx;
        gamma = kept_gamma;

        gamma_full.iter_mut().for_each(|g| *g = 0.0);
        for (&i, &g) in active.iter().zip(&gamma) {
            gamma_full[i] = g;
        }
        observer(&SblIterate { iteration: iter, gamma: &gamma_full, sigma2 });

        if converged || active.is_empty() {
            break;
        }
    }

    let max_gamma = gamma.iter().cloned().fold(0.0, f64::max);
    let cutoff = cfg.support_threshold * max_gamma;
    let (active, gamma): (Vec<usize>, Vec<f64>) =
        active.into_iter().zip(gamma).filter(|&(_, g)| g >= cutoff).unzip();
    if active.is_empty() {
        return Ok(MmvResult { iterations, converged, ..MmvResult::zero(n, l) });
    }
    let h_a = h.select_columns(&active);
    let post = posterior(&h_a, y_mat, &gamma, sigma2).ok_or(Error::NonFinite { iteration: iterations })?;
    Ok(MmvResult {
        x_hat: embed_rows(&post.mean, &active, n),
        row_support: Support::from_sorted(active),
        iterations,
        converged,
    })
}

struct Posterior {
    /// `|A| x L` posterior mean.
    mean: Matrix,
    /// Diagonal of the posterior covariance.
    diag: Vec<f64>,
}

fn posterior(h_a: &Matrix, y: &Matrix, gamma: &[f64], sigma2: f64) -> Option<Posterior> {
    let (m, k) = h_a.shape();
    let sqrt_g: Vec<f64> = gamma.iter().map(|g| g.sqrt()).collect();
    // P = H_A Γ^½
    let mut p = h_a.clone();
    for i in 0..m {
        for (v, s) in p.row_mut(i).iter_mut().zip(&sqrt_g) {
            *v *= s;
        }
    }

    let (mean, diag) = if k <= m {
        // B = I + σ⁻² PᵀP,  Σ = Γ^½ B⁻¹ Γ^½,  μ = σ⁻² Γ^½ B⁻¹ Pᵀ Y
        let mut b = p.gram();
        b.scale(1.0 / sigma2);
        for i in 0..k {
            b[(i, i)] += 1.0;
        }
        let chol = Cholesky::new(&b, 0.0)?;
        let mut w = p.t_matmul(y).ok()?;
        chol.solve_in_place(&mut w);
        for i in 0..k {
            let s = sqrt_g[i] / sigma2;
            w.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let b_inv = chol.inverse();
        let diag = (0..k).map(|i| gamma[i] * b_inv[(i, i)]).collect();
        (w, diag)
    } else {
        // C = σ²I + PPᵀ,  Σ_ii = γ_i (1 − ‖L⁻¹ p_i‖²),  μ = Γ^½ Pᵀ C⁻¹ Y
        let mut c = p.matmul_t(&p).ok()?;
        for i in 0..m {
            c[(i, i)] += sigma2;
        }
        let chol = Cholesky::new(&c, 0.0)?;
        let mut z = y.clone();
        chol.solve_in_place(&mut z);
        let mut mean = p.t_matmul(&z).ok()?;
        for i in 0..k {
            let s = sqrt_g[i];
            mean.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let mut w = p;
        chol.forward_in_place(&mut w);
        let col_sq = w.gram_diagonal();
        let diag = (0..k).map(|i| (gamma[i] * (1.0 - col_sq[i])).max(0.0)).collect();
        (mean, diag)
    };

    if mean.as_slice().iter().all(|v| v.is_finite()) {
        Some(Posterior { mean, diag })
    } else {
        None
    }
}

/// Full posterior covariance `Γ^½ (I + σ⁻² Γ^½ HᵀH Γ^½)⁻¹ Γ^½` for given
/// hyperparameters (zero `γ_i` give zero rows and columns).
pub fn posterior_covariance(h: &Matrix, gamma: &[f64], sigma2: f64) -> Result<Matrix> {
    if gamma.len() != h.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} hyperparameters for {} columns",
            gamma.len(),
            h.cols()
        )));
    }
    let n = h.cols();
    let sqrt_g: Vec<f64> = gamma.iter().map(|g| g.max(0.0).sqrt()).collect();
    let mut b = h.gram();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= sqrt_g[i] * sqrt_g[j] / sigma2;
        }
        b[(i, i)] += 1.0;
    }
    let chol = Cholesky::new(&b, 0.0).ok_or(Error::NonFinite { iteration: 0 })?;
    let mut sigma = chol.inverse();
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] *= sqrt_g[i] * sqrt_g[j];
        }
    }
    Ok(sigma)
}
