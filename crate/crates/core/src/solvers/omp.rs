use crate::error::Result;
use crate::linalg::{gemm, lstsq, Matrix};
use crate::models::Support;

use super::{check_rows, embed_rows, MmvResult, SmvResult};

/// Orthogonal matching pursuit.
///
/// Each step adds the column with the largest normalized correlation
/// `|⟨h_j, r⟩| / ‖h_j‖` with the residual and refits all selected
/// coefficients by least squares. Stops after `max_atoms` atoms or once
/// `‖r‖₂ ≤ residual_tol`. The least-squares step falls back to the
/// minimum-norm pseudo-inverse solution when the selected columns are
/// (numerically) linearly dependent.
pub fn omp(h: &Matrix, y: &[f64], max_atoms: usize, residual_tol: f64) -> Result<SmvResult> {
    check_rows(h, y.len())?;
    let y_mat = Matrix::new(y.len(), 1, y.to_vec())?;
    Ok(somp(h, &y_mat, max_atoms, residual_tol)?.into_smv())
}

/// Simultaneous OMP: the atom score is the ℓ2 norm of the corresponding row
/// of `hᵀR`, and all columns of `y_mat` share one row support.
pub fn somp(h: &Matrix, y_mat: &Matrix, max_atoms: usize, residual_tol: f64) -> Result<MmvResult> {
    check_rows(h, y_mat.rows())?;
    let n = h.cols();
    let l = y_mat.cols();
    let col_norms: Vec<f64> = h.gram_diagonal().into_iter().map(f64::sqrt).collect();

    let mut selected: Vec<usize> = Vec::new();
    let mut chosen = vec![false; n];
    let mut residual = y_mat.clone();
    let mut coeffs = Matrix::zeros(0, l);
    let budget = max_atoms.min(n);

    let mut converged = residual.frobenius_norm() <= residual_tol;
    while !converged && selected.len() < budget {
        let corr = h.t_matmul(&residual)?;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if chosen[j] || col_norms[j] == 0.0 {
                continue;
            }
            let score = corr.row(j).iter().map(|v| v * v).sum::<f64>().sqrt() / col_norms[j];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }
        chosen[j] = true;
        selected.push(j);

        let hs = h.select_columns(&selected);
        coeffs = lstsq(&hs, y_mat)?;
        residual = y_mat.clone();
        gemm(-1.0, &hs, false, &coeffs, false, 1.0, &mut residual);
        converged = residual.frobenius_norm() <= residual_tol;
    }

    let iterations = selected.len();
    let mut order: Vec<usize> = (0..selected.len()).collect();
    order.sort_by_key(|&k| selected[k]);
    let rows: Vec<usize> = order.iter().map(|&k| selected[k]).collect();
    let sorted_coeffs = coeffs.select_rows(&order);
    Ok(MmvResult {
        x_hat: embed_rows(&sorted_coeffs, &rows, n),
        row_support: Support::from_sorted(rows),
        iterations,
        converged,
    })
}

impl Matrix {
    /// Squared column norms.
    pub(crate) fn gram_diagonal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for i in 0..self.rows() {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v * v;
            }
        }
        out
    }
}
