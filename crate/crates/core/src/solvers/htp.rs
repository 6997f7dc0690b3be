use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{lstsq, spectral_norm_sq, BlockLayout, Matrix, Vector};
use crate::models::Support;

use super::{check_rows, SmvResult, SolverConfig, StepRule};

/// Hard thresholding pursuit with `s` nonzeros.
pub fn htp(h: &Matrix, y: &[f64], s: usize, cfg: &SolverConfig) -> Result<SmvResult> {
    htp_traced(h, y, s, cfg).map(|(res, _)| res)
}

/// [`htp`] that also returns `‖y − H x‖₂` after every refit.
pub fn htp_traced(h: &Matrix, y: &[f64], s: usize, cfg: &SolverConfig) -> Result<(SmvResult, Vec<f64>)> {
    if s > h.cols() {
        return Err(Error::InvalidParameter(format!(
            "sparsity {s} exceeds the {} dictionary columns",
            h.cols()
        )));
    }
    pursuit(h, y, cfg, |z| top_k(z, s))
}

/// Hierarchical hard thresholding pursuit: [`htp`] with
/// [`hierarchical_threshold`] as the projection.
pub fn hihtp(
    h: &Matrix,
    y: &[f64],
    s1: usize,
    s2: usize,
    layout: BlockLayout,
    cfg: &SolverConfig,
) -> Result<SmvResult> {
    hihtp_traced(h, y, s1, s2, layout, cfg).map(|(res, _)| res)
}

pub fn hihtp_traced(
    h: &Matrix,
    y: &[f64],
    s1: usize,
    s2: usize,
    layout: BlockLayout,
    cfg: &SolverConfig,
) -> Result<(SmvResult, Vec<f64>)> {
    if h.cols() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} columns but the layout covers {}",
            h.cols(),
            layout.len()
        )));
    }
    pursuit(h, y, cfg, |z| hierarchical_threshold(z, s1, s2, layout))
}

fn pursuit(
    h: &Matrix,
    y: &[f64],
    cfg: &SolverConfig,
    project: impl Fn(&[f64]) -> Support,
) -> Result<(SmvResult, Vec<f64>)> {
    check_rows(h, y.len())?;
    cfg.validate()?;
    let n = h.cols();
    let eta = match cfg.step {
        StepRule::Unit => 1.0,
        StepRule::Fixed { eta } => eta,
        StepRule::ColumnNormalized => {
            let fro = h.frobenius_norm_sq();
            if fro > 0.0 { n as f64 / fro } else { 1.0 }
        }
        StepRule::InverseSpectral => {
            let norm = spectral_norm_sq(h);
            if norm > 0.0 { 1.0 / norm } else { 1.0 }
        }
    };
    let y_col = Matrix::new(y.len(), 1, y.to_vec())?;

    let mut x = Vector::zeros(n);
    let mut support: Option<Support> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let fit = h.matvec(&x)?;
        let resid: Vec<f64> = y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
        let grad = h.t_matvec(&resid)?;
        let z: Vec<f64> = x.iter().zip(grad.iter()).map(|(xi, gi)| xi + eta * gi).collect();
        let next = project(&z);
        if support.as_ref() == Some(&next) {
            converged = true;
            break;
        }
        x = Vector::zeros(n);
        if !next.is_empty() {
            let coeffs = lstsq(&h.select_columns(next.indices()), &y_col)?;
            for (k, &i) in next.indices().iter().enumerate() {
                x[i] = coeffs[(k, 0)];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: iterations + 1 });
        }
        let fit = h.matvec(&x)?;
        trace.push(y.iter().zip(fit.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        support = Some(next);
        iterations += 1;
    }

    let support_hat = support.unwrap_or_default();
    Ok((SmvResult { x_hat: x, support_hat, iterations, converged }, trace))
}

/// Descending by magnitude, ties to the lower index.
fn by_magnitude(z: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b))
}

/// Positions of the `k` largest magnitudes, sorted.
pub fn top_k(z: &[f64], k: usize) -> Support {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(by_magnitude(z));
    idx.truncate(k);
    idx.sort_unstable();
    Support::from_sorted(idx)
}

/// Projection onto `(s1, s2)`-hierarchically sparse supports.
///
/// Keeps the `s2` largest-magnitude entries of every block, ranks blocks by
/// the energy of what was kept, and returns the kept entries of the best
/// `s1` blocks. Ties go to the lower index at both levels. Levels larger
/// than the layout are clamped to it.
pub fn hierarchical_threshold(z: &[f64], s1: usize, s2: usize, layout: BlockLayout) -> Support {
    debug_assert_eq!(z.len(), layout.len());
    let s1 = s1.min(layout.n_blocks);
    let s2 = s2.min(layout.block_len);
    let per_block: Vec<(Vec<usize>, f64)> = (0..layout.n_blocks)
        .map(|b| {
            let start = b * layout.block_len;
            let block = &z[start..start + layout.block_len];
            let kept = top_k(block, s2);
            let energy = kept.indices().iter().map(|&i| block[i] * block[i]).sum();
            (kept.indices().iter().map(|&i| start + i).collect(), energy)
        })
        .collect();
    let mut order: Vec<usize> = (0..layout.n_blocks).collect();
    order.sort_by(|&a, &b| per_block[b].1.total_cmp(&per_block[a].1).then(a.cmp(&b)));
    order.truncate(s1);
    order.sort_unstable();
    Support::from_sorted(order.into_iter().flat_map(|b| per_block[b].0.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        classify_support, gen_signal, gen_support, seeded_rng, standard_normal_matrix, unit_column_matrix, KronDims,
        SparseInstance,
        SparsityModel,
    };
    use crate::linalg::kron;
    use rand::seq::index::sample;
    use rand::Rng;

    fn orthonormal(m: usize, n: usize) -> Matrix {
        let had = |i: usize, j: usize| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Matrix::from_fn(m, n, |i, j| had(i, j) / (m as f64).sqrt())
    }

    /// All k-subsets of 0..n in lexicographic order.
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out.sort();
        out
    }

    /// Exhaustive oracle: the feasible support with maximal kept energy.
    fn brute_force_threshold(z: &[f64], s1: usize, s2: usize, layout: BlockLayout) -> Vec<usize> {
        let inner = subsets(layout.block_len, s2);
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for blocks in subsets(layout.n_blocks, s1) {
            // choose one inner subset per block: iterate over the cartesian product
            let mut counters = vec![0usize; blocks.len()];
            loop {
                let mut supp: Vec<usize> = blocks
                    .iter()
                    .zip(&counters)
                    .flat_map(|(&b, &c)| inner[c].iter().map(move |&o| layout.flat(b, o)))
                    .collect();
                supp.sort_unstable();
                let energy: f64 = supp.iter().map(|&i| z[i] * z[i]).sum();
                if energy > best.0 {
                    best = (energy, supp);
                }
                let mut k = 0;
                while k < counters.len() {
                    counters[k] += 1;
                    if counters[k] < inner.len() {
                        break;
                    }
                    counters[k] = 0;
                    k += 1;
                }
                if k == counters.len() {
                    break;
                }
            }
        }
        best.1
    }

    #[test]
    fn threshold_matches_brute_force() {
        let layout = BlockLayout::new(3, 4).unwrap();
        let mut rng = seeded_rng(77);
        for _ in 0..100 {
            let z: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = hierarchical_threshold(&z, 2, 2, layout);
            assert_eq!(fast.indices(), brute_force_threshold(&z, 2, 2, layout).as_slice());
        }
    }

    #[test]
    fn threshold_keeps_feasible_point() {
        let layout = BlockLayout::new(4, 5).unwrap();
        let model = SparsityModel::hierarchical(2, 3, layout).unwrap();
        let mut rng = seeded_rng(1);
        let s = gen_support(&model, &mut rng);
        let z = gen_signal(&s, 20, &mut rng);
        assert_eq!(hierarchical_threshold(&z, 2, 3, layout), s);
    }

    #[test]
    fn threshold_ties_go_to_lowest_index() {
        let layout = BlockLayout::new(3, 4).unwrap();
        let z = vec![1.0; 12];
        assert_eq!(hierarchical_threshold(&z, 2, 2, layout).indices(), &[0, 1, 4, 5]);
        assert_eq!(top_k(&[1.0, -1.0, 1.0], 2).indices(), &[0, 1]);
    }

    #[test]
    fn threshold_output_is_hierarchical() {
        let layout = BlockLayout::new(5, 6).unwrap();
        let mut rng = seeded_rng(12);
        for _ in 0..50 {
            let z: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (s1, s2) = (rng.random_range(0..=5), rng.random_range(0..=6));
            let (a, b) = classify_support(&hierarchical_threshold(&z, s1, s2, layout), layout);
            assert!(a <= s1 && b <= s2);
        }
    }

    #[test]
    fn zero_sparsity_gives_zero() {
        let h = orthonormal(8, 6);
        let res = htp(&h, &[1.0; 8], 0, &SolverConfig::default()).unwrap();
        assert_eq!(res.x_hat.as_slice(), &[0.0; 6]);
        assert!(res.support_hat.is_empty());
        assert!(htp(&h, &[1.0; 8], 7, &SolverConfig::default()).is_err());
    }

    #[test]
    fn orthonormal_recovery_in_one_iteration() {
        let h = orthonormal(8, 8);
        let mut x = vec![0.0; 8];
        x[2] = 1.5;
        x[6] = -0.7;
        let y = h.matvec(&x).unwrap();
        let res = htp(&h, &y, 2, &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        for (a, b) in res.x_hat.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_noiseless_recovery_rate() {
        let mut hits = 0;
        for trial in 0..100 {
            let mut rng = seeded_rng(3000 + trial);
            let h = unit_column_matrix(20, 40, &mut rng);
            let support = Support::new(sample(&mut rng, 40, 3).into_vec(), 40).unwrap();
            let x = gen_signal(&support, 40, &mut rng);
            let y = h.matvec(&x).unwrap();
            let res = htp(&h, &y, 3, &SolverConfig::default()).unwrap();
            if res.support_hat == support {
                hits += 1;
            }
        }
        assert!(hits >= 95, "exact recoveries: {hits}/100");
    }

    #[test]
    fn residual_is_non_increasing() {
        let cfg = SolverConfig::default().with_step(StepRule::InverseSpectral);
        for trial in 0..30 {
            let mut rng = seeded_rng(4000 + trial);
            let h = standard_normal_matrix(15, 30, &mut rng);
            let y: Vec<f64> = standard_normal_matrix(15, 1, &mut rng).into_vec();
            let (_, trace) = htp_traced(&h, &y, 4, &cfg).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{trace:?}");
            let layout = BlockLayout::new(5, 6).unwrap();
            let (_, trace) = hihtp_traced(&h, &y, 2, 2, layout, &cfg).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{trace:?}");
        }
    }

    #[test]
    fn hihtp_full_levels_is_least_squares() {
        let mut rng = seeded_rng(6);
        let h = standard_normal_matrix(12, 6, &mut rng);
        let y: Vec<f64> = standard_normal_matrix(12, 1, &mut rng).into_vec();
        let layout = BlockLayout::new(2, 3).unwrap();
        let res = hihtp(&h, &y, 2, 3, layout, &SolverConfig::default()).unwrap();
        let ls = lstsq(&h, &Matrix::new(12, 1, y).unwrap()).unwrap();
        assert_eq!(res.support_hat.len(), 6);
        for i in 0..6 {
            assert!((res.x_hat[i] - ls[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn hihtp_exact_at_full_dims() {
        let dims = KronDims::new(30, 40, 30, 40).unwrap();
        let model = SparsityModel::hierarchical(5, 5, dims.layout()).unwrap();
        let inst = SparseInstance::generate(dims, &model, f64::INFINITY, &mut seeded_rng(2024)).unwrap();
        let h = kron(&inst.h1, &inst.h2);
        let cfg = SolverConfig::default().with_step(StepRule::ColumnNormalized);
        let res = hihtp(&h, &inst.y, 5, 5, dims.layout(), &cfg).unwrap();
        assert_eq!(res.support_hat, inst.support);
        let err: f64 = res.x_hat.iter().zip(inst.x.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err / inst.x.norm_sq() < 1e-20);
    }

    #[test]
    fn hihtp_terminates_with_overestimated_levels() {
        let dims = KronDims::new(8, 10, 8, 10).unwrap();
        let model = SparsityModel::hierarchical(3, 3, dims.layout()).unwrap();
        let inst = SparseInstance::generate(dims, &model, 10.0, &mut seeded_rng(9)).unwrap();
        let h = kron(&inst.h1, &inst.h2);
        let cfg = SolverConfig { max_iter: 40, ..SolverConfig::default() }.with_step(StepRule::InverseSpectral);
        let res = hihtp(&h, &inst.y, 5, 4, dims.layout(), &cfg).unwrap();
        assert!(res.iterations <= 40);
        assert!(res.x_hat.iter().all(|v| v.is_finite()));
    }
}
