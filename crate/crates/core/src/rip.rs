//! Restricted isometry constants of small dictionaries and the Kronecker
//! bounds built from them.
//!
//! For a support family `S`, the constant of `H` is the smallest `δ` with
//! `(1−δ)‖x‖² ≤ ‖Hx‖² ≤ (1+δ)‖x‖²` for all `x` supported in `S`. On a fixed
//! support `T` this is `max(1 − λ_min, λ_max − 1)` of the Gram matrix
//! `H_Tᵀ H_T`, and over a family it is the maximum over its maximal supports
//! (smaller supports give principal submatrices whose spectra interlace).
//!
//! [`empirical_ric`] and [`empirical_set_ric`] compute these exactly by
//! enumeration, refusing to run past an enumeration cap. For Kronecker
//! dictionaries the Gram entries come from the factor Grams,
//! `⟨a_i ⊗ b_j, a_k ⊗ b_l⟩ = (H1ᵀH1)_ik (H2ᵀH2)_jl`, so `H1 ⊗ H2` is never formed.
//!
//! The bounds: for a family in which every member has at most `s1` nonzero
//! blocks of at most `s2` entries, `δ(H1 ⊗ H2) ≤ (1+δ_s1(H1))(1+δ_s2(H2)) − 1`.
//! For plain `s`-sparsity this becomes a maximum over `s1 + s2 = s + 1`
//! ([`standard_bound`]), which never exceeds the classical
//! `(1+δ_s(H1))(1+δ_s(H2)) − 1` ([`prior_bound`]).

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, BlockLayout, Matrix};
use crate::models::{classify_support, Sparsity, SparsityModel, Support};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Slack allowed when checking norm inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-10;

const BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate {
    pub delta: f64,
    /// A support attaining `delta`; the lexicographically first on ties.
    pub extremal_support: Support,
    pub sparsity: usize,
    /// `false` for sampled estimates, which only bound the constant from below.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub empirical: f64,
    pub theorem1_bound: f64,
    pub prior_bound: f64,
    pub model: SparsityModel,
}

/// Deviation of the Gram spectrum from 1.
fn isometry_deviation(gram: &Matrix) -> f64 {
    let ev = symmetric_eigenvalues(gram);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (1.0 - lo).max(hi - 1.0).max(0.0),
        _ => 0.0,
    }
}

fn sub_gram(support: &[usize], entry: &(impl Fn(usize, usize) -> f64 + ?Sized)) -> Matrix {
    let k = support.len();
    let mut g = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = entry(support[a], support[b]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self { n, current: (k <= n).then(|| (0..k).collect()) }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let k = cur.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// All maximal supports of a sparsity family, in lexicographic order of
/// (block choice, within-block choices).
fn family_supports(model: &SparsityModel) -> Box<dyn Iterator<Item = Vec<usize>> + Send> {
    let layout = model.layout;
    match model.sparsity {
        Sparsity::Standard { s } => Box::new(Combinations::new(layout.len(), s)),
        Sparsity::KroneckerSupported { s1, s2 } => {
            let inner: Vec<Vec<usize>> = Combinations::new(layout.block_len, s2).collect();
            Box::new(Combinations::new(layout.n_blocks, s1).flat_map(move |blocks| {
                let inner = inner.clone();
                inner.into_iter().map(move |offs| {
                    blocks.iter().flat_map(|&b| offs.iter().map(move |&o| layout.flat(b, o))).collect()
                })
            }))
        }
        Sparsity::Hierarchical { s1, s2 } => {
            let inner: Vec<Vec<usize>> = Combinations::new(layout.block_len, s2).collect();
            Box::new(Combinations::new(layout.n_blocks, s1).flat_map(move |blocks| {
                Odometer::new(blocks.len(), inner.len()).map({
                    let inner = inner.clone();
                    let blocks = blocks.clone();
                    move |digits| {
                        blocks
                            .iter()
                            .zip(&digits)
                            .flat_map(|(&b, &d)| inner[d].iter().map(move |&o| layout.flat(b, o)))
                            .collect()
                    }
                })
            }))
        }
    }
}

fn family_size(model: &SparsityModel) -> u128 {
    let layout = model.layout;
    match model.sparsity {
        Sparsity::Standard { s } => binomial(layout.len(), s),
        Sparsity::KroneckerSupported { s1, s2 } => {
            binomial(layout.n_blocks, s1).saturating_mul(binomial(layout.block_len, s2))
        }
        Sparsity::Hierarchical { s1, s2 } => {
            let inner = binomial(layout.block_len, s2);
            (0..s1).fold(binomial(layout.n_blocks, s1), |acc, _| acc.saturating_mul(inner))
        }
    }
}

/// Counts through `base^digits` values, least significant digit last.
struct Odometer {
    digits: Option<Vec<usize>>,
    base: usize,
}

impl Odometer {
    fn new(len: usize, base: usize) -> Self {
        Self { digits: (base > 0).then(|| vec![0; len]), base }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.digits.clone()?;
        let d = self.digits.as_mut().expect("checked above");
        let mut i = d.len();
        loop {
            if i == 0 {
                self.digits = None;
                break;
            }
            i -= 1;
            d[i] += 1;
            if d[i] < self.base {
                break;
            }
            d[i] = 0;
        }
        Some(out)
    }
}

/// Larger deviation wins; on equal deviation the earlier support wins.
fn better(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Maximum deviation over `supports`, evaluated in parallel batches.
fn max_over_supports(
    supports: impl Iterator<Item = Vec<usize>>,
    entry: &(impl Fn(usize, usize) -> f64 + Sync),
) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut supports = supports.peekable();
    while supports.peek().is_some() {
        let batch: Vec<Vec<usize>> = supports.by_ref().take(BATCH).collect();
        let local = batch
            .into_par_iter()
            .map(|s| (isometry_deviation(&sub_gram(&s, entry)), s))
            .reduce_with(better);
        best = match (best, local) {
            (Some(a), Some(b)) => Some(better(a, b)),
            (a, b) => a.or(b),
        };
    }
    best.unwrap_or((0.0, Vec::new()))
}

fn check_cap(count: u128, cap: u64) -> Result<()> {
    if count > cap as u128 {
        return Err(Error::EnumerationCap { count, cap });
    }
    Ok(())
}

/// Exact standard RIC of order `s`, enumerating at most [`DEFAULT_ENUMERATION_CAP`] supports.
pub fn empirical_ric(h: &Matrix, s: usize) -> Result<RicEstimate> {
    empirical_ric_capped(h, s, DEFAULT_ENUMERATION_CAP)
}

pub fn empirical_ric_capped(h: &Matrix, s: usize, cap: u64) -> Result<RicEstimate> {
    let n = h.cols();
    if s > n {
        return Err(Error::InvalidParameter(format!("order {s} exceeds the {n} columns")));
    }
    check_cap(binomial(n, s), cap)?;
    let gram = h.gram();
    let (delta, support) = max_over_supports(Combinations::new(n, s), &|i, j| gram[(i, j)]);
    Ok(RicEstimate { delta, extremal_support: Support::from_sorted(support), sparsity: s, exhaustive: true })
}

/// Exact RICs of orders `1..=max_order`.
pub fn ric_profile(h: &Matrix, max_order: usize, cap: u64) -> Result<Vec<RicEstimate>> {
    (1..=max_order).map(|s| empirical_ric_capped(h, s, cap)).collect()
}

/// Lower bound on the order-`s` RIC from `samples` uniformly drawn supports.
pub fn sampled_ric(h: &Matrix, s: usize, samples: usize, rng: &mut impl Rng) -> Result<RicEstimate> {
    let n = h.cols();
    if s > n {
        return Err(Error::InvalidParameter(format!("order {s} exceeds the {n} columns")));
    }
    let gram = h.gram();
    let supports: Vec<Vec<usize>> = (0..samples)
        .map(|_| {
            let mut v = sample(rng, n, s).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    let (delta, support) = max_over_supports(supports.into_iter(), &|i, j| gram[(i, j)]);
    Ok(RicEstimate { delta, extremal_support: Support::from_sorted(support), sparsity: s, exhaustive: false })
}

/// Exact RIC of `h1 ⊗ h2` over the support family of `model`.
pub fn empirical_set_ric(h1: &Matrix, h2: &Matrix, model: &SparsityModel) -> Result<RicEstimate> {
    empirical_set_ric_capped(h1, h2, model, DEFAULT_ENUMERATION_CAP)
}

pub fn empirical_set_ric_capped(h1: &Matrix, h2: &Matrix, model: &SparsityModel, cap: u64) -> Result<RicEstimate> {
    let layout = model.layout;
    if layout.n_blocks != h1.cols() || layout.block_len != h2.cols() {
        return Err(Error::DimensionMismatch(format!(
            "layout {layout:?} does not match factors with {} and {} columns",
            h1.cols(),
            h2.cols()
        )));
    }
    check_cap(family_size(model), cap)?;
    let (g1, g2) = (h1.gram(), h2.gram());
    let n2 = layout.block_len;
    let entry = |i: usize, j: usize| g1[(i / n2, j / n2)] * g2[(i % n2, j % n2)];
    let (delta, support) = max_over_supports(family_supports(model), &entry);
    Ok(RicEstimate {
        delta,
        extremal_support: Support::from_sorted(support),
        sparsity: model.total_sparsity(),
        exhaustive: true,
    })
}

fn delta_of(rics: &[RicEstimate], order: usize, factor: &'static str) -> Result<f64> {
    if order == 0 {
        return Ok(0.0);
    }
    rics.iter()
        .find(|r| r.sparsity == order)
        .map(|r| r.delta)
        .ok_or(Error::MissingRicOrder { factor, order })
}

/// `(1+δ1)(1+δ2) − 1`, the bound for `(s1, s2)`-hierarchical sparsity.
pub fn hierarchical_bound(delta1: f64, delta2: f64) -> f64 {
    (1.0 + delta1) * (1.0 + delta2) - 1.0
}

/// Bound for `(s1, s2)`-Kronecker-supported sparsity. The shared
/// within-block support does not improve on the hierarchical bound.
pub fn kronecker_supported_bound(delta1: f64, delta2: f64) -> f64 {
    hierarchical_bound(delta1, delta2)
}

/// The classical `s`-sparse bound `(1+δ_s(H1))(1+δ_s(H2)) − 1`.
pub fn prior_bound(ric1_s: f64, ric2_s: f64) -> f64 {
    (1.0 + ric1_s) * (1.0 + ric2_s) - 1.0
}

/// `max_{1≤s1≤s} (1+δ_s1(H1))(1+δ_{s+1−s1}(H2)) − 1`.
///
/// Orders beyond the factor widths are clamped (`s1 ≤ n1`, `s+1−s1 ≤ n2`),
/// since a block count or block sparsity can never exceed them.
pub fn standard_bound(ric1: &[RicEstimate], ric2: &[RicEstimate], s: usize, layout: BlockLayout) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in 1..=s.min(layout.n_blocks) {
        let b = (s + 1 - a).min(layout.block_len);
        best = best.max(hierarchical_bound(delta_of(ric1, a, "H1")?, delta_of(ric2, b, "H2")?));
    }
    Ok(if best.is_finite() { best } else { 0.0 })
}

/// The bound `sup_x (1+δ_{s1(x)}(H1))(1+δ_{s2(x)}(H2)) − 1` specialized to `model`.
pub fn theorem1_bound(ric1: &[RicEstimate], ric2: &[RicEstimate], model: &SparsityModel) -> Result<f64> {
    match model.sparsity {
        Sparsity::Standard { s } => standard_bound(ric1, ric2, s, model.layout),
        Sparsity::Hierarchical { s1, s2 } => {
            Ok(hierarchical_bound(delta_of(ric1, s1, "H1")?, delta_of(ric2, s2, "H2")?))
        }
        Sparsity::KroneckerSupported { s1, s2 } => {
            Ok(kronecker_supported_bound(delta_of(ric1, s1, "H1")?, delta_of(ric2, s2, "H2")?))
        }
    }
}

/// Empirical constant, specialized bound and the earlier bound for `model`.
///
/// The earlier bound is the classical `s`-sparse one for standard models
/// (orders clamped to the factor widths) and the hierarchical bound, which
/// predates this analysis, for the two block models.
pub fn bound_report(h1: &Matrix, h2: &Matrix, model: &SparsityModel, cap: u64) -> Result<BoundReport> {
    let empirical = empirical_set_ric_capped(h1, h2, model, cap)?.delta;
    let (n1, n2) = (model.layout.n_blocks, model.layout.block_len);
    let (orders1, orders2): (Vec<usize>, Vec<usize>) = match model.sparsity {
        Sparsity::Standard { s } => ((1..=s.min(n1)).collect(), (1..=s.min(n2)).collect()),
        Sparsity::Hierarchical { s1, s2 } | Sparsity::KroneckerSupported { s1, s2 } => (vec![s1], vec![s2]),
    };
    let ric1 = orders1.iter().map(|&k| empirical_ric_capped(h1, k, cap)).collect::<Result<Vec<_>>>()?;
    let ric2 = orders2.iter().map(|&k| empirical_ric_capped(h2, k, cap)).collect::<Result<Vec<_>>>()?;
    let theorem1 = theorem1_bound(&ric1, &ric2, model)?;
    let prior = match model.sparsity {
        Sparsity::Standard { s } => prior_bound(delta_of(&ric1, s.min(n1), "H1")?, delta_of(&ric2, s.min(n2), "H2")?),
        _ => theorem1,
    };
    Ok(BoundReport { empirical, theorem1_bound: theorem1, prior_bound: prior, model: *model })
}

/// Checks, for one `x`, the two norm sandwiches the Kronecker bound is built from:
///
/// ```text
/// (1−δ_{s1})‖H2X‖_F² ≤ ‖H1(H2X)ᵀ‖_F² ≤ (1+δ_{s1})‖H2X‖_F²
/// (1−δ_{s2})‖X‖_F²   ≤ ‖H2X‖_F²      ≤ (1+δ_{s2})‖X‖_F²
/// ```
///
/// with `(s1, s2)` the block counts of `x` and the constants computed exactly.
pub fn verify_proof_inequalities(h1: &Matrix, h2: &Matrix, x: &[f64], layout: BlockLayout) -> Result<bool> {
    if layout.n_blocks != h1.cols() || layout.block_len != h2.cols() || x.len() != layout.len() {
        return Err(Error::DimensionMismatch("x, layout and factors disagree".into()));
    }
    let (s1, s2) = classify_support(&Support::of_nonzeros(x, 0.0), layout);
    let d1 = if s1 == 0 { 0.0 } else { empirical_ric(h1, s1)?.delta };
    let d2 = if s2 == 0 { 0.0 } else { empirical_ric(h2, s2)?.delta };

    let x_mat = Matrix::unvec(x, layout.block_len, layout.n_blocks)?;
    let a = h2.matmul(&x_mat)?;
    let b = h1.matmul_t(&a)?;
    let (nx, na, nb) = (x_mat.frobenius_norm_sq(), a.frobenius_norm_sq(), b.frobenius_norm_sq());

    let within = |lo: f64, v: f64, hi: f64| {
        let slack = INEQUALITY_SLACK * v.abs().max(hi.abs()).max(1.0);
        lo <= v + slack && v <= hi + slack
    };
    Ok(within((1.0 - d1) * na, nb, (1.0 + d1) * na) && within((1.0 - d2) * nx, na, (1.0 + d2) * nx))
}
