//! Structured-sparse problem generation.
//!
//! Dictionaries and nonzero coefficients are i.i.d. standard normal. Supports
//! come from one of three families over a [`BlockLayout`] of `N1` blocks of
//! length `N2`:
//!
//! * standard: `s` positions anywhere,
//! * hierarchical: `s1` blocks, each with its own `s2` positions,
//! * Kronecker-supported: `s1` blocks sharing one set of `s2` positions.
//!
//! Noise is calibrated per trial: `σ² = ‖Hx‖² / (M̄ · 10^(snr/10))`, so every
//! trial sits at the nominal SNR rather than only on average.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_matvec, BlockLayout, Matrix, Vector};

/// Generator used for every randomized routine in the crate.
pub type TrialRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sparsity {
    Standard { s: usize },
    Hierarchical { s1: usize, s2: usize },
    KroneckerSupported { s1: usize, s2: usize },
}

impl Sparsity {
    pub fn short_name(&self) -> &'static str {
        match self {
            Sparsity::Standard { .. } => "standard",
            Sparsity::Hierarchical { .. } => "hier",
            Sparsity::KroneckerSupported { .. } => "kron",
        }
    }
}

/// A sparsity family together with the block layout it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparsityModel {
    pub sparsity: Sparsity,
    pub layout: BlockLayout,
}

impl SparsityModel {
    pub fn new(sparsity: Sparsity, layout: BlockLayout) -> Result<Self> {
        let BlockLayout { n_blocks, block_len } = layout;
        let ok = match sparsity {
            Sparsity::Standard { s } => s >= 1 && s <= layout.len(),
            Sparsity::Hierarchical { s1, s2 } | Sparsity::KroneckerSupported { s1, s2 } => {
                (1..=n_blocks).contains(&s1) && (1..=block_len).contains(&s2)
            }
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{sparsity:?} is not valid on a {n_blocks}x{block_len} block layout"
            )));
        }
        Ok(Self { sparsity, layout })
    }

    pub fn standard(s: usize, layout: BlockLayout) -> Result<Self> {
        Self::new(Sparsity::Standard { s }, layout)
    }

    pub fn hierarchical(s1: usize, s2: usize, layout: BlockLayout) -> Result<Self> {
        Self::new(Sparsity::Hierarchical { s1, s2 }, layout)
    }

    pub fn kronecker_supported(s1: usize, s2: usize, layout: BlockLayout) -> Result<Self> {
        Self::new(Sparsity::KroneckerSupported { s1, s2 }, layout)
    }

    /// Largest number of nonzero entries a member of the family can have.
    pub fn total_sparsity(&self) -> usize {
        match self.sparsity {
            Sparsity::Standard { s } => s,
            Sparsity::Hierarchical { s1, s2 } | Sparsity::KroneckerSupported { s1, s2 } => s1 * s2,
        }
    }

    /// Upper bounds on (number of nonzero blocks, nonzeros per block).
    pub fn block_sparsity_bounds(&self) -> (usize, usize) {
        match self.sparsity {
            Sparsity::Standard { s } => (s.min(self.layout.n_blocks), s.min(self.layout.block_len)),
            Sparsity::Hierarchical { s1, s2 } | Sparsity::KroneckerSupported { s1, s2 } => (s1, s2),
        }
    }

    pub fn is_kronecker_supported(&self) -> bool {
        matches!(self.sparsity, Sparsity::KroneckerSupported { .. })
    }
}

/// Sorted, duplicate-free set of positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Support(Vec<usize>);

impl Support {
    /// Sorts and deduplicates `indices`; every index must be below `n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidParameter(format!(
                    "support index {last} out of range for length {n}"
                )));
            }
        }
        Ok(Self(indices))
    }

    /// Caller guarantees the indices are strictly increasing.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Positions whose magnitude exceeds `tol`.
    pub fn of_nonzeros(x: &[f64], tol: f64) -> Self {
        Self((0..x.len()).filter(|&i| x[i].abs() > tol).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// 0/1 indicator of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &i in &self.0 {
            v[i] = 1.0;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KronDims {
    pub m1: usize,
    pub n1: usize,
    pub m2: usize,
    pub n2: usize,
}

impl KronDims {
    pub fn new(m1: usize, n1: usize, m2: usize, n2: usize) -> Result<Self> {
        if [m1, n1, m2, n2].contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "dimensions ({m1},{n1},{m2},{n2}) must be positive"
            )));
        }
        Ok(Self { m1, n1, m2, n2 })
    }

    /// Blocks are indexed by the columns of `H1`, entries within a block by `H2`.
    pub fn layout(&self) -> BlockLayout {
        BlockLayout { n_blocks: self.n1, block_len: self.n2 }
    }

    pub fn measurements(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn signal_len(&self) -> usize {
        self.n1 * self.n2
    }
}

/// A generated recovery problem `y = (H1 ⊗ H2) x + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub h1: Matrix,
    pub h2: Matrix,
    pub x: Vector,
    pub support: Support,
    pub y: Vector,
    pub noise_variance: f64,
    pub snr_db: f64,
}

impl SparseInstance {
    /// Draws dictionaries, support, signal and noise, in that order, from `rng`.
    pub fn generate(
        dims: KronDims,
        model: &SparsityModel,
        snr_db: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if model.layout != dims.layout() {
            return Err(Error::DimensionMismatch(format!(
                "model layout {:?} does not match dimensions {dims:?}",
                model.layout
            )));
        }
        let (h1, h2) = gen_dictionary(dims.m1, dims.n1, dims.m2, dims.n2, rng);
        let support = gen_support(model, rng);
        let x = gen_signal(&support, dims.signal_len(), rng);
        let y_clean = kron_matvec(&h1, &h2, &x)?;
        let (y, noise_variance) = add_noise(&y_clean, snr_db, rng)?;
        Ok(Self { h1, h2, x, support, y, noise_variance, snr_db })
    }

    pub fn dims(&self) -> KronDims {
        KronDims { m1: self.h1.rows(), n1: self.h1.cols(), m2: self.h2.rows(), n2: self.h2.cols() }
    }
}

pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Gaussian matrix with every column scaled to unit Euclidean norm.
pub fn unit_column_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let mut h = standard_normal_matrix(rows, cols, rng);
    for j in 0..cols {
        let norm = h.col(j).norm();
        if norm > 0.0 {
            for i in 0..rows {
                h[(i, j)] /= norm;
            }
        }
    }
    h
}

/// Gaussian matrix with entries of variance `1/rows`, so columns have unit
/// expected norm. Used for restricted-isometry experiments.
pub fn scaled_gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let mut h = standard_normal_matrix(rows, cols, rng);
    h.scale(1.0 / (rows as f64).sqrt());
    h
}

/// `(H1, H2)` with i.i.d. standard normal entries, `H1` drawn first.
pub fn gen_dictionary(
    m1: usize,
    n1: usize,
    m2: usize,
    n2: usize,
    rng: &mut impl Rng,
) -> (Matrix, Matrix) {
    let h1 = standard_normal_matrix(m1, n1, rng);
    let h2 = standard_normal_matrix(m2, n2, rng);
    (h1, h2)
}

pub fn gen_support(model: &SparsityModel, rng: &mut impl Rng) -> Support {
    let layout = model.layout;
    let mut indices = match model.sparsity {
        Sparsity::Standard { s } => sample(rng, layout.len(), s).into_vec(),
        Sparsity::Hierarchical { s1, s2 } => {
            let blocks = sorted_sample(rng, layout.n_blocks, s1);
            let mut out = Vec::with_capacity(s1 * s2);
            for b in blocks {
                for off in sorted_sample(rng, layout.block_len, s2) {
                    out.push(layout.flat(b, off));
                }
            }
            out
        }
        Sparsity::KroneckerSupported { s1, s2 } => {
            let blocks = sorted_sample(rng, layout.n_blocks, s1);
            let inner = sorted_sample(rng, layout.block_len, s2);
            blocks
                .iter()
                .flat_map(|&b| inner.iter().map(move |&off| layout.flat(b, off)))
                .collect()
        }
    };
    indices.sort_unstable();
    Support::from_sorted(indices)
}

fn sorted_sample(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Standard normal values on `support`, zero elsewhere.
pub fn gen_signal(support: &Support, n: usize, rng: &mut impl Rng) -> Vector {
    let mut x = Vector::zeros(n);
    for &i in support.indices() {
        x[i] = rng.sample(StandardNormal);
    }
    x
}

/// Adds white Gaussian noise at `snr_db` relative to the realized energy of
/// `y_clean`. Returns the noisy vector and the noise variance used.
pub fn add_noise(y_clean: &[f64], snr_db: f64, rng: &mut impl Rng) -> Result<(Vector, f64)> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("SNR {snr_db} dB")));
    }
    let energy: f64 = y_clean.iter().map(|v| v * v).sum();
    if energy == 0.0 || y_clean.is_empty() {
        return Err(Error::ZeroSignal("SNR"));
    }
    let variance = energy / (y_clean.len() as f64 * 10f64.powf(snr_db / 10.0));
    let sigma = variance.sqrt();
    let y = y_clean
        .iter()
        .map(|&v| {
            let n: f64 = rng.sample(StandardNormal);
            v + sigma * n
        })
        .collect::<Vec<_>>();
    Ok((Vector::from(y), variance))
}

/// `(number of blocks touched, largest per-block count)`.
pub fn classify_support(support: &Support, layout: BlockLayout) -> (usize, usize) {
    let mut s1 = 0;
    let mut s2 = 0;
    let mut current = None;
    let mut run = 0;
    for &i in support.indices() {
        let b = layout.block_of(i);
        if current == Some(b) {
            run += 1;
        } else {
            current = Some(b);
            s1 += 1;
            run = 1;
        }
        s2 = s2.max(run);
    }
    (s1, s2)
}

/// Mixes a master seed with trial coordinates (SplitMix64 finalizer), so a
/// trial's randomness depends only on its coordinates and not on run order.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    coords.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}

pub fn seeded_rng(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(n1: usize, n2: usize) -> BlockLayout {
        BlockLayout::new(n1, n2).unwrap()
    }

    #[test]
    fn dictionary_shapes_and_determinism() {
        let (h1, h2) = gen_dictionary(30, 40, 30, 40, &mut seeded_rng(1));
        assert_eq!(h1.shape(), (30, 40));
        assert_eq!(h2.shape(), (30, 40));
        let (g1, g2) = gen_dictionary(30, 40, 30, 40, &mut seeded_rng(1));
        assert_eq!(h1, g1);
        assert_eq!(h2, g2);
    }

    #[test]
    fn dictionary_entries_have_zero_mean() {
        let (h1, _) = gen_dictionary(100, 200, 1, 1, &mut seeded_rng(9));
        let n = h1.as_slice().len() as f64;
        let mean = h1.as_slice().iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn standard_support_size() {
        let model = SparsityModel::standard(15, layout(40, 40)).unwrap();
        let s = gen_support(&model, &mut seeded_rng(3));
        assert_eq!(s.len(), 15);
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn kronecker_support_is_kron_of_indicators() {
        let lay = layout(40, 40);
        let model = SparsityModel::kronecker_supported(5, 5, lay).unwrap();
        let s = gen_support(&model, &mut seeded_rng(4));
        let blocks: Vec<usize> = {
            let mut b: Vec<usize> = s.indices().iter().map(|&i| lay.block_of(i)).collect();
            b.dedup();
            b
        };
        let inner: Vec<usize> =
            s.indices().iter().filter(|&&i| lay.block_of(i) == blocks[0]).map(|&i| lay.offset_of(i)).collect();
        assert_eq!(blocks.len(), 5);
        assert_eq!(inner.len(), 5);
        let a = Support::new(blocks, 40).unwrap().indicator(40);
        let b = Support::new(inner, 40).unwrap().indicator(40);
        let kron: Vec<f64> = a.iter().flat_map(|&u| b.iter().map(move |&v| u * v)).collect();
        assert_eq!(s.indicator(1600), kron);
        assert_eq!(classify_support(&s, lay), (5, 5));
    }

    #[test]
    fn hierarchical_full_block() {
        let lay = layout(6, 4);
        let model = SparsityModel::hierarchical(1, 4, lay).unwrap();
        let s = gen_support(&model, &mut seeded_rng(5));
        let b = lay.block_of(s.indices()[0]);
        assert_eq!(s.indices(), &[b * 4, b * 4 + 1, b * 4 + 2, b * 4 + 3]);
    }

    #[test]
    fn model_invariants_enforced() {
        let lay = layout(4, 5);
        assert!(SparsityModel::standard(0, lay).is_err());
        assert!(SparsityModel::standard(21, lay).is_err());
        assert!(SparsityModel::hierarchical(5, 1, lay).is_err());
        assert!(SparsityModel::kronecker_supported(1, 6, lay).is_err());
        assert!(SparsityModel::kronecker_supported(4, 5, lay).is_ok());
    }

    #[test]
    fn signal_on_support_only() {
        assert_eq!(gen_signal(&Support::empty(), 7, &mut seeded_rng(0)).as_slice(), &[0.0; 7]);
        let s = Support::new(vec![1, 5, 9], 12).unwrap();
        let x = gen_signal(&s, 12, &mut seeded_rng(2));
        let nz = Support::of_nonzeros(&x, 0.0);
        assert_eq!(nz, s);
        assert_eq!(x, gen_signal(&s, 12, &mut seeded_rng(2)));
        let lay = layout(40, 40);
        let s15 = gen_support(&SparsityModel::standard(15, lay).unwrap(), &mut seeded_rng(8));
        let x15 = gen_signal(&s15, 1600, &mut seeded_rng(8));
        assert_eq!(Support::of_nonzeros(&x15, 0.0).len(), 15);
    }

    #[test]
    fn noise_calibration() {
        for snr in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0] {
            let mut rng = seeded_rng(11);
            let mut acc = 0.0;
            for _ in 0..100 {
                let y: Vec<f64> = (0..900).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let (noisy, var) = add_noise(&y, snr, &mut rng).unwrap();
                let e_sig: f64 = y.iter().map(|v| v * v).sum();
                let e_noise: f64 = noisy.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                acc += 10.0 * (e_sig / e_noise).log10();
                let expected = e_sig / (900.0 * 10f64.powf(snr / 10.0));
                assert!((var - expected).abs() <= 1e-12 * expected);
            }
            let realized = acc / 100.0;
            assert!((realized - snr).abs() < 1.0, "snr {snr}: realized {realized}");
        }
    }

    #[test]
    fn noise_limits_and_errors() {
        let (y, var) = add_noise(&[1.0, 2.0], f64::INFINITY, &mut seeded_rng(0)).unwrap();
        assert_eq!(var, 0.0);
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
        assert_eq!(add_noise(&[0.0, 0.0], 10.0, &mut seeded_rng(0)), Err(Error::ZeroSignal("SNR")));
    }

    #[test]
    fn classify_basic() {
        let lay = layout(3, 4);
        assert_eq!(classify_support(&Support::empty(), lay), (0, 0));
        let s = Support::new(vec![0, 1, 2, 9], 12).unwrap();
        assert_eq!(classify_support(&s, lay), (2, 3));
    }

    #[test]
    fn standard_supports_satisfy_block_count_inequality() {
        let lay = layout(40, 40);
        let model = SparsityModel::standard(15, lay).unwrap();
        let mut rng = seeded_rng(21);
        for _ in 0..2000 {
            let (s1, s2) = classify_support(&gen_support(&model, &mut rng), lay);
            assert!(s1 + s2 <= 16);
        }
    }

    #[test]
    fn seeds_depend_on_coordinates() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(8, &[1, 2]));
    }

    #[test]
    fn instance_generation_is_reproducible() {
        let dims = KronDims::new(6, 8, 5, 7).unwrap();
        let model = SparsityModel::hierarchical(2, 3, dims.layout()).unwrap();
        let a = SparseInstance::generate(dims, &model, 10.0, &mut seeded_rng(42)).unwrap();
        let b = SparseInstance::generate(dims, &model, 10.0, &mut seeded_rng(42)).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y.len(), 30);
        assert_eq!(a.x.len(), 56);
        assert_eq!(Support::of_nonzeros(&a.x, 0.0), a.support);
        assert_eq!(a.dims(), dims);
    }
}
