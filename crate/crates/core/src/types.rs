//! Domain containers shared by every stage of the pipeline.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they can be shared freely across threads.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn all_finite<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

/// A set of local features: `T` rows of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Array2<f64>,
}

impl FeatureSet {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Data(format!(
                "empty feature set: T={}, d={}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !all_finite(data.iter()) {
            return Err(Error::Data("feature set contains non-finite values".into()));
        }
        Ok(Self { data })
    }

    /// Number of local features `T`.
    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    /// Feature dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn feature(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Deterministically keeps at most `cap` rows, chosen by a seeded
    /// shuffle. A cap of zero or above `T` returns the set unchanged.
    pub fn subsample(&self, cap: usize, seed: u64) -> Self {
        if cap == 0 || cap >= self.count() {
            return self.clone();
        }
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..self.count()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        order.truncate(cap);
        order.sort_unstable();
        let mut data = Array2::zeros((cap, self.dim()));
        for (dst, &src) in order.iter().enumerate() {
            data.row_mut(dst).assign(&self.data.row(src));
        }
        Self { data }
    }

    /// Stacks several feature sets of equal dimension into one.
    pub fn concat(sets: &[FeatureSet]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidParam("concat of zero feature sets".into()))?;
        let d = first.dim();
        let total: usize = sets.iter().map(|s| s.count()).sum();
        let mut data = Array2::zeros((total, d));
        let mut row = 0;
        for s in sets {
            if s.dim() != d {
                return Err(Error::Dimension(format!(
                    "cannot concat feature sets of dim {} and {}",
                    d,
                    s.dim()
                )));
            }
            for r in s.data.rows() {
                data.row_mut(row).assign(&r);
                row += 1;
            }
        }
        Self::new(data)
    }
}

/// Basis matrix `B` (`d x K`, atoms as columns) with column norms <= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    basis: Array2<f64>,
}

impl Dictionary {
    pub const COLUMN_NORM_SLACK: f64 = 1e-9;

    pub fn new(basis: Array2<f64>) -> Result<Self> {
        if basis.nrows() == 0 || basis.ncols() == 0 {
            return Err(Error::Data("empty dictionary".into()));
        }
        if !all_finite(basis.iter()) {
            return Err(Error::Data("dictionary contains non-finite values".into()));
        }
        for (k, col) in basis.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm == 0.0 {
                return Err(Error::Data(format!("dictionary column {k} is all-zero")));
            }
            if norm > 1.0 + Self::COLUMN_NORM_SLACK {
                return Err(Error::Data(format!(
                    "dictionary column {k} has norm {norm} > 1"
                )));
            }
        }
        Ok(Self { basis })
    }

    /// Feature dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of atoms `K`.
    pub fn atoms(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn atom(&self, k: usize) -> ArrayView1<'_, f64> {
        self.basis.column(k)
    }
}

/// A sparse coefficient vector over the dictionary atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    values: Array1<f64>,
}

impl SparseCode {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if !all_finite(values.iter()) {
            return Err(Error::Data("sparse code contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count of exactly nonzero coefficients.
    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Indices of the nonzero coefficients, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }
}

/// Diagonal-covariance Gaussian mixture: `m` components over dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Array1<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
    var_floor: f64,
}

impl GmmModel {
    pub const WEIGHT_SUM_TOL: f64 = 1e-9;

    pub fn new(
        weights: Array1<f64>,
        means: Array2<f64>,
        variances: Array2<f64>,
        var_floor: f64,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::Data("mixture with zero components".into()));
        }
        if means.nrows() != m || variances.nrows() != m || means.ncols() != variances.ncols() {
            return Err(Error::Dimension(format!(
                "inconsistent mixture shapes: weights {}, means {:?}, variances {:?}",
                m,
                means.dim(),
                variances.dim()
            )));
        }
        if !all_finite(weights.iter()) || !all_finite(means.iter()) || !all_finite(variances.iter())
        {
            return Err(Error::Data("mixture contains non-finite values".into()));
        }
        let sum: f64 = weights.sum();
        if (sum - 1.0).abs() > Self::WEIGHT_SUM_TOL {
            return Err(Error::Data(format!("mixture weights sum to {sum}, not 1")));
        }
        if weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::Data("mixture has a non-positive weight".into()));
        }
        if !(var_floor > 0.0 && var_floor.is_finite()) {
            return Err(Error::Data(format!("invalid variance floor {var_floor}")));
        }
        // tiny slack for round-tripping through storage
        if variances.iter().any(|v| *v < var_floor * (1.0 - 1e-12)) {
            return Err(Error::Data("mixture variance below the floor".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
            var_floor,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn means(&self) -> ArrayView2<'_, f64> {
        self.means.view()
    }

    pub fn variances(&self) -> ArrayView2<'_, f64> {
        self.variances.view()
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }
}

/// Memory layout of an encoded image vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FvLayout {
    /// `K` contiguous sub-vectors of length `dim`, one per dictionary atom.
    Scfvc { dim: usize, atoms: usize },
    /// Mean-gradient block then (unless `mean_only`) variance-gradient
    /// block, each grouped per component in sub-vectors of length `dim`.
    GmmFvc {
        dim: usize,
        components: usize,
        mean_only: bool,
    },
}

impl FvLayout {
    pub fn expected_len(&self) -> usize {
        match *self {
            FvLayout::Scfvc { dim, atoms } => dim * atoms,
            FvLayout::GmmFvc {
                dim,
                components,
                mean_only,
            } => {
                let blocks = if mean_only { 1 } else { 2 };
                blocks * dim * components
            }
        }
    }

    /// Length of the sub-vectors that intra-normalization operates on.
    pub fn subvector_len(&self) -> usize {
        match *self {
            FvLayout::Scfvc { dim, .. } | FvLayout::GmmFvc { dim, .. } => dim,
        }
    }
}

/// A pooled, encoded image representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    values: Array1<f64>,
    layout: FvLayout,
}

impl FisherVector {
    pub fn new(values: Array1<f64>, layout: FvLayout) -> Result<Self> {
        if values.len() != layout.expected_len() {
            return Err(Error::Dimension(format!(
                "fisher vector length {} does not match layout {:?}",
                values.len(),
                layout
            )));
        }
        if !all_finite(values.iter()) {
            return Err(Error::Data("fisher vector contains non-finite values".into()));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn layout(&self) -> FvLayout {
        self.layout
    }
}

/// Mean-centered linear projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    components: Array2<f64>,
    eigenvalues: Array1<f64>,
    whiten: bool,
}

impl PcaModel {
    pub fn new(
        mean: Array1<f64>,
        components: Array2<f64>,
        eigenvalues: Array1<f64>,
        whiten: bool,
    ) -> Result<Self> {
        if components.nrows() != mean.len() || components.ncols() != eigenvalues.len() {
            return Err(Error::Dimension(format!(
                "inconsistent projection shapes: mean {}, components {:?}, eigenvalues {}",
                mean.len(),
                components.dim(),
                eigenvalues.len()
            )));
        }
        if components.ncols() == 0 {
            return Err(Error::Data("projection with zero components".into()));
        }
        if !all_finite(mean.iter())
            || !all_finite(components.iter())
            || !all_finite(eigenvalues.iter())
        {
            return Err(Error::Data("projection contains non-finite values".into()));
        }
        if eigenvalues.windows(2).into_iter().any(|w| w[0] < w[1]) {
            return Err(Error::Data("eigenvalues not sorted descending".into()));
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
            whiten,
        })
    }

    /// Input dimensionality.
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Output dimensionality.
    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn components(&self) -> ArrayView2<'_, f64> {
        self.components.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn whiten(&self) -> bool {
        self.whiten
    }

    /// Number of eigenvalues above `rel_tol` times the largest one.
    pub fn effective_rank(&self, rel_tol: f64) -> usize {
        let max = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
        if max <= 0.0 {
            return 0;
        }
        self.eigenvalues.iter().filter(|v| **v > rel_tol * max).count()
    }
}

/// One-vs-rest linear classifier: one weight vector and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl SvmModel {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::Dimension(format!(
                "classifier shapes disagree: {} weight rows, {} biases",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.nrows() < 2 {
            return Err(Error::Data("classifier needs at least 2 classes".into()));
        }
        if !all_finite(weights.iter()) || !all_finite(bias.iter()) {
            return Err(Error::Data("classifier contains non-finite values".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn bias(&self) -> ArrayView1<'_, f64> {
        self.bias.view()
    }
}
