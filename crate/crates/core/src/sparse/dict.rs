//! Dictionary learning by alternating minimization.
//!
//! Codes are refreshed with warm-started coordinate descent, then the
//! dictionary columns are updated one at a time against the code statistics
//! `A = U'U`, `C = X'U` and projected onto the unit ball. Both halves only
//! ever lower the total objective, so the outer trace is non-increasing.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Dictionary, FeatureSet};

use super::{batch_codes_tolerant, GramContext, SparseCodingParams};

#[derive(Debug, Clone)]
pub struct DictLearnResult {
    pub dictionary: Dictionary,
    /// Total objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Atoms that went unused and were reseeded to a poorly reconstructed
    /// feature.
    pub dead_atom_reinits: usize,
    /// Code solves that stopped at the iteration cap and kept their last
    /// iterate. Warm-started descent never increases the objective, so the
    /// trace stays valid; a nonzero count just means the certificates were
    /// not reached on those rows.
    pub nonconverged_codes: usize,
}

/// Learns a `d x K` dictionary with unit-ball column constraints.
pub fn dict_learn(
    features: &FeatureSet,
    atoms: usize,
    params: &SparseCodingParams,
    outer_iters: usize,
    seed: u64,
) -> Result<DictLearnResult> {
    params.validate()?;
    if atoms == 0 {
        return Err(Error::InvalidParam("dictionary needs at least one atom".into()));
    }
    if outer_iters == 0 {
        return Err(Error::InvalidParam("outer_iters must be positive".into()));
    }
    let count = features.count();
    let dim = features.dim();
    if count < atoms {
        log::warn!("learning {atoms} atoms from only {count} features; atoms will start duplicated");
    }

    let mut basis = init_basis(features, atoms, seed)?;
    let mut codes: Vec<Array1<f64>> = vec![Array1::zeros(atoms); count];
    let mut trace = Vec::with_capacity(outer_iters);
    let mut reinits = 0usize;
    let mut nonconverged = 0usize;

    for _ in 0..outer_iters {
        // inference step, warm-started from the previous codes
        let dict = Dictionary::new(basis.clone())?;
        let ctx = GramContext::new(&dict);
        let batch = batch_codes_tolerant(&ctx, features, params, Some(&codes));
        nonconverged += batch.nonconverged;
        for (dst, code) in codes.iter_mut().zip(batch.codes.iter()) {
            dst.assign(code);
        }

        // per-feature residual norms under the current dictionary, used to
        // reseed dead atoms
        let code_mat = stack_codes(&codes, atoms);
        let recon = code_mat.dot(&basis.t()); // T x d
        let mut residual_norms = Array1::zeros(count);
        for i in 0..count {
            let mut acc = 0.0;
            for j in 0..dim {
                let diff = features.data()[[i, j]] - recon[[i, j]];
                acc += diff * diff;
            }
            residual_norms[i] = acc.sqrt();
        }

        // dictionary update: block coordinate descent over columns
        let a = code_mat.t().dot(&code_mat); // K x K
        let c = features.data().t().dot(&code_mat); // d x K
        let mut dead: Vec<usize> = Vec::new();
        for _pass in 0..2 {
            for k in 0..atoms {
                if dead.contains(&k) {
                    continue;
                }
                if a[[k, k]] <= 1e-12 {
                    dead.push(k);
                    continue;
                }
                // b_k <- b_k + (c_k - B a_k) / a_kk, projected onto the ball
                let ba = basis.dot(&a.column(k));
                let mut col = basis.column(k).to_owned();
                for i in 0..dim {
                    col[i] += (c[[i, k]] - ba[i]) / a[[k, k]];
                }
                let norm = col.dot(&col).sqrt();
                if norm <= 1e-12 {
                    dead.push(k);
                    continue;
                }
                if norm > 1.0 {
                    col.mapv_inplace(|v| v / norm);
                }
                basis.column_mut(k).assign(&col);
            }
        }
        for &k in dead.iter() {
            reseed_atom(&mut basis, k, features, &residual_norms);
            reinits += 1;
        }

        // objective after both halves of the iteration
        let recon = stack_codes(&codes, atoms).dot(&basis.t());
        let mut quad = 0.0;
        for i in 0..count {
            for j in 0..dim {
                let diff = features.data()[[i, j]] - recon[[i, j]];
                quad += diff * diff;
            }
        }
        let l1: f64 = codes
            .iter()
            .map(|u| u.iter().map(|v| v.abs()).sum::<f64>())
            .sum();
        trace.push(quad / params.sigma2 + params.lambda * l1);
    }

    Ok(DictLearnResult {
        dictionary: Dictionary::new(basis)?,
        objective_trace: trace,
        dead_atom_reinits: reinits,
        nonconverged_codes: nonconverged,
    })
}

fn stack_codes(codes: &[Array1<f64>], atoms: usize) -> Array2<f64> {
    let mut mat = Array2::zeros((codes.len(), atoms));
    for (i, code) in codes.iter().enumerate() {
        mat.row_mut(i).assign(code);
    }
    mat
}

/// Seeds the initial dictionary with `atoms` distinct features (cycling if
/// there are too few), normalized to unit norm.
fn init_basis(features: &FeatureSet, atoms: usize, seed: u64) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let usable: Vec<usize> = (0..features.count())
        .filter(|&i| {
            let row = features.feature(i);
            row.dot(&row) > 0.0
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Data("cannot seed a dictionary from all-zero features".into()));
    }
    let mut order = usable.clone();
    order.shuffle(&mut rng);

    let dim = features.dim();
    let mut basis = Array2::zeros((dim, atoms));
    for k in 0..atoms {
        let row = features.feature(order[k % order.len()]);
        let norm = row.dot(&row).sqrt();
        for i in 0..dim {
            basis[[i, k]] = row[i] / norm;
        }
    }
    Ok(basis)
}

fn reseed_atom(
    basis: &mut Array2<f64>,
    k: usize,
    features: &FeatureSet,
    residual_norms: &Array1<f64>,
) {
    let mut worst = 0usize;
    for i in 1..residual_norms.len() {
        if residual_norms[i] > residual_norms[worst] {
            worst = i;
        }
    }
    let row = features.feature(worst);
    let norm = row.dot(&row).sqrt();
    if norm <= 0.0 {
        // nothing sensible to reseed from; keep a unit basis vector
        basis.column_mut(k).fill(0.0);
        basis[[0, k]] = 1.0;
        return;
    }
    for i in 0..basis.nrows() {
        basis[[i, k]] = row[i] / norm;
    }
}
