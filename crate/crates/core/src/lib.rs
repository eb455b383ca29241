//! Fisher vector encoding toolkit.
//!
//! Two encoders over the same pipeline: the classic GMM-based Fisher vector
//! and a sparse-coding-based Fisher vector in which the per-feature code is
//! the outer product of the sparse coefficients with the reconstruction
//! residual. Training (dictionary learning, EM), PCA preprocessing, pooling
//! and normalization, a linear one-vs-rest SVM, and the partition-resolution
//! diagnostic are included, along with binary file formats for features and
//! models.

pub mod classifier;
pub mod error;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod pca;
pub mod pooling;
pub mod scfv;
pub mod sparse;
pub mod synthetic;
pub mod types;

pub use classifier::{evaluate, svm_predict, svm_train, svm_train_fv, Metric, Predictions, SvmTrainParams, SvmTrainReport};
pub use error::{Error, Result};
pub use pca::{pca_fit, pca_inverse_transform, pca_transform};
pub use gmm::{gmm_fit_em, gmm_posteriors, gmmfv_encode, gmmfv_encode_raw, GmmFit, GmmFvMode};
pub use pooling::NormalizationSpec;
pub use scfv::{scfv_encode_image, scfv_encode_image_raw, scfv_encode_one, EncodeStats};
pub use sparse::{
    default_lambda, dict_learn, lasso_solve, lasso_solve_batch, lasso_solve_with, omp_solve,
    DictLearnResult, LassoSolution, LassoSolver, OmpSolution, SparseCodingParams,
};
pub use types::{
    Dictionary, FeatureSet, FisherVector, FvLayout, GmmModel, PcaModel, SparseCode, SvmModel,
};
