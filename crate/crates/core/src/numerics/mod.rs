//! Dense matrix primitives, SVD, proximal operators, PCA, and the shared
//! accelerated proximal gradient solver.

pub mod matrix;
pub mod pca;
pub mod prox;
pub mod solver;
pub mod svd;

#[cfg(test)]
pub(crate) mod test_util;

pub use matrix::{dot, norm2, Matrix};
pub use pca::{pca, PcaResult};
pub use prox::{project_nonneg, prox_nonneg_group, prox_nonneg_l1, prox_nonneg_l2sq};
pub use solver::{apg, ApgOutcome, StopRule};
pub use svd::{nuclear_norm, sigma_max, svd, svt, SvdResult};
