//! Dense linear algebra, distribution functions and seeded sampling.

mod eigen;
mod matrix;
mod rng;
mod special;

pub use eigen::{default_ridge, inverse_sqrt_spd, sym_eigen, EigenDecomposition};
pub(crate) use eigen::{inverse_from_eigen, inverse_sqrt_from_eigen, ridge_if_needed};
pub use matrix::{dot, norm2, solve, Matrix};
pub use rng::{
    ar1_matrix, sample_bernoulli, sample_mvn, sample_mvn_with_root, sqrt_psd, RngStream,
};
pub use special::{
    chi_square_cdf, chi_square_sf, ln_gamma, logistic, normal_quantile, regularized_gamma,
};
