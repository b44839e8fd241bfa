//! The numerical building blocks: Jacobi eigendecomposition, the inverse
//! square root of a covariance, chi-square tail probabilities and seeded
//! multivariate normal draws.
//!
//! ```text
//! cargo run --release --example numerics_tour
//! ```

use sdrmatch::numerics::{
    ar1_matrix, chi_square_sf, default_ridge, inverse_sqrt_spd, normal_quantile, sample_mvn,
    sym_eigen, Matrix, RngStream,
};

fn main() -> sdrmatch::Result<()> {
    let sigma = ar1_matrix(4, 0.6);
    let eig = sym_eigen(&sigma)?;
    println!("AR(1) eigenvalues: {:?}", eig.eigenvalues);

    let w = inverse_sqrt_spd(&sigma, 0.0)?;
    let check = w.matmul(&sigma)?.matmul(&w)?;
    println!(
        "max |Σ^(-1/2) Σ Σ^(-1/2) − I| = {:.2e}",
        check.sub(&Matrix::identity(4))?.max_abs()
    );
    println!("default ridge for Σ: {:.2e}", default_ridge(&sigma));

    println!("P(χ²₂ > 2) = {:.12} (e⁻¹ = {:.12})", chi_square_sf(2.0, 2)?, (-1.0f64).exp());
    println!("P(χ²₉ > 16.919) = {:.4}", chi_square_sf(16.919, 9)?);
    println!("z(0.975) = {:.6}", normal_quantile(0.975));

    let mut rng = RngStream::new(7, 0);
    let draws = sample_mvn(&mut rng, &[0.0; 4], &sigma, 50_000)?;
    let cov = draws.sample_covariance()?;
    println!("empirical corr(X1, X2) = {:.3} (design 0.6)", cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt());
    Ok(())
}
