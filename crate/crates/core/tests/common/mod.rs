use sdrmatch::numerics::{solve, Matrix, RngStream};

/// Brute-force reference: pooled covariance from its definition, inverse by
/// solving against unit vectors, all pairwise distances, stable sort.
pub fn reference_matches(z: &Matrix, t: &[u8], m: usize, donor_label: u8) -> Vec<Vec<usize>> {
    let (n, k) = (z.rows(), z.cols());
    let mean: Vec<f64> = (0..k).map(|a| (0..n).map(|i| z[(i, a)]).sum::<f64>() / n as f64).collect();
    let cov = Matrix::from_fn(k, k, |a, b| {
        (0..n).map(|i| (z[(i, a)] - mean[a]) * (z[(i, b)] - mean[b])).sum::<f64>() / (n - 1) as f64
    });
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| solve(&cov, &(0..k).map(|i| f64::from(u8::from(i == j))).collect::<Vec<_>>()).unwrap())
        .collect();
    let inv = Matrix::from_fn(k, k, |a, b| 0.5 * (cols[b][a] + cols[a][b]));
    let dist = |i: usize, j: usize| {
        let d: Vec<f64> = (0..k).map(|a| z[(i, a)] - z[(j, a)]).collect();
        let mut q = 0.0;
        for a in 0..k {
            for b in 0..k {
                q += d[a] * inv[(a, b)] * d[b];
            }
        }
        q
    };
    (0..n)
        .filter(|&i| t[i] != donor_label)
        .map(|i| {
            let mut pool: Vec<(f64, usize)> =
                (0..n).filter(|&j| t[j] == donor_label).map(|j| (dist(i, j), j)).collect();
            pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            pool.iter().take(m).map(|p| p.1).collect()
        })
        .collect()
}

/// Random scores on a coarse grid so exact distance ties occur.
pub fn random_instance(seed: u64) -> (Matrix, Vec<u8>, usize) {
    let mut rng = RngStream::new(seed, 1);
    let n = 20 + (rng.uniform() * 181.0) as usize;
    let k = 1 + (rng.uniform() * 5.0) as usize;
    let z = Matrix::from_fn(n, k, |_, _| (rng.uniform() * 8.0).floor() + 0.25 * rng.standard_normal().round());
    let mut t: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.4))).collect();
    t[0] = 1;
    t[1] = 0;
    let m = 1 + (rng.uniform() * 3.0) as usize;
    (z, t, m)
}

pub fn full_rank(z: &Matrix) -> bool {
    let cov = z.sample_covariance().unwrap();
    let eig = sdrmatch::numerics::sym_eigen(&cov).unwrap();
    eig.eigenvalues[z.cols() - 1] > 1e-6 * eig.eigenvalues[0].max(1.0)
}
