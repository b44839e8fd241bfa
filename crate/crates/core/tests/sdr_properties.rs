use proptest::prelude::*;
use sdrmatch::dataset::{load_csv, CsvSchema, Group, ObservationalSample};
use sdrmatch::matching::{build_metric, find_matches, MatchDirection};
use sdrmatch::numerics::{ar1_matrix, dot, norm2, sample_mvn, Matrix, RngStream};
use sdrmatch::sdr::{estimate_central_subspace, estimate_from_rows, project, reduce_covariates};
use sdrmatch::simulation::{Generator, Model, Scenario, ScenarioSpec};

fn two_index_data(seed: u64, n: usize) -> (Matrix, Vec<f64>) {
    let mut rng = RngStream::new(seed, 0);
    let x = sample_mvn(&mut rng, &[0.0; 5], &ar1_matrix(5, 0.3), n).unwrap();
    let y = x
        .row_iter()
        .map(|r| r[0] + r[1] + 0.5 * (r[2] - r[3]).exp() + 0.2 * rng.standard_normal())
        .collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn candidate_is_psd_and_rank_is_capped(seed in 0u64..1000, h in 2usize..12, n in 30usize..200) {
        let (x, y) = two_index_data(seed, n);
        let est = estimate_from_rows(&x, &y, Group::Control, h, 0.05).unwrap();
        prop_assert!(est.eigenvalues.iter().all(|&l| l >= -1e-10));
        prop_assert!(est.test.rank <= 5.min(est.sliced.slice_count() - 1));
        prop_assert!(est.rank >= 1);
        // weighted slice means of standardized data sum to zero
        for a in 0..5 {
            let s: f64 = est.sliced.slice_means.iter().zip(&est.sliced.slice_sizes)
                .map(|(m, &k)| k as f64 * m[a]).sum();
            prop_assert!(s.abs() < 1e-8);
        }
    }

    #[test]
    fn increasing_outcome_transform_leaves_candidate_unchanged(seed in 0u64..1000, h in 2usize..10) {
        let (x, y) = two_index_data(seed, 120);
        let warped: Vec<f64> = y.iter().map(|v| v.powi(3) + (0.5 * v).exp()).collect();
        let a = estimate_from_rows(&x, &y, Group::Control, h, 0.05).unwrap();
        let b = estimate_from_rows(&x, &warped, Group::Control, h, 0.05).unwrap();
        prop_assert_eq!(&a.sliced.assignment, &b.sliced.assignment);
        prop_assert_eq!(a.candidate.as_slice(), b.candidate.as_slice());
    }

    #[test]
    fn rotating_the_basis_keeps_matched_sets(theta in 0.0f64..std::f64::consts::TAU, flip in any::<bool>()) {
        let (x, y) = two_index_data(77, 300);
        let est = estimate_from_rows(&x, &y, Group::Control, 10, 0.05).unwrap();
        prop_assume!(est.rank == 2);
        let s = if flip { -1.0 } else { 1.0 };
        let q = Matrix::from_rows(&[
            vec![theta.cos(), -s * theta.sin()],
            vec![theta.sin(), s * theta.cos()],
        ]).unwrap();
        let treatment: Vec<u8> = (0..300).map(|i| u8::from(i % 3 == 0)).collect();
        let mean = &est.standardization.mean;
        let z = project(mean, &est.composite, &x).unwrap();
        let zq = project(mean, &est.composite.matmul(&q).unwrap(), &x).unwrap();
        let m1 = build_metric(&z).unwrap();
        let m2 = build_metric(&zq).unwrap();
        for i in (0..300).step_by(7) {
            for j in (1..300).step_by(11) {
                let d1 = m1.distance(z.row(i), z.row(j));
                let d2 = m2.distance(zq.row(i), zq.row(j));
                prop_assert!((d1 - d2).abs() <= 1e-8 * (1.0 + d1));
            }
        }
        let a = find_matches(&z, &treatment, &m1, 2, MatchDirection::ForTreated).unwrap();
        let b = find_matches(&zq, &treatment, &m2, 2, MatchDirection::ForTreated).unwrap();
        prop_assert_eq!(a.donors, b.donors);
    }
}

#[test]
fn model_i_control_group_recovers_one_direction() {
    let spec = ScenarioSpec::gaussian(Scenario::Case1(Model::I), 500, 10).unwrap();
    let gen = Generator::new(&spec).unwrap();
    let reps = 200;
    let mut rank_one = 0;
    let mut cos_sum = 0.0;
    for r in 0..reps {
        let data = gen.generate(spec.n, &mut RngStream::new(2025, r)).unwrap();
        let est = estimate_central_subspace(&data.sample, Group::Control, 5, 0.05).unwrap();
        rank_one += usize::from(est.rank == 1);
        let d = est.direction(0);
        cos_sum += d[0].abs() / norm2(&d);
    }
    let share = rank_one as f64 / reps as f64;
    let mean_cos = cos_sum / reps as f64;
    assert!(share >= 0.8, "rank one in {share}");
    assert!(mean_cos >= 0.9, "mean |cos| {mean_cos}");
}

#[test]
fn pure_noise_usually_falls_back_from_rank_zero() {
    let mut fallbacks = 0;
    for r in 0..60 {
        let mut rng = RngStream::new(404, r);
        let x = sample_mvn(&mut rng, &[0.0; 6], &Matrix::identity(6), 300).unwrap();
        let y: Vec<f64> = (0..300).map(|_| rng.standard_normal()).collect();
        let est = estimate_from_rows(&x, &y, Group::Control, 5, 0.05).unwrap();
        fallbacks += usize::from(est.rank_fallback);
        assert_eq!(est.rank, 1);
    }
    assert!(fallbacks > 30, "{fallbacks} of 60");
}

#[test]
fn lalonde_control_dimension_is_two() {
    let cov = ["age", "educ", "black", "hispan", "married", "nodegree", "re74", "re75", "u74", "u75"];
    let schema = CsvSchema::new("treat", "re78", cov.iter().map(|s| s.to_string()).collect());
    let sample = load_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/lalonde.csv"), &schema).unwrap();
    let est = estimate_central_subspace(&sample, Group::Control, 5, 0.05).unwrap();
    assert_eq!(est.rank, 2);
    assert!(!est.standardization.ridge_applied());
}

#[test]
fn reduced_covariates_of_first_coordinate_map() {
    // composite map selecting X1 with zero center reproduces the first column
    let mut rng = RngStream::new(8, 0);
    let x = sample_mvn(&mut rng, &[2.0, -1.0, 0.0], &Matrix::identity(3), 20).unwrap();
    let sel = Matrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]]).unwrap();
    let out = project(&[0.0; 3], &sel, &x).unwrap();
    assert_eq!(out.column(0), x.column(0));
    let drop_third = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let out = project(&[0.0; 3], &drop_third, &x).unwrap();
    for i in 0..20 {
        assert_eq!(out.row(i), &x.row(i)[..2]);
    }
}

#[test]
fn reduction_applies_to_both_groups() {
    let mut rng = RngStream::new(9, 0);
    let x = sample_mvn(&mut rng, &[0.0; 3], &Matrix::identity(3), 200).unwrap();
    let t: Vec<u8> = (0..200).map(|i| u8::from(i % 2 == 0)).collect();
    let y: Vec<f64> = x.row_iter().map(|r| r[0] + 0.1 * r[1]).collect();
    let sample = ObservationalSample::new(x.clone(), t, y).unwrap();
    let est = estimate_central_subspace(&sample, Group::Control, 5, 0.05).unwrap();
    let z = reduce_covariates(&est, &x).unwrap();
    assert_eq!(z.rows(), 200);
    // the reduced covariate of a row is (x − μ̂₀)ᵀ composite
    let c = est.direction(0);
    let centered: Vec<f64> = x.row(3).iter().zip(&est.standardization.mean).map(|(a, b)| a - b).collect();
    assert!((z[(3, 0)] - dot(&centered, &c)).abs() < 1e-12);
}
