use proptest::prelude::*;
use sdrmatch::dataset::{
    apply_standardization, csv_string, fit_standardization, load_csv, read_csv, CsvSchema, Group,
    ObservationalSample,
};
use sdrmatch::numerics::{ar1_matrix, sample_mvn, Matrix, RngStream};

const LALONDE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lalonde.csv");

fn lalonde_schema() -> CsvSchema {
    let cov = ["age", "educ", "black", "hispan", "married", "nodegree", "re74", "re75", "u74", "u75"];
    CsvSchema::new("treat", "re78", cov.iter().map(|s| s.to_string()).collect())
}

#[test]
fn lalonde_group_sizes() {
    let s = load_csv(LALONDE, &lalonde_schema()).unwrap();
    assert_eq!(s.n(), 614);
    assert_eq!(s.p(), 10);
    assert_eq!(s.group_size(Group::Treated), 185);
    assert_eq!(s.group_size(Group::Control), 429);
}

#[test]
fn standardized_group_has_identity_covariance() {
    let mut rng = RngStream::new(31, 0);
    let x = sample_mvn(&mut rng, &[1.0, -2.0, 0.5, 3.0], &ar1_matrix(4, 0.7), 80).unwrap();
    let sample = ObservationalSample::new(x, vec![0; 80], vec![0.0; 80]).unwrap();
    let map = fit_standardization(&sample, Group::Control).unwrap();
    assert!(!map.ridge_applied());
    let z = apply_standardization(&map, sample.covariates()).unwrap();
    let cov = z.sample_covariance().unwrap();
    assert!(cov.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-6);
    assert!(z.column_means().iter().all(|m| m.abs() < 1e-10));
}

fn decimal() -> impl Strategy<Value = f64> {
    // values with a finite decimal representation, written as the CSV would be
    (-1_000_000i64..1_000_000, 0u32..5).prop_map(|(m, e)| m as f64 / 10f64.powi(e as i32))
}

proptest! {
    #[test]
    fn apply_standardization_is_affine(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        w in 0.0f64..1.0,
    ) {
        let mut rng = RngStream::new(5, 0);
        let x = sample_mvn(&mut rng, &[0.0; 3], &ar1_matrix(3, 0.4), 40).unwrap();
        let sample = ObservationalSample::new(x, vec![1; 40], vec![0.0; 40]).unwrap();
        let map = fit_standardization(&sample, Group::Treated).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(u, v)| w * u + (1.0 - w) * v).collect();
        let rows = Matrix::from_rows(&[a.clone(), b.clone(), mix]).unwrap();
        let z = apply_standardization(&map, &rows).unwrap();
        for k in 0..3 {
            let want = w * z[(0, k)] + (1.0 - w) * z[(1, k)];
            prop_assert!((z[(2, k)] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn csv_round_trip_is_bit_identical(
        rows in prop::collection::vec((0u8..2, decimal(), decimal(), decimal()), 1..30)
    ) {
        let schema = CsvSchema::new("t", "y", vec!["x1".into(), "x2".into()]);
        let mut text = String::from("t,y,x1,x2\n");
        for (t, y, a, b) in &rows {
            text.push_str(&format!("{t},{y},{a},{b}\n"));
        }
        let first = read_csv(text.as_bytes(), &schema).unwrap();
        let written = csv_string(&first, &schema).unwrap();
        let second = read_csv(written.as_bytes(), &schema).unwrap();
        prop_assert_eq!(first.treatment(), second.treatment());
        let bits = |s: &ObservationalSample| -> Vec<u64> {
            s.outcome().iter().chain(s.covariates().as_slice()).map(|v| v.to_bits()).collect()
        };
        prop_assert_eq!(bits(&first), bits(&second));
        prop_assert_eq!(csv_string(&second, &schema).unwrap(), written);
    }
}
