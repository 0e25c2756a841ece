use chaoslift::lifting::{lift_row, lift_samples, LiftCoefficients};
use chaoslift::seed::child_rng;
use chaoslift::{
    generate_dataset, lift_dataset, lift_vector, CoefficientSharing, DatasetSpec, LiftConfig,
    Matrix,
};
use proptest::prelude::*;

#[test]
fn noise_mean_and_variance_match_spec() {
    let spec = DatasetSpec::new(5, 10_000, 1e-2, 42);
    let ds = generate_dataset(spec).unwrap();
    let sigma = spec.sigma2.sqrt();
    let mut sum_sq = 0.0;
    for class in 0..5 {
        let rows = ds.class_indices(class);
        for coord in 0..5 {
            let target = if coord == class { 1.0 } else { 0.0 };
            let mean = rows.iter().map(|&r| ds.samples[(r, coord)]).sum::<f64>() / rows.len() as f64;
            assert!(
                (mean - target).abs() <= 3.0 * sigma / (rows.len() as f64).sqrt(),
                "class {class} coord {coord}: mean {mean}"
            );
        }
    }
    for (row, &label) in ds.samples.iter_rows().zip(&ds.labels) {
        for (j, &x) in row.iter().enumerate() {
            let noise = x - if j == label { 1.0 } else { 0.0 };
            sum_sq += noise * noise;
        }
    }
    let var = sum_sq / (ds.len() * 5) as f64;
    assert!((var / spec.sigma2 - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn generated_rows_are_distinct() {
    let ds = generate_dataset(DatasetSpec::new(6, 20, 1e-4, 3)).unwrap();
    for i in 0..ds.len() {
        for j in i + 1..ds.len() {
            assert_ne!(ds.samples.row(i), ds.samples.row(j));
        }
    }
}

#[test]
fn eta_variance_is_norm_over_m_lift() {
    // v = e_1 so eta_j = eps_j1 ~ N(0, 1/40).
    let mut v = vec![0.0; 20];
    v[0] = 1.0;
    let mut rng = child_rng(17, "test-eta", 0);
    let draws = 100_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let lifted = lift_vector(&v, 40, &mut rng).unwrap();
        let eta = lifted[0];
        sum += eta;
        sum_sq += eta * eta;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = sum_sq / n - mean * mean;
    assert!((var / 0.025 - 1.0).abs() < 0.05, "variance {var}");
    assert!(mean.abs() < 4.0 * (0.025 / n).sqrt(), "mean {mean}");
}

#[test]
fn zero_variance_lift_only_embeds() {
    let v = [0.3, -1.0, 2.5];
    let mut rng = child_rng(1, "test", 0);
    let lifted = LiftCoefficients::draw_with_variance(3, 11, 0.0, &mut rng)
        .unwrap()
        .apply(&v)
        .unwrap();
    assert_eq!(lifted, vec![0.0, 0.0, 0.0, 0.3, -1.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn empty_dataset_lifts_to_empty() {
    let lifted = lift_samples(&Matrix::zeros(0, 2), &[], LiftConfig::new(8, 1)).unwrap();
    assert!(lifted.is_empty());
    assert_eq!(lifted.m_lift(), 8);
}

#[test]
fn m2_lift_to_8_keeps_source_columns() {
    let ds = generate_dataset(DatasetSpec::new(2, 20, 1e-4, 5)).unwrap();
    for sharing in [CoefficientSharing::Shared, CoefficientSharing::PerSample] {
        let cfg = LiftConfig { m_lift: 8, seed: 9, sharing };
        let lifted = lift_dataset(&ds, cfg).unwrap();
        assert_eq!(lifted.samples.cols(), 8);
        assert_eq!(lifted.embedded(), ds.samples);
        assert_eq!(lift_dataset(&ds, cfg).unwrap().samples, lifted.samples);
    }
}

#[test]
fn lifting_commutes_with_row_permutation() {
    let ds = generate_dataset(DatasetSpec::new(3, 4, 1e-4, 8)).unwrap();
    let perm: Vec<usize> = vec![7, 2, 11, 0, 5, 9, 1, 3, 10, 4, 8, 6];
    for sharing in [CoefficientSharing::Shared, CoefficientSharing::PerSample] {
        let cfg = LiftConfig { m_lift: 12, seed: 21, sharing };
        let lifted = lift_dataset(&ds, cfg).unwrap();
        for (pos, &src) in perm.iter().enumerate() {
            // Row `src` keeps its own child seed wherever it lands.
            let row = lift_row(ds.samples.row(src), &cfg, src).unwrap();
            assert_eq!(row.as_slice(), lifted.samples.row(src), "position {pos}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_is_deterministic_and_balanced(m in 2usize..8, n_class in 2usize..6, seed in any::<u64>()) {
        let spec = DatasetSpec::new(m, n_class, 1e-4, seed);
        let a = generate_dataset(spec).unwrap();
        let b = generate_dataset(spec).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        for class in 0..m {
            prop_assert_eq!(a.class_indices(class).len(), n_class);
        }
    }

    #[test]
    fn embedding_recovers_source(m in 2usize..6, extra in 6usize..12, seed in any::<u64>()) {
        let ds = generate_dataset(DatasetSpec::new(m, 2, 1e-3, seed)).unwrap();
        let lifted = lift_dataset(&ds, LiftConfig::new(m + extra, seed ^ 1)).unwrap();
        prop_assert_eq!(lifted.embedded(), ds.samples);
    }
}
