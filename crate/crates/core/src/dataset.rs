//! Synthetic perturbed-orthogonal-vector dataset and the stratified train/test split.
//!
//! Class labels are stored 0-based (`0..m`); CSV files carry them 1-based.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, role};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Number of classes, equal to the vector dimension.
    pub m: usize,
    /// Samples per class.
    pub n_class: usize,
    /// Variance of the per-coordinate Gaussian perturbation.
    pub sigma2: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(m: usize, n_class: usize, sigma2: f64, seed: u64) -> Self {
        Self {
            m,
            n_class,
            sigma2,
            seed,
        }
    }

    /// Defaults used throughout the experiments: 20 samples per class, variance 1e-4.
    pub fn with_defaults(m: usize, seed: u64) -> Self {
        Self::new(m, 20, 1e-4, seed)
    }

    pub fn total(&self) -> usize {
        self.m * self.n_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::validation(format!("m must be >= 2, got {}", self.m)));
        }
        if self.n_class < 2 {
            return Err(Error::validation(format!(
                "n_class must be >= 2, got {}",
                self.n_class
            )));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::validation(format!(
                "sigma2 must be a finite nonnegative number, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    pub spec: DatasetSpec,
}

impl LabeledDataset {
    /// Wraps existing samples, checking shape and that every class appears `n_class` times.
    pub fn new(samples: Matrix, labels: Vec<usize>, spec: DatasetSpec) -> Result<Self> {
        spec.validate()?;
        if samples.rows() != labels.len() {
            return Err(Error::validation(format!(
                "{} samples but {} labels",
                samples.rows(),
                labels.len()
            )));
        }
        if samples.rows() != spec.total() || samples.cols() != spec.m {
            return Err(Error::validation(format!(
                "samples are {}x{}, spec expects {}x{}",
                samples.rows(),
                samples.cols(),
                spec.total(),
                spec.m
            )));
        }
        let mut counts = vec![0usize; spec.m];
        for &l in &labels {
            if l >= spec.m {
                return Err(Error::validation(format!("label {} out of range", l + 1)));
            }
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c != spec.n_class) {
            return Err(Error::validation(
                "label histogram is not uniform across classes",
            ));
        }
        Ok(Self {
            samples,
            labels,
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// Row indices belonging to `class`, in storage order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        class_indices(&self.labels, class)
    }

    /// Writes `label,x1,...,xm` with 1-based labels and 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_labeled_csv(path.as_ref(), &self.samples, &self.labels)
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv) and checks it against `spec`.
    pub fn read_csv(path: impl AsRef<Path>, spec: DatasetSpec) -> Result<Self> {
        let (samples, labels) = crate::io::read_labeled_csv(path.as_ref())?;
        Self::new(samples, labels, spec)
    }
}

pub(crate) fn class_indices(labels: &[usize], class: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| (l == class).then_some(i))
        .collect()
}

/// Generates `m * n_class` rows in class-contiguous blocks. Row `n` is `e_{label}` plus
/// i.i.d. `N(0, sigma2)` noise drawn from the child stream `(seed, "sample", n)`.
pub fn generate_dataset(spec: DatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let m = spec.m;
    let sigma = spec.sigma2.sqrt();
    let mut samples = Matrix::zeros(spec.total(), m);
    let mut labels = Vec::with_capacity(spec.total());
    for n in 0..spec.total() {
        let class = n / spec.n_class;
        labels.push(class);
        let row = samples.row_mut(n);
        let mut rng = seed::child_rng(spec.seed, role::SAMPLE, n as u64);
        for x in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = sigma * z;
        }
        row[class] += 1.0;
    }
    Ok(LabeledDataset {
        samples,
        labels,
        spec,
    })
}

/// Train/test row indices into a [`LabeledDataset`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitDataset {
    pub fn train_set(&self, ds: &LabeledDataset) -> (Matrix, Vec<usize>) {
        subset(ds, &self.train)
    }

    pub fn test_set(&self, ds: &LabeledDataset) -> (Matrix, Vec<usize>) {
        subset(ds, &self.test)
    }
}

fn subset(ds: &LabeledDataset, rows: &[usize]) -> (Matrix, Vec<usize>) {
    (
        ds.samples.select_rows(rows),
        rows.iter().map(|&i| ds.labels[i]).collect(),
    )
}

/// Sends a seeded random half of every class to training and the rest to testing.
///
/// The split is stratified per class. Each class is permuted with its own child stream
/// `(seed, "split", class)`.
pub fn split_stratified(ds: &LabeledDataset, seed: u64) -> Result<SplitDataset> {
    let n_class = ds.spec.n_class;
    if n_class % 2 != 0 {
        return Err(Error::validation(format!(
            "stratified split needs an even n_class, got {n_class}"
        )));
    }
    let half = n_class / 2;
    let mut train = Vec::with_capacity(ds.len() / 2);
    let mut test = Vec::with_capacity(ds.len() / 2);
    for class in 0..ds.m() {
        let mut idx = ds.class_indices(class);
        if idx.len() != n_class {
            return Err(Error::validation(format!(
                "class {} has {} rows, expected {n_class}",
                class + 1,
                idx.len()
            )));
        }
        let mut rng = seed::child_rng(seed, role::SPLIT, class as u64);
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..half]);
        test.extend_from_slice(&idx[half..]);
    }
    Ok(SplitDataset { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_rows_are_basis_vectors() {
        let ds = generate_dataset(DatasetSpec::new(3, 2, 0.0, 99)).unwrap();
        let expected = [
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
        ];
        assert_eq!(ds.samples, Matrix::from_rows(&expected).unwrap());
        assert_eq!(ds.labels, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn default_m20_dataset_has_400_rows() {
        let ds = generate_dataset(DatasetSpec::with_defaults(20, 1)).unwrap();
        assert_eq!(ds.len(), 400);
        assert_eq!(ds.samples.cols(), 20);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_dataset(DatasetSpec::new(1, 20, 1e-4, 0)).is_err());
        assert!(generate_dataset(DatasetSpec::new(3, 1, 1e-4, 0)).is_err());
        assert!(generate_dataset(DatasetSpec::new(3, 2, -1e-4, 0)).is_err());
        assert!(generate_dataset(DatasetSpec::new(3, 2, f64::NAN, 0)).is_err());
    }

    #[test]
    fn noisy_rows_are_pairwise_distinct() {
        let ds = generate_dataset(DatasetSpec::new(4, 10, 1e-4, 5)).unwrap();
        for i in 0..ds.len() {
            for j in i + 1..ds.len() {
                assert_ne!(ds.samples.row(i), ds.samples.row(j));
            }
        }
    }

    #[test]
    fn split_sizes_and_partition() {
        let ds = generate_dataset(DatasetSpec::new(2, 20, 1e-4, 3)).unwrap();
        let split = split_stratified(&ds, 11).unwrap();
        assert_eq!(split.train.len(), 20);
        assert_eq!(split.test.len(), 20);
        for class in 0..2 {
            assert_eq!(split.train.iter().filter(|&&i| ds.labels[i] == class).count(), 10);
            assert_eq!(split.test.iter().filter(|&&i| ds.labels[i] == class).count(), 10);
        }
        let mut all: Vec<_> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn minimal_split_is_one_each() {
        let ds = generate_dataset(DatasetSpec::new(3, 2, 1e-4, 3)).unwrap();
        let split = split_stratified(&ds, 0).unwrap();
        assert_eq!(split.train.len(), 3);
        assert_eq!(split.test.len(), 3);
        for class in 0..3 {
            assert_eq!(split.train.iter().filter(|&&i| ds.labels[i] == class).count(), 1);
        }
    }

    #[test]
    fn split_is_deterministic_and_rejects_odd_classes() {
        let ds = generate_dataset(DatasetSpec::new(3, 8, 1e-4, 3)).unwrap();
        assert_eq!(split_stratified(&ds, 4).unwrap(), split_stratified(&ds, 4).unwrap());
        assert_ne!(split_stratified(&ds, 4).unwrap(), split_stratified(&ds, 5).unwrap());
        let odd = generate_dataset(DatasetSpec::new(3, 3, 1e-4, 3)).unwrap();
        assert!(split_stratified(&odd, 4).is_err());
    }
}
