//! Lifting of m-dimensional samples into `m_lift` dimensions.
//!
//! A lifted vector has the layout `[η1, η2, η3, v_1..v_m, η4..η_{m_lift-m}]`, where each
//! `η_j = Σ_l ε_{jl} v_l` with `ε_{jl} ~ N(0, 1/m_lift)`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::dynamics::ChaosConfig;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::seed::{self, role};

/// Number of random coordinates placed before the embedded sample.
pub const LEADING_RANDOM: usize = 3;
/// Smallest allowed `m_lift - m`.
pub const MIN_EXTRA_DIMS: usize = 6;

/// How the `ε` coefficients are drawn across the rows of a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientSharing {
    /// One coefficient matrix for the whole dataset. Lifting is then a fixed linear map,
    /// so each class stays a tight cluster in the lifted space.
    #[default]
    Shared,
    /// A fresh coefficient matrix for every row.
    PerSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftConfig {
    pub m_lift: usize,
    pub seed: u64,
    #[serde(default)]
    pub sharing: CoefficientSharing,
}

impl LiftConfig {
    pub fn new(m_lift: usize, seed: u64) -> Self {
        Self {
            m_lift,
            seed,
            sharing: CoefficientSharing::Shared,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        check_dims(m, self.m_lift)
    }
}

fn check_dims(m: usize, m_lift: usize) -> Result<()> {
    if m_lift < m + MIN_EXTRA_DIMS {
        return Err(Error::validation(format!(
            "m_lift must be at least m + {MIN_EXTRA_DIMS} = {}, got {m_lift}",
            m + MIN_EXTRA_DIMS
        )));
    }
    Ok(())
}

/// The `(m_lift - m) x m` matrix of mixing coefficients `ε_{jl}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftCoefficients {
    m_lift: usize,
    eps: Matrix,
}

impl LiftCoefficients {
    pub fn draw<R: Rng + ?Sized>(m: usize, m_lift: usize, rng: &mut R) -> Result<Self> {
        Self::draw_with_variance(m, m_lift, 1.0 / m_lift as f64, rng)
    }

    /// Draws coefficients from `N(0, variance)`; variance 0 gives all-zero coefficients.
    pub fn draw_with_variance<R: Rng + ?Sized>(
        m: usize,
        m_lift: usize,
        variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(m, m_lift)?;
        let sd = variance.sqrt();
        let mut eps = Matrix::zeros(m_lift - m, m);
        for e in eps.as_mut_slice() {
            let z: f64 = rng.sample(StandardNormal);
            *e = sd * z;
        }
        Ok(Self { m_lift, eps })
    }

    pub fn m(&self) -> usize {
        self.eps.cols()
    }

    pub fn m_lift(&self) -> usize {
        self.m_lift
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m();
        debug_assert_eq!(v.len(), m);
        debug_assert_eq!(out.len(), self.m_lift);
        for j in 0..LEADING_RANDOM {
            out[j] = dot(self.eps.row(j), v);
        }
        out[LEADING_RANDOM..LEADING_RANDOM + m].copy_from_slice(v);
        for j in LEADING_RANDOM..self.eps.rows() {
            out[m + j] = dot(self.eps.row(j), v);
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.m() {
            return Err(Error::validation(format!(
                "vector has dimension {}, coefficients expect {}",
                v.len(),
                self.m()
            )));
        }
        let mut out = vec![0.0; self.m_lift];
        self.apply_into(v, &mut out);
        Ok(out)
    }
}

/// Lifts one vector with coefficients drawn fresh from `rng`.
pub fn lift_vector<R: Rng + ?Sized>(v: &[f64], m_lift: usize, rng: &mut R) -> Result<Vec<f64>> {
    LiftCoefficients::draw(v.len(), m_lift, rng)?.apply(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedDataset {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    /// Original (unlifted) dimension.
    pub m: usize,
    pub config: LiftConfig,
    /// Set once the rows have been evolved under Lorenz 96.
    pub chaos: Option<ChaosConfig>,
}

impl LiftedDataset {
    pub fn m_lift(&self) -> usize {
        self.config.m_lift
    }

    pub fn is_evolved(&self) -> bool {
        self.chaos.is_some()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Columns holding the embedded source sample (meaningful before evolution).
    pub fn embedded(&self) -> Matrix {
        self.samples
            .select_cols(LEADING_RANDOM, LEADING_RANDOM + self.m)
    }

    pub fn manifest(&self) -> LiftedManifest {
        LiftedManifest {
            m: self.m,
            m_lift: self.config.m_lift,
            rows: self.len(),
            lift: self.config,
            evolved: self.is_evolved(),
            chaos: self.chaos,
        }
    }

    /// Writes `<stem>.csv` (`label,x1..x{m_lift}`) and the `<stem>.json` sidecar manifest.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::io::write_labeled_csv(&dir.join(format!("{stem}.csv")), &self.samples, &self.labels)?;
        crate::io::write_json(&dir.join(format!("{stem}.json")), &self.manifest())
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let manifest: LiftedManifest = crate::io::read_json(&dir.join(format!("{stem}.json")))?;
        let (samples, labels) = crate::io::read_labeled_csv(&dir.join(format!("{stem}.csv")))?;
        if samples.cols() != manifest.m_lift || labels.len() != manifest.rows {
            return Err(Error::validation("lifted CSV does not match its manifest"));
        }
        Ok(Self {
            samples,
            labels,
            m: manifest.m,
            config: manifest.lift,
            chaos: manifest.chaos,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedManifest {
    pub m: usize,
    pub m_lift: usize,
    pub rows: usize,
    pub lift: LiftConfig,
    pub evolved: bool,
    pub chaos: Option<ChaosConfig>,
}

/// Lifted image of a single row, as [`lift_dataset`] would produce it for row `index`.
pub fn lift_row(v: &[f64], config: &LiftConfig, index: usize) -> Result<Vec<f64>> {
    let coeffs = match config.sharing {
        CoefficientSharing::Shared => shared_coefficients(v.len(), config)?,
        CoefficientSharing::PerSample => {
            let mut rng = seed::child_rng(config.seed, role::LIFT_ROW, index as u64);
            LiftCoefficients::draw(v.len(), config.m_lift, &mut rng)?
        }
    };
    coeffs.apply(v)
}

fn shared_coefficients(m: usize, config: &LiftConfig) -> Result<LiftCoefficients> {
    let mut rng = seed::child_rng(config.seed, role::LIFT, 0);
    LiftCoefficients::draw(m, config.m_lift, &mut rng)
}

pub fn lift_dataset(ds: &LabeledDataset, config: LiftConfig) -> Result<LiftedDataset> {
    lift_samples(&ds.samples, &ds.labels, config)
}

/// Lifts an arbitrary `N x m` sample matrix; `N = 0` gives an empty lifted dataset.
pub fn lift_samples(samples: &Matrix, labels: &[usize], config: LiftConfig) -> Result<LiftedDataset> {
    let m = samples.cols();
    config.validate(m)?;
    if labels.len() != samples.rows() {
        return Err(Error::validation("sample and label counts differ"));
    }
    let m_lift = config.m_lift;
    let mut out = Matrix::zeros(samples.rows(), m_lift);
    match config.sharing {
        CoefficientSharing::Shared => {
            let coeffs = shared_coefficients(m, &config)?;
            for (i, v) in samples.iter_rows().enumerate() {
                coeffs.apply_into(v, out.row_mut(i));
            }
        }
        CoefficientSharing::PerSample => {
            out.as_mut_slice()
                .par_chunks_mut(m_lift)
                .enumerate()
                .try_for_each(|(i, dst)| -> Result<()> {
                    let mut rng = seed::child_rng(config.seed, role::LIFT_ROW, i as u64);
                    LiftCoefficients::draw(m, m_lift, &mut rng)?.apply_into(samples.row(i), dst);
                    Ok(())
                })?;
        }
    }
    Ok(LiftedDataset {
        samples: out,
        labels: labels.to_vec(),
        m,
        config,
        chaos: None,
    })
}
