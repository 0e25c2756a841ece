//! Proportion (argmax) and alignment (mean true-class probability) accuracy.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance on each probability row's sum.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionBatch {
    probs: Matrix,
    labels: Vec<usize>,
}

impl PredictionBatch {
    pub fn new(probs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if probs.rows() != labels.len() {
            return Err(Error::validation(format!(
                "{} probability rows but {} labels",
                probs.rows(),
                labels.len()
            )));
        }
        for (i, row) in probs.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::validation(format!(
                    "row {i} is not a probability vector (sum {sum})"
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= probs.cols()) {
            return Err(Error::validation(format!("label {} exceeds class count", l + 1)));
        }
        Ok(Self { probs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::validation("prediction batch is empty"));
        }
        Ok(())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub fn proportion_accuracy(batch: &PredictionBatch) -> Result<f64> {
    batch.nonempty()?;
    let hits = batch
        .probs
        .iter_rows()
        .zip(&batch.labels)
        .filter(|(p, &l)| argmax(p) == l)
        .count();
    Ok(hits as f64 / batch.len() as f64)
}

pub fn alignment_accuracy(batch: &PredictionBatch) -> Result<f64> {
    batch.nonempty()?;
    let total: f64 = batch
        .probs
        .iter_rows()
        .zip(&batch.labels)
        .map(|(p, &l)| p[l])
        .sum();
    Ok(total / batch.len() as f64)
}
