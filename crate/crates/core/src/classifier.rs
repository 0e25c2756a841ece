//! Linear softmax classifier, cross-entropy loss with L2 penalty, Adam, and the
//! mini-batch training loop shared by the baseline, lifted and chaos-evolved models.
//!
//! The same code serves all three models; only the input dimension `d` differs
//! (`d = m` for the baseline, `d = m_lift` otherwise).

use std::borrow::Cow;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::SplitDataset;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::metrics;
use crate::seed::{self, role};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-300;

/// Trainable `m x d` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    w: Matrix,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// I.i.d. `N(0, 1/d)`.
    #[default]
    Gaussian,
    Zeros,
}

impl WeightMatrix {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self { w: Matrix::zeros(m, d) }
    }

    pub fn init(m: usize, d: usize, scheme: InitScheme, seed: u64) -> Self {
        match scheme {
            InitScheme::Zeros => Self::zeros(m, d),
            InitScheme::Gaussian => {
                let sd = (1.0 / d as f64).sqrt();
                let mut rng = seed::child_rng(seed, role::INIT, 0);
                let mut w = Matrix::zeros(m, d);
                for x in w.as_mut_slice() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = sd * z;
                }
                Self { w }
            }
        }
    }

    pub fn from_matrix(w: Matrix) -> Result<Self> {
        if !w.is_finite() {
            return Err(Error::NonFinite("weight matrix"));
        }
        Ok(Self { w })
    }

    /// Number of classes.
    pub fn m(&self) -> usize {
        self.w.rows()
    }

    /// Input dimension.
    pub fn d(&self) -> usize {
        self.w.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.w
    }

    pub fn into_matrix(self) -> Matrix {
        self.w
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_matrix_csv(path, &self.w)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_matrix(crate::io::read_matrix_csv(path)?)
    }
}

fn logits_into(w: &Matrix, v: &[f64], z: &mut [f64]) {
    for (i, zi) in z.iter_mut().enumerate() {
        *zi = dot(w.row(i), v);
    }
}

/// Max-shifted softmax in place.
fn softmax_in_place(z: &mut [f64]) -> Result<()> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || z.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("logits"));
    }
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

fn probs_into(w: &Matrix, v: &[f64], p: &mut [f64]) -> Result<()> {
    logits_into(w, v, p);
    softmax_in_place(p)
}

/// Class probabilities `softmax(W v)`.
pub fn softmax_probs(w: &WeightMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != w.d() {
        return Err(Error::validation(format!(
            "input has dimension {}, weights expect {}",
            v.len(),
            w.d()
        )));
    }
    let mut p = vec![0.0; w.m()];
    probs_into(&w.w, v, &mut p)?;
    Ok(p)
}

/// Probabilities for every row of `inputs`, as an `N x m` matrix.
pub fn predict(w: &WeightMatrix, inputs: &Matrix) -> Result<Matrix> {
    check_input_dim(w, inputs)?;
    let mut out = Matrix::zeros(inputs.rows(), w.m());
    for (i, v) in inputs.iter_rows().enumerate() {
        probs_into(&w.w, v, out.row_mut(i))?;
    }
    Ok(out)
}

fn check_input_dim(w: &WeightMatrix, inputs: &Matrix) -> Result<()> {
    if inputs.cols() != w.d() {
        return Err(Error::validation(format!(
            "inputs have {} columns, weights expect {}",
            inputs.cols(),
            w.d()
        )));
    }
    Ok(())
}

/// A set of labelled rows drawn from an input matrix.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    inputs: &'a Matrix,
    labels: &'a [usize],
    rows: Cow<'a, [usize]>,
}

impl<'a> Batch<'a> {
    pub fn new(inputs: &'a Matrix, labels: &'a [usize], rows: &'a [usize]) -> Result<Self> {
        Self::build(inputs, labels, Cow::Borrowed(rows))
    }

    /// Every row of `inputs`.
    pub fn full(inputs: &'a Matrix, labels: &'a [usize]) -> Result<Self> {
        Self::build(inputs, labels, Cow::Owned((0..inputs.rows()).collect()))
    }

    fn build(inputs: &'a Matrix, labels: &'a [usize], rows: Cow<'a, [usize]>) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::validation("input and label counts differ"));
        }
        if rows.is_empty() {
            return Err(Error::validation("batch is empty"));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= inputs.rows()) {
            return Err(Error::validation(format!("row {r} out of range")));
        }
        Ok(Self {
            inputs,
            labels,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (&'a [f64], usize)> + '_ {
        self.rows
            .iter()
            .map(move |&r| (self.inputs.row(r), self.labels[r]))
    }

    fn check(&self, w: &WeightMatrix) -> Result<()> {
        check_input_dim(w, self.inputs)?;
        if let Some(&l) = self.labels.iter().find(|&&l| l >= w.m()) {
            return Err(Error::validation(format!("label {} exceeds class count", l + 1)));
        }
        Ok(())
    }
}

/// Mean cross-entropy `-(1/N) Σ log p_{n, i_n}` without the penalty term.
pub fn cross_entropy(w: &WeightMatrix, batch: &Batch<'_>) -> Result<f64> {
    batch.check(w)?;
    let mut p = vec![0.0; w.m()];
    let mut total = 0.0;
    for (v, label) in batch.iter() {
        probs_into(&w.w, v, &mut p)?;
        total -= p[label].max(PROB_FLOOR).ln();
    }
    Ok(total / batch.len() as f64)
}

/// Training objective: cross-entropy plus `l2_coeff * Σ w_ij²`.
pub fn batch_loss(w: &WeightMatrix, batch: &Batch<'_>, l2_coeff: f64) -> Result<f64> {
    Ok(cross_entropy(w, batch)? + l2_coeff * w.w.frobenius_sq())
}

/// Gradient of [`batch_loss`]: `-(1/N) Σ (χ_ni - p_ni) v_nj + 2 λ w_ij`.
pub fn loss_gradient(w: &WeightMatrix, batch: &Batch<'_>, l2_coeff: f64) -> Result<Matrix> {
    batch.check(w)?;
    let mut grad = Matrix::zeros(w.m(), w.d());
    let mut p = vec![0.0; w.m()];
    accumulate_gradient(&w.w, batch, &mut p, &mut grad)?;
    finish_gradient(&w.w, batch.len(), l2_coeff, &mut grad);
    Ok(grad)
}

/// Adds `Σ (p_ni - χ_ni) v_nj` into `grad`.
fn accumulate_gradient(
    w: &Matrix,
    batch: &Batch<'_>,
    p: &mut [f64],
    grad: &mut Matrix,
) -> Result<()> {
    for (v, label) in batch.iter() {
        probs_into(w, v, p)?;
        p[label] -= 1.0;
        for (i, &coef) in p.iter().enumerate() {
            for (g, &x) in grad.row_mut(i).iter_mut().zip(v) {
                *g += coef * x;
            }
        }
    }
    Ok(())
}

fn finish_gradient(w: &Matrix, n: usize, l2_coeff: f64, grad: &mut Matrix) {
    let scale = 1.0 / n as f64;
    for (g, &wij) in grad.as_mut_slice().iter_mut().zip(w.as_slice()) {
        *g = *g * scale + 2.0 * l2_coeff * wij;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Matrix,
    pub second_moment: Matrix,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(m: usize, d: usize) -> Self {
        Self {
            first_moment: Matrix::zeros(m, d),
            second_moment: Matrix::zeros(m, d),
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam step, applied to `w` in place.
pub fn adam_update(
    w: &mut WeightMatrix,
    grad: &Matrix,
    state: &mut AdamState,
    learning_rate: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let shape = (w.m(), w.d());
    if (grad.rows(), grad.cols()) != shape
        || (state.first_moment.rows(), state.first_moment.cols()) != shape
        || (state.second_moment.rows(), state.second_moment.cols()) != shape
    {
        return Err(Error::validation("Adam shapes disagree"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ws = w.w.as_mut_slice();
    let m1 = state.first_moment.as_mut_slice();
    let m2 = state.second_moment.as_mut_slice();
    for (((wi, &g), a), b) in ws.iter_mut().zip(grad.as_slice()).zip(m1).zip(m2) {
        *a = cfg.beta1 * *a + (1.0 - cfg.beta1) * g;
        *b = cfg.beta2 * *b + (1.0 - cfg.beta2) * g * g;
        let m_hat = *a / c1;
        let v_hat = *b / c2;
        *wi -= learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l2_coeff: f64,
    /// Training stops once the full-train cross-entropy drops below this.
    pub loss_floor: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub init: InitScheme,
    pub seed: u64,
}

impl TrainConfig {
    /// Batch 10, learning rate 1e-3, L2 1e-3, loss floor 1e-10.
    pub fn with_epochs(max_epochs: usize, seed: u64) -> Self {
        Self {
            batch_size: 10,
            learning_rate: 1e-3,
            max_epochs,
            l2_coeff: 1e-3,
            loss_floor: 1e-10,
            adam: AdamConfig::default(),
            init: InitScheme::Gaussian,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(self.l2_coeff >= 0.0) {
            return Err(Error::validation("l2_coeff must be nonnegative"));
        }
        let a = &self.adam;
        if !(0.0 < a.beta1 && a.beta1 < a.beta2 && a.beta2 < 1.0) {
            return Err(Error::validation("need 0 < beta1 < beta2 < 1"));
        }
        if !(a.eps > 0.0) {
            return Err(Error::validation("adam eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_alignment: f64,
    pub test_alignment: f64,
    pub train_proportion: f64,
    pub test_proportion: f64,
    /// Wall-clock seconds since training started.
    pub elapsed_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxEpochs,
    LossFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
    pub termination: Termination,
}

pub const TRACE_HEADER: [&str; 8] = [
    "epoch",
    "train_loss",
    "test_loss",
    "train_align",
    "test_align",
    "train_prop",
    "test_prop",
    "seconds",
];

impl TrainingTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Highest test alignment seen at any epoch.
    pub fn best_test_alignment(&self) -> f64 {
        self.epochs
            .iter()
            .map(|r| r.test_alignment)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First epoch (1-based) whose record satisfies `pred`.
    pub fn first_epoch_where(&self, pred: impl Fn(&EpochRecord) -> bool) -> Option<usize> {
        self.epochs.iter().find(|r| pred(r)).map(|r| r.epoch)
    }

    pub fn total_seconds(&self) -> f64 {
        self.last().map_or(0.0, |r| r.elapsed_seconds)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::writer(path)?;
        w.write_record(TRACE_HEADER)?;
        for r in &self.epochs {
            let mut rec = vec![r.epoch.to_string()];
            rec.extend(
                [
                    r.train_loss,
                    r.test_loss,
                    r.train_alignment,
                    r.test_alignment,
                    r.train_proportion,
                    r.test_proportion,
                    r.elapsed_seconds,
                ]
                .map(crate::io::fmt_f64),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| crate::Error::io(path, e))?;
        Ok(())
    }
}

struct SplitMetrics {
    loss: f64,
    alignment: f64,
    proportion: f64,
}

fn evaluate(w: &Matrix, inputs: &Matrix, labels: &[usize], rows: &[usize], p: &mut [f64]) -> Result<SplitMetrics> {
    let mut loss = 0.0;
    let mut alignment = 0.0;
    let mut hits = 0usize;
    for &r in rows {
        probs_into(w, inputs.row(r), p)?;
        let label = labels[r];
        loss -= p[label].max(PROB_FLOOR).ln();
        alignment += p[label];
        if metrics::argmax(p) == label {
            hits += 1;
        }
    }
    let n = rows.len() as f64;
    Ok(SplitMetrics {
        loss: loss / n,
        alignment: alignment / n,
        proportion: hits as f64 / n,
    })
}

/// Mini-batch Adam training on the rows of `inputs` selected by `split`.
///
/// Each epoch reshuffles the training rows with the child stream `(seed, "shuffle", epoch)`,
/// takes consecutive batches of `batch_size` (the last one may be short) and applies one
/// Adam step per batch. Losses, both accuracy metrics and elapsed time are then recorded on
/// the full train and test sets. Training ends at `max_epochs`, or as soon as the train
/// cross-entropy falls below `loss_floor`.
pub fn train(
    inputs: &Matrix,
    labels: &[usize],
    split: &SplitDataset,
    config: &TrainConfig,
) -> Result<(WeightMatrix, TrainingTrace)> {
    config.validate()?;
    if labels.len() != inputs.rows() {
        return Err(Error::validation("input and label counts differ"));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::validation("train and test sets must be nonempty"));
    }
    if split.train.iter().chain(&split.test).any(|&r| r >= inputs.rows()) {
        return Err(Error::validation("split refers to a missing row"));
    }
    if !inputs.is_finite() {
        return Err(Error::NonFinite("training inputs"));
    }
    let m = labels.iter().copied().max().map_or(0, |l| l + 1);
    let d = inputs.cols();
    let mut w = WeightMatrix::init(m, d, config.init, config.seed);
    let mut adam = AdamState::new(m, d);
    let mut grad = Matrix::zeros(m, d);
    let mut p = vec![0.0; m];
    let mut order = split.train.clone();
    let mut records = Vec::with_capacity(config.max_epochs.min(100_000));
    let start = Instant::now();

    let diverged = |epoch: usize, records: Vec<EpochRecord>| Error::TrainingDiverged {
        epoch,
        trace: Box::new(TrainingTrace {
            epochs: records,
            termination: Termination::MaxEpochs,
        }),
    };

    for epoch in 1..=config.max_epochs {
        let mut rng = seed::child_rng(config.seed, role::SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = Batch::new(inputs, labels, chunk)?;
            grad.as_mut_slice().fill(0.0);
            if accumulate_gradient(&w.w, &batch, &mut p, &mut grad).is_err() {
                return Err(diverged(epoch, records));
            }
            finish_gradient(&w.w, batch.len(), config.l2_coeff, &mut grad);
            adam_update(&mut w, &grad, &mut adam, config.learning_rate, &config.adam)?;
        }
        let (train_m, test_m) = match (
            evaluate(&w.w, inputs, labels, &split.train, &mut p),
            evaluate(&w.w, inputs, labels, &split.test, &mut p),
        ) {
            (Ok(a), Ok(b)) if a.loss.is_finite() && b.loss.is_finite() => (a, b),
            _ => return Err(diverged(epoch, records)),
        };
        records.push(EpochRecord {
            epoch,
            train_loss: train_m.loss,
            test_loss: test_m.loss,
            train_alignment: train_m.alignment,
            test_alignment: test_m.alignment,
            train_proportion: train_m.proportion,
            test_proportion: test_m.proportion,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if train_m.loss < config.loss_floor {
            return Ok((
                w,
                TrainingTrace {
                    epochs: records,
                    termination: Termination::LossFloor,
                },
            ));
        }
    }
    Ok((
        w,
        TrainingTrace {
            epochs: records,
            termination: Termination::MaxEpochs,
        },
    ))
}
