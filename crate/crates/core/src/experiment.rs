//! Orchestration of the three model variants, the lifting-dimension sweep, model
//! comparison and interval selection, with artifacts written as flat CSV/JSON files.
//!
//! Run directory layout: `manifest.json`, `trace.csv`, `weights.csv`, optional
//! `geometry/*.csv`; a sweep adds `sweep.csv`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{train, Termination, TrainConfig, TrainingTrace, WeightMatrix};
use crate::dataset::{generate_dataset, split_stratified, DatasetSpec, LabeledDataset, SplitDataset};
use crate::dynamics::{evolve_lifted, ChaosConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    estimate_optimal_interval, ratio_curve, weight_spread, ClusterSummary, IntervalEstimate,
    RatioCurve, RatioCurveConfig,
};
use crate::io;
use crate::lifting::{lift_dataset, CoefficientSharing, LiftConfig, LiftedDataset, MIN_EXTRA_DIMS};
use crate::matrix::Matrix;
use crate::seed::{child_seed, role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Lift,
    LiftChaos,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Lift, Variant::LiftChaos];

    /// Epoch budget per run (per sweep cell for the lifted variants).
    pub fn default_epochs(self) -> usize {
        match self {
            Variant::Baseline => 20_000,
            Variant::Lift => 2_000,
            Variant::LiftChaos => 500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Lift => "lift",
            Variant::LiftChaos => "lift_chaos",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "lift" => Ok(Variant::Lift),
            "lift_chaos" | "lift-chaos" => Ok(Variant::LiftChaos),
            other => Err(Error::validation(format!("unknown variant {other:?}"))),
        }
    }
}

/// Lorenz 96 settings shared by every lifting dimension; `K` follows from `m_lift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosSettings {
    pub forcing: f64,
    pub dt: f64,
    pub horizon: f64,
}

impl Default for ChaosSettings {
    fn default() -> Self {
        Self {
            forcing: 8.0,
            dt: 1e-2,
            horizon: 2.0,
        }
    }
}

impl ChaosSettings {
    pub fn for_lift(&self, m_lift: usize) -> ChaosConfig {
        ChaosConfig {
            forcing: self.forcing,
            dt: self.dt,
            horizon: self.horizon,
            k: m_lift.saturating_sub(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub variant: Variant,
    /// Lifting dimension for a single run of a lifted variant.
    #[serde(default)]
    pub m_lift: Option<usize>,
    /// Inclusive sweep range.
    pub lift_min: usize,
    pub lift_max: usize,
    pub chaos: ChaosSettings,
    /// Training settings; the seed is replaced by a derived child seed per run.
    pub train: TrainConfig,
    #[serde(default)]
    pub sharing: CoefficientSharing,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Experiment defaults for `m` classes: 20 samples per class, variance 1e-4, sweep range
    /// `[m + 6, 50]`, `T = 2`, and the variant's epoch budget.
    pub fn new(m: usize, variant: Variant, master_seed: u64) -> Self {
        let dataset = DatasetSpec::with_defaults(m, child_seed(master_seed, role::DATASET, 0));
        Self {
            dataset,
            variant,
            m_lift: None,
            lift_min: m + MIN_EXTRA_DIMS,
            lift_max: 50.max(m + MIN_EXTRA_DIMS),
            chaos: ChaosSettings::default(),
            train: TrainConfig::with_epochs(variant.default_epochs(), 0),
            sharing: CoefficientSharing::Shared,
            output_dir: None,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.variant != Variant::Baseline {
            let lo = self.dataset.m + MIN_EXTRA_DIMS;
            if self.lift_min < lo || self.lift_max < self.lift_min {
                return Err(Error::validation(format!(
                    "lifting range [{}, {}] must satisfy {lo} <= min <= max",
                    self.lift_min, self.lift_max
                )));
            }
            if let Some(ml) = self.m_lift {
                LiftConfig::new(ml, 0).validate(self.dataset.m)?;
            }
        }
        if self.variant == Variant::LiftChaos {
            self.chaos.for_lift(self.lift_min.max(7)).validate()?;
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        child_seed(self.master_seed, role::SPLIT, 0)
    }

    /// Lift seed for a given lifting dimension.
    pub fn lift_seed(&self, m_lift: usize) -> u64 {
        child_seed(self.master_seed, role::LIFT, m_lift as u64)
    }

    /// Training seed; `m_lift = 0` for the baseline.
    pub fn train_seed(&self, m_lift: usize) -> u64 {
        child_seed(self.master_seed, role::TRAIN, m_lift as u64)
    }

    pub fn from_manifest(path: &Path) -> Result<Self> {
        let manifest: RunManifest = io::read_json(path)?;
        Ok(manifest.config)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub split_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_lift: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift_seed: Option<u64>,
    pub train_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_seconds: Option<f64>,
}

impl RunManifest {
    fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Complete,
            error: None,
            config: config.clone(),
            split_seed: config.split_seed(),
            m_lift: None,
            lift_seed: None,
            train_seed: config.train_seed(0),
            epochs: None,
            termination: None,
            compute_seconds: None,
        }
    }
}

/// Model inputs for one variant and lifting dimension, before training.
#[derive(Clone, Debug)]
pub struct PreparedInputs {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub lifted: Option<LiftedDataset>,
}

/// Builds the classifier inputs: the raw samples, their lift, or their evolved lift.
pub fn prepare_inputs(
    ds: &LabeledDataset,
    config: &ExperimentConfig,
    m_lift: Option<usize>,
) -> Result<PreparedInputs> {
    match (config.variant, m_lift) {
        (Variant::Baseline, _) => Ok(PreparedInputs {
            inputs: ds.samples.clone(),
            labels: ds.labels.clone(),
            lifted: None,
        }),
        (_, None) => Err(Error::validation("lifted variants need an m_lift")),
        (variant, Some(ml)) => {
            let lift = LiftConfig {
                m_lift: ml,
                seed: config.lift_seed(ml),
                sharing: config.sharing,
            };
            let mut lifted = lift_dataset(ds, lift)?;
            if variant == Variant::LiftChaos {
                lifted = evolve_lifted(&lifted, config.chaos.for_lift(ml))?;
            }
            Ok(PreparedInputs {
                inputs: lifted.samples.clone(),
                labels: lifted.labels.clone(),
                lifted: Some(lifted),
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub weights: WeightMatrix,
    pub trace: TrainingTrace,
    /// Compute time from generation through training, excluding file output.
    pub compute_seconds: f64,
    pub m_lift: Option<usize>,
}

fn run_cell(
    ds: &LabeledDataset,
    split: &SplitDataset,
    config: &ExperimentConfig,
    m_lift: Option<usize>,
) -> Result<RunOutput> {
    let start = Instant::now();
    let prepared = prepare_inputs(ds, config, m_lift)?;
    let train_cfg = TrainConfig {
        seed: config.train_seed(m_lift.unwrap_or(0)),
        ..config.train
    };
    let (weights, trace) = train(&prepared.inputs, &prepared.labels, split, &train_cfg)?;
    Ok(RunOutput {
        weights,
        trace,
        compute_seconds: start.elapsed().as_secs_f64(),
        m_lift,
    })
}

fn setup(config: &ExperimentConfig) -> Result<(LabeledDataset, SplitDataset)> {
    config.validate()?;
    let ds = generate_dataset(config.dataset)?;
    let split = split_stratified(&ds, config.split_seed())?;
    Ok((ds, split))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn remove_if_present(path: &Path) {
    let _ = fs::remove_file(path);
}

fn write_run(dir: &Path, manifest: &RunManifest, out: &RunOutput) -> Result<()> {
    prepare_dir(dir)?;
    out.trace.write_csv(&dir.join("trace.csv"))?;
    out.weights.write_csv(&dir.join("weights.csv"))?;
    weight_spread(&out.weights)
        .and_then(|s| s.write_csv(&dir.join("geometry").join("weight_spread.csv")))
        .ok();
    io::write_json(&dir.join("manifest.json"), manifest)
}

fn write_failure(dir: &Path, mut manifest: RunManifest, err: &Error) -> Result<()> {
    prepare_dir(dir)?;
    remove_if_present(&dir.join("trace.csv"));
    remove_if_present(&dir.join("weights.csv"));
    manifest.status = RunStatus::Failed;
    manifest.error = Some(err.to_string());
    io::write_json(&dir.join("manifest.json"), &manifest)
}

fn complete_manifest(manifest: &mut RunManifest, config: &ExperimentConfig, out: &RunOutput) {
    manifest.m_lift = out.m_lift;
    manifest.lift_seed = out.m_lift.map(|ml| config.lift_seed(ml));
    manifest.train_seed = config.train_seed(out.m_lift.unwrap_or(0));
    manifest.epochs = Some(out.trace.len());
    manifest.termination = Some(out.trace.termination);
    manifest.compute_seconds = Some(out.compute_seconds);
}

/// Generates, splits, optionally lifts and evolves, then trains one model.
///
/// Lifted variants use `config.m_lift`. When `output_dir` is set the run's artifacts are
/// written there; on failure only a manifest marked `failed` is left behind.
pub fn run_model(config: &ExperimentConfig) -> Result<RunOutput> {
    let result = setup(config).and_then(|(ds, split)| {
        let m_lift = match config.variant {
            Variant::Baseline => None,
            _ => Some(
                config
                    .m_lift
                    .ok_or_else(|| Error::validation("lifted variants need --m-lift"))?,
            ),
        };
        run_cell(&ds, &split, config, m_lift)
    });
    let Some(dir) = &config.output_dir else {
        return result;
    };
    let mut manifest = RunManifest::new("train", config);
    match result {
        Ok(out) => {
            complete_manifest(&mut manifest, config, &out);
            write_run(dir, &manifest, &out)?;
            Ok(out)
        }
        Err(e) => {
            write_failure(dir, manifest, &e)?;
            Err(e)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m_lift: usize,
    /// Running maximum of the per-epoch test alignment.
    pub best_test_alignment: f64,
    pub final_train_alignment: f64,
    pub final_test_alignment: f64,
    pub epochs: usize,
    pub termination: Option<Termination>,
    pub compute_seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub variant: Variant,
    pub cells: Vec<SweepCell>,
    pub optimal_m_lift: usize,
    /// Sum of per-cell compute times.
    pub total_seconds: f64,
    /// Weights and trace of the optimal cell.
    pub best: RunOutput,
}

impl SweepResult {
    pub fn best_test_alignment(&self) -> f64 {
        self.best.trace.best_test_alignment()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::writer(path)?;
        w.write_record([
            "m_lift",
            "best_test_align",
            "final_train_align",
            "final_test_align",
            "epochs",
            "termination",
            "seconds",
            "status",
        ])?;
        for c in &self.cells {
            let term = match c.termination {
                Some(Termination::LossFloor) => "loss_floor",
                Some(Termination::MaxEpochs) => "max_epochs",
                None => "",
            };
            w.write_record([
                c.m_lift.to_string(),
                io::fmt_f64(c.best_test_alignment),
                io::fmt_f64(c.final_train_alignment),
                io::fmt_f64(c.final_test_alignment),
                c.epochs.to_string(),
                term.to_string(),
                io::fmt_f64(c.compute_seconds),
                c.error.clone().unwrap_or_else(|| "ok".to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Picks the cell with the highest best-test alignment; ties go to the smaller `m_lift`.
pub fn select_optimal(cells: &[SweepCell]) -> Option<usize> {
    cells
        .iter()
        .filter(|c| c.error.is_none())
        .fold(None::<&SweepCell>, |best, c| match best {
            Some(b) if b.best_test_alignment >= c.best_test_alignment => Some(b),
            _ => Some(c),
        })
        .map(|c| c.m_lift)
}

fn sweep_on(ds: &LabeledDataset, split: &SplitDataset, config: &ExperimentConfig) -> Result<SweepResult> {
    if config.variant == Variant::Baseline {
        return Err(Error::validation("sweeps need a lifted variant"));
    }
    let dims: Vec<usize> = (config.lift_min..=config.lift_max).collect();
    let outputs: Vec<Result<RunOutput>> = dims
        .par_iter()
        .map(|&ml| run_cell(ds, split, config, Some(ml)))
        .collect();
    let cells: Vec<SweepCell> = dims
        .iter()
        .zip(&outputs)
        .map(|(&m_lift, out)| match out {
            Ok(o) => {
                let last = o.trace.last();
                SweepCell {
                    m_lift,
                    best_test_alignment: o.trace.best_test_alignment(),
                    final_train_alignment: last.map_or(f64::NAN, |r| r.train_alignment),
                    final_test_alignment: last.map_or(f64::NAN, |r| r.test_alignment),
                    epochs: o.trace.len(),
                    termination: Some(o.trace.termination),
                    compute_seconds: o.compute_seconds,
                    error: None,
                }
            }
            Err(e) => SweepCell {
                m_lift,
                best_test_alignment: f64::NAN,
                final_train_alignment: f64::NAN,
                final_test_alignment: f64::NAN,
                epochs: 0,
                termination: None,
                compute_seconds: 0.0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let optimal = select_optimal(&cells).ok_or(Error::SweepFailed(cells.len()))?;
    let total_seconds = cells.iter().map(|c| c.compute_seconds).sum();
    let best = outputs
        .into_iter()
        .zip(&dims)
        .find_map(|(o, &ml)| (ml == optimal).then_some(o))
        .expect("optimal cell exists")?;
    Ok(SweepResult {
        variant: config.variant,
        cells,
        optimal_m_lift: optimal,
        total_seconds,
        best,
    })
}

/// Trains the lifted variant at every `m_lift` in the range and keeps the best cell.
///
/// Cells run in parallel with seeds derived from `(master_seed, m_lift)`, so results do not
/// depend on scheduling. A failing cell is recorded and skipped; the sweep fails only when
/// every cell fails.
pub fn sweep_lift_dimensions(config: &ExperimentConfig) -> Result<SweepResult> {
    let (ds, split) = setup(config)?;
    let sweep = sweep_on(&ds, &split, config)?;
    if let Some(dir) = &config.output_dir {
        write_sweep(dir, config, &sweep)?;
    }
    Ok(sweep)
}

fn write_sweep(dir: &Path, config: &ExperimentConfig, sweep: &SweepResult) -> Result<()> {
    prepare_dir(dir)?;
    sweep.write_csv(&dir.join("sweep.csv"))?;
    let mut manifest = RunManifest::new("sweep", config);
    complete_manifest(&mut manifest, config, &sweep.best);
    manifest.compute_seconds = Some(sweep.total_seconds);
    write_run(dir, &manifest, &sweep.best)
}

#[derive(Clone, Debug)]
pub struct VariantReport {
    pub variant: Variant,
    pub m_lift: Option<usize>,
    pub trace: TrainingTrace,
    pub weights: WeightMatrix,
    /// Whole-variant compute time (the full sweep for lifted variants).
    pub total_seconds: f64,
    pub sweep: Option<Vec<SweepCell>>,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub variants: Vec<VariantReport>,
    /// Variants that failed, with their error messages.
    pub missing: Vec<(Variant, String)>,
    pub geometry_before: ClusterSummary,
    /// Geometry of the evolved lift at the chaos variant's optimal `m_lift`.
    pub geometry_after: Option<ClusterSummary>,
}

impl ComparisonReport {
    pub fn get(&self, variant: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.variant == variant)
    }
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    variant: Variant,
    m_lift: Option<usize>,
    epochs: usize,
    termination: Termination,
    final_train_loss: f64,
    final_test_loss: f64,
    final_test_alignment: f64,
    best_test_alignment: f64,
    final_test_proportion: f64,
    total_seconds: f64,
    trace: &'a str,
}

/// Runs the baseline once and sweeps both lifted variants on the same dataset and split.
///
/// `configs` supplies per-variant settings; all must share the dataset spec and master
/// seed.
pub fn compare_models(configs: &[ExperimentConfig], output_dir: Option<&Path>) -> Result<ComparisonReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::validation("no variant configurations given"))?;
    for c in configs {
        if c.dataset != first.dataset || c.master_seed != first.master_seed {
            return Err(Error::validation("all variants must share the dataset and seed"));
        }
    }
    let (ds, split) = setup(first)?;
    let mut variants = Vec::new();
    let mut missing = Vec::new();
    let mut geometry_after = None;
    for variant in Variant::ALL {
        let Some(cfg) = configs.iter().find(|c| c.variant == variant) else {
            missing.push((variant, "not configured".to_string()));
            continue;
        };
        if let Err(e) = cfg.validate() {
            missing.push((variant, e.to_string()));
            continue;
        }
        let result = if variant == Variant::Baseline {
            run_cell(&ds, &split, cfg, None).map(|o| (o, None))
        } else {
            sweep_on(&ds, &split, cfg).map(|s| {
                let cells = s.cells;
                (s.best, Some(cells))
            })
        };
        match result {
            Ok((out, sweep)) => {
                let total_seconds = match &sweep {
                    Some(cells) => cells.iter().map(|c| c.compute_seconds).sum(),
                    None => out.compute_seconds,
                };
                if variant == Variant::LiftChaos {
                    let ml = out.m_lift.expect("lifted run");
                    let prepared = prepare_inputs(&ds, cfg, Some(ml))?;
                    geometry_after = Some(ClusterSummary::compute(
                        &prepared.inputs,
                        &prepared.labels,
                        ds.m(),
                    )?);
                }
                variants.push(VariantReport {
                    variant,
                    m_lift: out.m_lift,
                    trace: out.trace,
                    weights: out.weights,
                    total_seconds,
                    sweep,
                });
            }
            Err(e) => missing.push((variant, e.to_string())),
        }
    }
    let report = ComparisonReport {
        variants,
        missing,
        geometry_before: ClusterSummary::compute(&ds.samples, &ds.labels, ds.m())?,
        geometry_after,
    };
    if let Some(dir) = output_dir {
        write_comparison(dir, configs, &report)?;
    }
    Ok(report)
}

fn write_comparison(dir: &Path, configs: &[ExperimentConfig], report: &ComparisonReport) -> Result<()> {
    prepare_dir(dir)?;
    let mut summaries = Vec::new();
    for v in &report.variants {
        let sub = dir.join(v.variant.name());
        let cfg = configs.iter().find(|c| c.variant == v.variant).expect("configured");
        let mut manifest = RunManifest::new("compare", cfg);
        let out = RunOutput {
            weights: v.weights.clone(),
            trace: v.trace.clone(),
            compute_seconds: v.total_seconds,
            m_lift: v.m_lift,
        };
        complete_manifest(&mut manifest, cfg, &out);
        write_run(&sub, &manifest, &out)?;
        if let Some(cells) = &v.sweep {
            let sweep = SweepResult {
                variant: v.variant,
                cells: cells.clone(),
                optimal_m_lift: v.m_lift.unwrap_or(0),
                total_seconds: v.total_seconds,
                best: out,
            };
            sweep.write_csv(&sub.join("sweep.csv"))?;
        }
        let last = v.trace.last().copied();
        summaries.push((v, last));
    }
    let rows: Vec<ComparisonSummary<'_>> = summaries
        .iter()
        .filter_map(|(v, last)| {
            last.map(|r| ComparisonSummary {
                variant: v.variant,
                m_lift: v.m_lift,
                epochs: v.trace.len(),
                termination: v.trace.termination,
                final_train_loss: r.train_loss,
                final_test_loss: r.test_loss,
                final_test_alignment: r.test_alignment,
                best_test_alignment: v.trace.best_test_alignment(),
                final_test_proportion: r.test_proportion,
                total_seconds: v.total_seconds,
                trace: v.variant.name(),
            })
        })
        .collect();
    let missing: Vec<_> = report
        .missing
        .iter()
        .map(|(v, e)| serde_json::json!({ "variant": v, "error": e }))
        .collect();
    io::write_json(
        &dir.join("comparison.json"),
        &serde_json::json!({ "variants": rows, "missing": missing }),
    )?;
    let timing: Vec<Vec<String>> = report
        .variants
        .iter()
        .map(|v| vec![v.variant.name().to_string(), io::fmt_f64(v.total_seconds)])
        .collect();
    let mut w = io::writer(&dir.join("timing.csv"))?;
    w.write_record(["variant", "seconds"])?;
    for row in timing {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(dir.join("timing.csv"), e))?;
    write_aligned_curves(&dir.join("curves.csv"), report)?;
    report.geometry_before.write_csv(&dir.join("geometry").join("before"))?;
    if let Some(g) = &report.geometry_after {
        g.write_csv(&dir.join("geometry").join("after"))?;
    }
    Ok(())
}

/// One row per epoch with every variant's loss and accuracy columns side by side; variants
/// that stopped earlier leave their cells empty.
fn write_aligned_curves(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = crate::io::writer(path)?;
    let mut header = vec!["epoch".to_string()];
    for v in &report.variants {
        for col in ["train_loss", "test_loss", "train_align", "test_align", "train_prop", "test_prop"] {
            header.push(format!("{}_{col}", v.variant.name()));
        }
    }
    w.write_record(&header)?;
    let longest = report.variants.iter().map(|v| v.trace.len()).max().unwrap_or(0);
    for e in 0..longest {
        let mut rec = vec![(e + 1).to_string()];
        for v in &report.variants {
            match v.trace.epochs.get(e) {
                Some(r) => rec.extend(
                    [
                        r.train_loss,
                        r.test_loss,
                        r.train_alignment,
                        r.test_alignment,
                        r.train_proportion,
                        r.test_proportion,
                    ]
                    .map(io::fmt_f64),
                ),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Builds the ratio curve, estimates the optimal interval and writes `curve.csv` plus
/// `estimate.json`. The curve is written even when estimation fails.
pub fn select_interval(
    spec: DatasetSpec,
    config: &RatioCurveConfig,
    output_dir: Option<&Path>,
) -> Result<(RatioCurve, IntervalEstimate)> {
    let ds = generate_dataset(spec)?;
    let curve = ratio_curve(&ds, config)?;
    let estimate = select_interval_from_curve(&curve, output_dir)?;
    if let Some(dir) = output_dir {
        io::write_json(
            &dir.join("manifest.json"),
            &serde_json::json!({
                "command": "select-interval",
                "version": env!("CARGO_PKG_VERSION"),
                "dataset": spec,
                "ratio": config,
            }),
        )?;
    }
    Ok((curve, estimate))
}

/// Estimation step of [`select_interval`] for an already computed curve.
pub fn select_interval_from_curve(curve: &RatioCurve, output_dir: Option<&Path>) -> Result<IntervalEstimate> {
    if let Some(dir) = output_dir {
        prepare_dir(dir)?;
        curve.write_csv(&dir.join("curve.csv"))?;
        remove_if_present(&dir.join("estimate.json"));
    }
    let estimate = estimate_optimal_interval(curve)?;
    if let Some(dir) = output_dir {
        estimate.write_json(&dir.join("estimate.json"))?;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(m_lift: usize, best: f64) -> SweepCell {
        SweepCell {
            m_lift,
            best_test_alignment: best,
            final_train_alignment: best,
            final_test_alignment: best,
            epochs: 1,
            termination: Some(Termination::MaxEpochs),
            compute_seconds: 0.0,
            error: None,
        }
    }

    #[test]
    fn optimum_prefers_smaller_dimension_on_ties() {
        let cells = vec![cell(8, 0.9), cell(9, 0.95), cell(10, 0.95), cell(11, 0.7)];
        assert_eq!(select_optimal(&cells), Some(9));
        let mut failed = cell(12, f64::NAN);
        failed.error = Some("boom".into());
        assert_eq!(select_optimal(&[failed.clone()]), None);
        assert_eq!(select_optimal(&[failed, cell(13, 0.1)]), Some(13));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("lift_chaos".parse::<Variant>().unwrap(), Variant::LiftChaos);
        assert_eq!("baseline".parse::<Variant>().unwrap(), Variant::Baseline);
        assert!("other".parse::<Variant>().is_err());
        assert_eq!(Variant::Lift.default_epochs(), 2000);
    }

    #[test]
    fn default_config_ranges() {
        let c = ExperimentConfig::new(20, Variant::LiftChaos, 1);
        assert_eq!((c.lift_min, c.lift_max), (26, 50));
        assert_eq!(c.train.max_epochs, 500);
        assert!(c.validate().is_ok());
        let mut bad = c.clone();
        bad.lift_min = 25;
        assert!(bad.validate().is_err());
    }
}
