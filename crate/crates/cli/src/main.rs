//! Command-line front end: data generation, training, sweeps, model comparison, interval
//! selection and geometry diagnostics. Results go to `--out` as CSV/JSON; a one-line JSON
//! summary is printed on success and an error object on failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaoslift::experiment::{prepare_inputs, ExperimentConfig};
use chaoslift::geometry::{ClusterSummary, RatioCurveConfig, TGrid};
use chaoslift::seed::{child_seed, role};
use chaoslift::{
    compare_models, generate_dataset, io, run_model, select_interval, sweep_lift_dimensions,
    weight_spread, CoefficientSharing, Error, InitScheme, Result, Variant, WeightMatrix,
};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "chaoslift", version, about = "Lifting- and chaos-enhanced softmax classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset, optionally with its lift (and evolved lift).
    GenData(Opts),
    /// Train one model.
    Train(Opts),
    /// Train a lifted variant over a range of lifting dimensions.
    Sweep(Opts),
    /// Run the baseline and sweep both lifted variants on one dataset.
    Compare(Opts),
    /// Estimate the optimal chaotic evolution interval from the ratio curve.
    SelectInterval(Opts),
    /// Cluster geometry of raw, lifted or evolved data; optional weight spread.
    Geometry(Opts),
}

#[derive(Args, Debug)]
struct Opts {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run exactly from a previous run's manifest (only --out and --jobs may be added).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Weights CSV for the weight-spread report (geometry only).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    #[serde(alias = "n-class")]
    n_class: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    #[serde(alias = "m-lift")]
    m_lift: Option<usize>,
    #[arg(long)]
    #[serde(alias = "lift-min")]
    lift_min: Option<usize>,
    #[arg(long)]
    #[serde(alias = "lift-max")]
    lift_max: Option<usize>,
    /// `shared` (one coefficient matrix per lift) or `per-sample`.
    #[arg(long, value_parser = parse_sharing)]
    sharing: Option<CoefficientSharing>,
    #[arg(long)]
    forcing: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Weight initialization: `gaussian` (N(0, 1/d)) or `zeros`.
    #[arg(long, value_parser = parse_init)]
    init: Option<InitScheme>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; never changes numerical output.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    #[serde(alias = "t-start")]
    t_start: Option<f64>,
    #[arg(long)]
    #[serde(alias = "t-step")]
    t_step: Option<f64>,
    #[arg(long)]
    #[serde(alias = "t-len")]
    t_len: Option<usize>,
}

fn parse_init(s: &str) -> std::result::Result<InitScheme, String> {
    match s {
        "gaussian" => Ok(InitScheme::Gaussian),
        "zeros" => Ok(InitScheme::Zeros),
        other => Err(format!("unknown init scheme {other:?}")),
    }
}

fn parse_sharing(s: &str) -> std::result::Result<CoefficientSharing, String> {
    match s {
        "shared" => Ok(CoefficientSharing::Shared),
        "per-sample" | "per_sample" => Ok(CoefficientSharing::PerSample),
        other => Err(format!("unknown sharing mode {other:?}")),
    }
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Settings {
    /// Flags over file values.
    fn merged(mut self, top: &Settings) -> Settings {
        overlay!(
            self, top, m, n_class, sigma2, variant, m_lift, lift_min, lift_max, sharing, forcing,
            dt, horizon, epochs, batch, lr, l2, init, seed, out, jobs, t_start, t_step, t_len
        );
        self
    }

    fn only_output_flags(&self) -> bool {
        let probe = Settings {
            out: None,
            jobs: None,
            ..self.clone()
        };
        format!("{probe:?}") == format!("{:?}", Settings::default())
    }

    fn experiment(&self, default_variant: Variant) -> Result<ExperimentConfig> {
        let m = self
            .m
            .ok_or_else(|| Error::validation("--m is required"))?;
        let variant = self.variant.unwrap_or(default_variant);
        let mut c = ExperimentConfig::new(m, variant, self.seed.unwrap_or(0));
        if let Some(n) = self.n_class {
            c.dataset.n_class = n;
        }
        if let Some(s) = self.sigma2 {
            c.dataset.sigma2 = s;
        }
        c.m_lift = self.m_lift;
        if let Some(v) = self.lift_min {
            c.lift_min = v;
        }
        if let Some(v) = self.lift_max {
            c.lift_max = v;
        }
        if let Some(v) = self.sharing {
            c.sharing = v;
        }
        if let Some(v) = self.forcing {
            c.chaos.forcing = v;
        }
        if let Some(v) = self.dt {
            c.chaos.dt = v;
        }
        if let Some(v) = self.horizon {
            c.chaos.horizon = v;
        }
        if let Some(v) = self.epochs {
            c.train.max_epochs = v;
        }
        if let Some(v) = self.batch {
            c.train.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.l2 {
            c.train.l2_coeff = v;
        }
        if let Some(v) = self.init {
            c.train.init = v;
        }
        c.output_dir = self.out.clone();
        Ok(c)
    }
}

fn load_settings(opts: &Opts) -> Result<Settings> {
    let file = match &opts.config {
        Some(path) => io::read_json::<Settings>(path)?,
        None => Settings::default(),
    };
    Ok(file.merged(&opts.settings))
}

/// Resolves the experiment configuration from a manifest or from flags and config file.
fn resolve(opts: &Opts, settings: &Settings, default_variant: Variant) -> Result<ExperimentConfig> {
    match &opts.manifest {
        Some(path) => {
            if !settings.only_output_flags() {
                return Err(Error::validation(
                    "--manifest can only be combined with --out and --jobs",
                ));
            }
            let mut c = ExperimentConfig::from_manifest(path)?;
            c.output_dir = settings.out.clone();
            Ok(c)
        }
        None => settings.experiment(default_variant),
    }
}

fn cmd_gen_data(settings: &Settings, cfg: &ExperimentConfig) -> Result<Value> {
    let ds = generate_dataset(cfg.dataset)?;
    let mut summary = json!({ "rows": ds.len(), "m": ds.m(), "dataset_seed": cfg.dataset.seed });
    let Some(dir) = &cfg.output_dir else {
        return Ok(summary);
    };
    ds.write_csv(dir.join("data.csv"))?;
    if settings.m_lift.is_some() && cfg.variant != Variant::Baseline {
        let prepared = prepare_inputs(&ds, cfg, cfg.m_lift)?;
        if let Some(lifted) = prepared.lifted {
            lifted.write(dir, "lifted")?;
            summary["lifted"] = json!({ "m_lift": lifted.m_lift(), "evolved": lifted.is_evolved() });
        }
    }
    io::write_json(
        &dir.join("manifest.json"),
        &json!({
            "command": "gen-data",
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
        }),
    )?;
    Ok(summary)
}

fn cmd_train(cfg: &ExperimentConfig) -> Result<Value> {
    let out = run_model(cfg)?;
    Ok(json!({
        "variant": cfg.variant,
        "m_lift": out.m_lift,
        "epochs": out.trace.len(),
        "termination": out.trace.termination,
        "best_test_alignment": out.trace.best_test_alignment(),
        "final": out.trace.last(),
        "seconds": out.compute_seconds,
    }))
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Value> {
    let sweep = sweep_lift_dimensions(cfg)?;
    let failed = sweep.cells.iter().filter(|c| c.error.is_some()).count();
    Ok(json!({
        "variant": sweep.variant,
        "cells": sweep.cells.len(),
        "failed_cells": failed,
        "optimal_m_lift": sweep.optimal_m_lift,
        "best_test_alignment": sweep.best_test_alignment(),
        "seconds": sweep.total_seconds,
    }))
}

fn cmd_compare(settings: &Settings, base: &ExperimentConfig) -> Result<Value> {
    let configs: Vec<ExperimentConfig> = Variant::ALL
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.variant = v;
            c.train.max_epochs = settings.epochs.unwrap_or(v.default_epochs());
            c.output_dir = None;
            c
        })
        .collect();
    let report = compare_models(&configs, base.output_dir.as_deref())?;
    let variants: Vec<Value> = report
        .variants
        .iter()
        .map(|v| {
            json!({
                "variant": v.variant,
                "m_lift": v.m_lift,
                "epochs": v.trace.len(),
                "best_test_alignment": v.trace.best_test_alignment(),
                "final": v.trace.last(),
                "seconds": v.total_seconds,
            })
        })
        .collect();
    let missing: Vec<Value> = report
        .missing
        .iter()
        .map(|(v, e)| json!({ "variant": v, "error": e }))
        .collect();
    Ok(json!({ "variants": variants, "missing": missing }))
}

fn cmd_select_interval(settings: &Settings, cfg: &ExperimentConfig) -> Result<Value> {
    let m = cfg.dataset.m;
    let mut ratio = RatioCurveConfig::with_defaults(m, child_seed(cfg.master_seed, role::LIFT, 0));
    ratio.lift_min = cfg.lift_min;
    ratio.lift_max = cfg.lift_max;
    ratio.forcing = cfg.chaos.forcing;
    ratio.dt = cfg.chaos.dt;
    ratio.sharing = cfg.sharing;
    let d = TGrid::default();
    ratio.grid = TGrid {
        start: settings.t_start.unwrap_or(d.start),
        step: settings.t_step.unwrap_or(d.step),
        len: settings.t_len.unwrap_or(d.len),
    };
    let (_, estimate) = select_interval(cfg.dataset, &ratio, cfg.output_dir.as_deref())?;
    Ok(serde_json::to_value(estimate)?)
}

fn cmd_geometry(weights: Option<&Path>, cfg: &ExperimentConfig) -> Result<Value> {
    let ds = generate_dataset(cfg.dataset)?;
    let prepared = prepare_inputs(&ds, cfg, cfg.m_lift)?;
    let summary = ClusterSummary::compute(&prepared.inputs, &prepared.labels, ds.m())?;
    let m = ds.m();
    let mut min_cross = f64::INFINITY;
    let mut max_cross = 0.0_f64;
    for a in 0..m {
        for b in (0..m).filter(|&b| b != a) {
            min_cross = min_cross.min(summary.min_max.min[(a, b)]);
            max_cross = max_cross.max(summary.min_max.max[(a, b)]);
        }
    }
    let per_class = &summary.centroid_distances.per_class_average;
    let mut out = json!({
        "dimension": prepared.inputs.cols(),
        "mean_spread": summary.average_spread.iter().sum::<f64>() / m as f64,
        "mean_centroid_distance": per_class.iter().sum::<f64>() / m as f64,
        "min_cross_distance": min_cross,
        "max_cross_distance": max_cross,
    });
    if let Some(dir) = &cfg.output_dir {
        summary.write_csv(&dir.join("geometry"))?;
    }
    if let Some(path) = weights {
        let spread = weight_spread(&WeightMatrix::read_csv(path)?)?;
        out["weight_spread_mean"] = json!(spread.mean());
        if let Some(dir) = &cfg.output_dir {
            spread.write_csv(&dir.join("geometry").join("weight_spread.csv"))?;
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<Value> {
    let (opts, default_variant) = match &cli.command {
        Command::GenData(o) | Command::Train(o) | Command::Geometry(o) => (o, Variant::Baseline),
        Command::Sweep(o) | Command::Compare(o) | Command::SelectInterval(o) => {
            (o, Variant::LiftChaos)
        }
    };
    let settings = load_settings(opts)?;
    if let Some(jobs) = settings.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::validation(format!("cannot configure {jobs} threads: {e}")))?;
    }
    let cfg = resolve(opts, &settings, default_variant)?;
    match &cli.command {
        Command::GenData(_) => cmd_gen_data(&settings, &cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Compare(_) => cmd_compare(&settings, &cfg),
        Command::SelectInterval(_) => cmd_select_interval(&settings, &cfg),
        Command::Geometry(o) => cmd_geometry(o.weights.as_deref(), &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": first } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
