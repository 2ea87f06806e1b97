//! Data generation, training, evaluation and sweeps over trials and seeds.
//!
//! Directory layout: with one trial, the files of a command sit directly in
//! its directory; with several, trial `k` lives in `trial_k/`.

use std::path::{Path, PathBuf};

use dmdsc_core::data::{generate_for_split, make_trial_splits, LabeledDataset, Role, SynthData};
use dmdsc_core::eval::{average_reports, evaluate_trial, EvalReport};
use dmdsc_core::train::{train, training_class_counts, Checkpoint, TrainLog};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ExperimentConfig;
use crate::csv_io::{read_csv, write_csv};
use crate::fsutil::write_atomic;
use crate::report::{curve_csv, trainlog_csv, ReportDoc, ResultRow, ResultsTable};
use crate::{Error, Result};

pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_KNOWN_CSV: &str = "test_known.csv";
pub const TEST_UNKNOWN_CSV: &str = "test_unknown.csv";
pub const BACKGROUND_CSV: &str = "background.csv";
pub const MANIFEST: &str = "manifest.toml";
pub const CHECKPOINT: &str = "checkpoint.dmdsc";
pub const TRAINLOG_CSV: &str = "trainlog.csv";
pub const REPORT: &str = "report.toml";
pub const REPORT_AVG: &str = "report_avg.toml";
pub const CURVE_CSV: &str = "curve.csv";

pub fn trial_dir(root: &Path, trial: usize, trials: usize) -> PathBuf {
    if trials == 1 {
        root.to_path_buf()
    } else {
        root.join(format!("trial_{trial}"))
    }
}

/// Benchmark data for one (trial, seed) pair. Splits and samples both
/// derive from `seed`.
pub fn synth_data(cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<SynthData> {
    let synth = cfg.synth_config(seed);
    let total = synth.num_known + synth.num_unknown;
    let splits = make_trial_splits(total, synth.num_known, cfg.trials, seed)?;
    Ok(generate_for_split(&synth, &splits[trial])?)
}

#[derive(Serialize)]
struct Manifest {
    created_unix: u64,
    seed: u64,
    trials: Vec<ManifestTrial>,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct ManifestTrial {
    trial: usize,
    known_class_ids: Vec<usize>,
    unknown_class_ids: Vec<usize>,
    train: usize,
    test_known: usize,
    test_unknown: usize,
    background: usize,
}

/// Writes the four dataset CSVs per trial plus `manifest.toml`.
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let synth = cfg.synth_config(cfg.seed);
    let splits = make_trial_splits(synth.num_known + synth.num_unknown, synth.num_known, cfg.trials, cfg.seed)?;
    let mut written = Vec::new();
    let mut trials = Vec::new();
    for split in &splits {
        let data = generate_for_split(&synth, split)?;
        let dir = trial_dir(out, split.trial_index, cfg.trials);
        for (name, ds) in [
            (TRAIN_CSV, &data.train),
            (TEST_KNOWN_CSV, &data.test_known),
            (TEST_UNKNOWN_CSV, &data.test_unknown),
            (BACKGROUND_CSV, &data.background),
        ] {
            let path = dir.join(name);
            write_csv(ds, &path)?;
            written.push(path);
        }
        trials.push(ManifestTrial {
            trial: split.trial_index,
            known_class_ids: split.known_class_ids.clone(),
            unknown_class_ids: split.unknown_class_ids.clone(),
            train: data.train.len(),
            test_known: data.test_known.len(),
            test_unknown: data.test_unknown.len(),
            background: data.background.len(),
        });
    }
    let manifest = Manifest {
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed: cfg.seed,
        trials,
        config: cfg.clone(),
    };
    let path = out.join(MANIFEST);
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Trains on in-memory data with the network and optimizer settings of
/// `cfg`.
pub fn train_model(
    cfg: &ExperimentConfig,
    train_set: &LabeledDataset,
    background: Option<&LabeledDataset>,
    seed: u64,
) -> Result<(Checkpoint, TrainLog)> {
    let num_classes = training_class_counts(train_set)?.len();
    let net = cfg.net_config(train_set.dim(), num_classes, seed)?;
    let tc = cfg.train_config(seed)?;
    Ok(train(train_set, background, &net, &tc)?)
}

/// Result of training one trial from files.
#[derive(Debug, Clone)]
pub struct TrainedTrial {
    pub dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
}

/// Trains every trial found under `data`, writing `checkpoint.dmdsc` and
/// `trainlog.csv` under `out`. `background.csv` is optional; without it,
/// training with a positive background weight fails.
pub fn train_from_files(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<Vec<TrainedTrial>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let src = trial_dir(data, trial, cfg.trials);
            let train_set = read_csv(&src.join(TRAIN_CSV), Role::KnownTrain)?;
            let bg_path = src.join(BACKGROUND_CSV);
            let background = if bg_path.exists() {
                Some(read_csv(&bg_path, Role::Background)?)
            } else {
                None
            };
            let (checkpoint, log) = train_model(cfg, &train_set, background.as_ref(), cfg.seed)?;
            let dir = trial_dir(out, trial, cfg.trials);
            save_checkpoint(&checkpoint, &dir.join(CHECKPOINT))?;
            write_atomic(&dir.join(TRAINLOG_CSV), &trainlog_csv(&log))?;
            Ok(TrainedTrial { dir, checkpoint, log })
        })
        .collect()
}

/// Evaluates every trial's checkpoint on its test files. Writes a report and
/// curve per trial plus `report_avg.toml`; returns the per-trial reports and
/// their average.
pub fn eval_from_files(
    cfg: &ExperimentConfig,
    data: &Path,
    models: &Path,
    out: &Path,
) -> Result<(Vec<EvalReport>, EvalReport)> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let reports: Vec<EvalReport> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let ckpt = load_checkpoint(&trial_dir(models, trial, cfg.trials).join(CHECKPOINT))?;
            let src = trial_dir(data, trial, cfg.trials);
            let known = read_csv(&src.join(TEST_KNOWN_CSV), Role::KnownTest)?;
            let unknown = read_csv(&src.join(TEST_UNKNOWN_CSV), Role::UnknownTest)?;
            let report = evaluate_trial(&ckpt.params, &ckpt.centers, &known, &unknown)?;
            let dir = trial_dir(out, trial, cfg.trials);
            ReportDoc::new(&report, 1).save(&dir.join(REPORT))?;
            write_atomic(&dir.join(CURVE_CSV), &curve_csv(&report.curve))?;
            Ok(report)
        })
        .collect::<Result<_>>()?;
    let avg = average_reports(&reports)?;
    ReportDoc::new(&avg, reports.len()).save(&out.join(REPORT_AVG))?;
    Ok((reports, avg))
}

/// Trains and evaluates every (trial, run) pair of `cfg` in memory and
/// averages the reports. Run `r` uses seed `cfg.seed + r`.
pub fn run_cell(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = (0..cfg.runs as u64)
        .flat_map(|r| (0..cfg.trials).map(move |t| (t, cfg.seed + r)))
        .collect();
    let reports: Vec<EvalReport> = jobs
        .par_iter()
        .map(|&(trial, seed)| {
            let data = synth_data(cfg, trial, seed)?;
            let (ckpt, _) = train_model(cfg, &data.train, Some(&data.background), seed)?;
            Ok(evaluate_trial(&ckpt.params, &ckpt.centers, &data.test_known, &data.test_unknown)?)
        })
        .collect::<Result<_>>()?;
    Ok(average_reports(&reports)?)
}

fn outcome(result: Result<EvalReport>) -> std::result::Result<EvalReport, String> {
    result.map_err(|e| {
        if e.is_validation() {
            format!("invalid: {e}")
        } else {
            format!("error: {e}")
        }
    })
}

fn require_nonempty(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::Config(format!("sweep list {name} is empty")))
    } else {
        Ok(())
    }
}

/// Runs `cells` in parallel, keeping their order.
fn sweep(axes: &[&str], cells: Vec<(String, Vec<String>, ExperimentConfig)>) -> ResultsTable {
    let rows = cells
        .into_par_iter()
        .map(|(variant, coords, cfg)| ResultRow {
            variant,
            coords,
            outcome: outcome(run_cell(&cfg)),
        })
        .collect();
    ResultsTable {
        axes: axes.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

/// One row per `(lambda_inter, lambda_bg)` pair.
pub fn ablate_lambda(cfg: &ExperimentConfig, inter: &[f64], bg: &[f64]) -> Result<ResultsTable> {
    require_nonempty("lambda_inter", inter)?;
    require_nonempty("lambda_bg", bg)?;
    cfg.validate()?;
    let mut cells = Vec::new();
    for &li in inter {
        for &lb in bg {
            let mut c = cfg.clone();
            c.train.lambda_inter = li;
            c.train.lambda_bg = lb;
            cells.push((format!("lambda_inter={li}/lambda_bg={lb}"), vec![li.to_string(), lb.to_string()], c));
        }
    }
    Ok(sweep(&["lambda_inter", "lambda_bg"], cells))
}

/// One row per `(m_min, m_max)` pair. Pairs that break the margin
/// constraint are reported as invalid rows; the rest still run.
pub fn ablate_margin(cfg: &ExperimentConfig, m_min: &[f64], m_max: &[f64]) -> Result<ResultsTable> {
    require_nonempty("m_min", m_min)?;
    require_nonempty("m_max", m_max)?;
    // the swept fields are checked per cell
    let mut probe = cfg.clone();
    let bound = dmdsc_core::etf::margin_upper_bound(cfg.train.radius);
    probe.train.m_min = 0.25 * bound;
    probe.train.m_max = 0.5 * bound;
    probe.validate()?;
    let mut cells = Vec::new();
    for &lo in m_min {
        for &hi in m_max {
            let mut c = cfg.clone();
            c.train.m_min = lo;
            c.train.m_max = hi;
            cells.push((format!("m_min={lo}/m_max={hi}"), vec![lo.to_string(), hi.to_string()], c));
        }
    }
    Ok(sweep(&["m_min", "m_max"], cells))
}

/// Uniform and dynamic margins on identical data for each imbalance ratio;
/// two rows per ratio.
pub fn ir_study(cfg: &ExperimentConfig, ratios: &[f64]) -> Result<ResultsTable> {
    require_nonempty("imbalance_ratio", ratios)?;
    cfg.validate()?;
    let mut cells = Vec::new();
    for &ir in ratios {
        for mode in ["uniform", "dynamic"] {
            let mut c = cfg.clone();
            c.data.imbalance_ratio = ir;
            c.train.margin_mode = mode.to_string();
            cells.push((format!("ir={ir}/{mode}"), vec![ir.to_string(), mode.to_string()], c));
        }
    }
    Ok(sweep(&["imbalance_ratio", "margin_mode"], cells))
}

/// Writes a sweep's tables plus the config that produced it.
pub fn save_sweep(cfg: &ExperimentConfig, table: &ResultsTable, out: &Path) -> Result<()> {
    table.save(out)?;
    write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())
}
