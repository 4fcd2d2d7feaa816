//! Training runs, evaluation and the files a run directory holds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use apnea_core::dataset::{
    read_dataset, split_dataset, synthetic_dataset, write_dataset, DatasetSplit, RowMatrix, WindowedDataset,
};
use apnea_core::metrics::{full_report, MetricsReport};
use apnea_core::nn::{read_checkpoint, train, write_checkpoint, EpochTrace, TrainedModel};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::CliError;
use crate::plot::{learning_curves, parse_roc_csv, roc_area, roc_chart};
use crate::atomic_write;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Files every completed run directory holds.
pub const RUN_ARTIFACTS: [&str; 16] = [
    "config.txt",
    "manifest.txt",
    "summary.txt",
    "model.ckpt",
    "model_best.ckpt",
    "trace.csv",
    "epoch_seconds.csv",
    "metrics_train.txt",
    "metrics_validation.txt",
    "metrics_test.txt",
    "roc_train.csv",
    "roc_validation.csv",
    "roc_test.csv",
    "accuracy.svg",
    "loss.svg",
    "roc.svg",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }

    pub fn rows(self, split: &DatasetSplit) -> &RowMatrix {
        match self {
            SplitName::Train => &split.train,
            SplitName::Validation => &split.validation,
            SplitName::Test => &split.test,
        }
    }

    /// Parses a `--split` selector: `train`, `test`, `val` or `all`.
    pub fn parse_selector(s: &str) -> Result<Vec<SplitName>, CliError> {
        match s {
            "train" => Ok(vec![SplitName::Train]),
            "test" => Ok(vec![SplitName::Test]),
            "val" | "validation" => Ok(vec![SplitName::Validation]),
            "all" => Ok(SplitName::ALL.to_vec()),
            _ => Err(CliError::Config(format!("unknown split {s:?}; expected train, test, val or all"))),
        }
    }
}

/// SHA-256 over the row values (little-endian f32) followed by the labels.
pub fn fingerprint(rows: &RowMatrix) -> String {
    let mut h = Sha256::new();
    h.update((rows.width() as u64).to_le_bytes());
    for v in rows.values() {
        h.update(v.to_le_bytes());
    }
    h.update(rows.labels());
    format!("{:x}", h.finalize())
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// The windowed dataset a configuration trains on, and where it came from.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(WindowedDataset, String), CliError> {
    let w = cfg.model.window_size;
    match cfg.source {
        DataSource::Synthetic { rows_per_class } => Ok((
            synthetic_dataset(rows_per_class, w, cfg.seed()),
            format!("synthetic:{rows_per_class}x2"),
        )),
        DataSource::ApneaEcg => {
            let path = cfg.dataset_path(w);
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "dataset {} not found; run `apnea build --window {w}` first",
                    path.display()
                )));
            }
            let ds = read_dataset(&path, None)?;
            if ds.window_size() != w {
                return Err(CliError::Config(format!(
                    "{} holds windows of {} samples, configuration asks for {w}",
                    path.display(),
                    ds.window_size()
                )));
            }
            Ok((ds, path.display().to_string()))
        }
    }
}

/// Metrics of one split plus the mean cross-entropy the trainer reports.
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub split: SplitName,
    pub loss: f64,
    pub report: MetricsReport,
}

impl SplitReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("Split = {}\nLoss = {:.9}\n", self.split.as_str(), self.loss);
        s.push_str(&self.report.to_string());
        s
    }
}

pub fn evaluate_split(model: &TrainedModel, split: &DatasetSplit, which: SplitName) -> Result<SplitReport, CliError> {
    let rows = which.rows(split);
    if rows.is_empty() {
        return Err(CliError::EmptyInput(format!("{} split has no rows", which.as_str())));
    }
    let preds = model.predict(rows)?;
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let report = full_report(rows.labels(), &probs)?;
    let (loss, _) = model.evaluate(rows)?;
    Ok(SplitReport {
        split: which,
        loss,
        report,
    })
}

fn write_split_report(dir: &Path, r: &SplitReport) -> Result<(), CliError> {
    let name = r.split.as_str();
    atomic_write(&dir.join(format!("metrics_{name}.txt")), r.to_text().as_bytes())?;
    atomic_write(&dir.join(format!("roc_{name}.csv")), r.report.roc_csv().as_bytes())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".into(), |x| format!("{x:.4}"))
}

/// The ten published result fields, each labelled with its source.
pub fn summary_text(trace: &EpochTrace, test: &SplitReport) -> String {
    let last = trace.last().expect("a finished run has at least one epoch");
    let r = &test.report;
    let e = last.epoch;
    let mut s = String::new();
    let mut kv = |k: &str, src: &str, v: String| {
        let _ = writeln!(s, "{k} [{src}] = {v}");
    };
    kv("Accuracy", &format!("train, epoch {e}"), format!("{:.4}", last.train_accuracy));
    kv("Loss", &format!("train, epoch {e}"), format!("{:.4}", last.train_loss));
    kv("Validation Accuracy", &format!("validation, epoch {e}"), format!("{:.4}", last.validation_accuracy));
    kv("Validation Loss", &format!("validation, epoch {e}"), format!("{:.4}", last.validation_loss));
    kv("Sensitivity (Recall)", "test", opt(r.sensitivity));
    kv("Specificity", "test", opt(r.specificity));
    kv("F1_Score", "test", opt(r.f1));
    kv("Kappa_Score", "test", opt(r.kappa));
    kv("Log_Loss", "test", format!("{:.4}", r.log_loss));
    kv("ROCAUC", "test", opt(r.roc_auc));
    s
}

fn write_plots(dir: &Path, trace: &EpochTrace, test: &SplitReport) -> Result<(), CliError> {
    let (acc, loss) = learning_curves(trace)?;
    atomic_write(&dir.join("accuracy.svg"), acc.as_bytes())?;
    atomic_write(&dir.join("loss.svg"), loss.as_bytes())?;
    if let Some(auc) = test.report.roc_auc {
        atomic_write(&dir.join("roc.svg"), roc_chart(&test.report.roc_points, auc)?.as_bytes())?;
    }
    Ok(())
}

pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub summary: String,
    pub trace: EpochTrace,
    pub reports: Vec<SplitReport>,
}

/// Trains one configuration and writes every run artifact into `run_dir`.
pub fn cmd_train(cfg: &ExperimentConfig, run_dir: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let (ds, source) = load_dataset(cfg)?;
    let split = split_dataset(&ds, cfg.split, cfg.seed())?;
    log::info!(
        "{}: {} training, {} validation, {} test rows",
        cfg.name,
        split.train.n_rows(),
        split.validation.n_rows(),
        split.test.n_rows()
    );
    let outcome = train(&split, &cfg.model)?;

    std::fs::create_dir_all(run_dir).map_err(CliError::io(run_dir))?;
    let config_text = cfg.to_text();
    atomic_write(&run_dir.join("config.txt"), config_text.as_bytes())?;
    if let DataSource::Synthetic { .. } = cfg.source {
        write_dataset(&run_dir.join("dataset.osaw"), &ds)?;
    }
    write_checkpoint(&run_dir.join("model.ckpt"), &outcome.final_model)?;
    write_checkpoint(&run_dir.join("model_best.ckpt"), &outcome.best_model)?;
    atomic_write(&run_dir.join("trace.csv"), outcome.trace.to_csv().as_bytes())?;
    let mut secs = String::from("epoch,seconds\n");
    for (r, t) in outcome.trace.records.iter().zip(&outcome.trace.seconds) {
        let _ = writeln!(secs, "{},{t:.3}", r.epoch);
    }
    atomic_write(&run_dir.join("epoch_seconds.csv"), secs.as_bytes())?;

    let mut reports = Vec::new();
    for which in SplitName::ALL {
        let r = evaluate_split(&outcome.final_model, &split, which)?;
        write_split_report(run_dir, &r)?;
        reports.push(r);
    }
    let test = reports.iter().find(|r| r.split == SplitName::Test).expect("test split evaluated");
    let summary = summary_text(&outcome.trace, test);
    atomic_write(&run_dir.join("summary.txt"), summary.as_bytes())?;
    write_plots(run_dir, &outcome.trace, test)?;

    let manifest = format!(
        "code_version = {CODE_VERSION}\nconfig_file = config.txt\nconfig_sha256 = {}\nseed = {}\ndata_source = {source}\ndata_fingerprint = {}\nsplit_rows = {} train, {} validation, {} test\nbest_epoch = {}\nartifacts = {}\n",
        sha256_hex(config_text.as_bytes()),
        cfg.seed(),
        fingerprint(&ds.rows),
        split.train.n_rows(),
        split.validation.n_rows(),
        split.test.n_rows(),
        outcome.best_model.epoch,
        RUN_ARTIFACTS.join(" "),
    );
    atomic_write(&run_dir.join("manifest.txt"), manifest.as_bytes())?;
    audit_run(run_dir)?;
    Ok(RunOutcome {
        run_dir: run_dir.to_path_buf(),
        summary,
        trace: outcome.trace,
        reports,
    })
}

/// Checks that every run artifact exists and is non-empty.
pub fn audit_run(dir: &Path) -> Result<(), CliError> {
    let missing: Vec<&str> = RUN_ARTIFACTS
        .iter()
        .copied()
        .filter(|f| std::fs::metadata(dir.join(f)).map_or(true, |m| m.len() == 0))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "run directory {} is incomplete; missing: {}",
            dir.display(),
            missing.join(", ")
        )))
    }
}

/// Scores a checkpoint on the split(s) it was trained with, rebuilt from the
/// dataset using the split parameters stored in the checkpoint.
pub fn cmd_evaluate(
    checkpoint: &Path,
    dataset: &Path,
    splits: &[SplitName],
    out_dir: &Path,
) -> Result<Vec<SplitReport>, CliError> {
    if !checkpoint.is_file() {
        return Err(CliError::Config(format!("checkpoint {} not found", checkpoint.display())));
    }
    if !dataset.is_file() {
        return Err(CliError::Config(format!("dataset {} not found", dataset.display())));
    }
    let model = read_checkpoint(checkpoint)?;
    let ds = read_dataset(dataset, None)?;
    if ds.window_size() != model.config.window_size {
        return Err(CliError::Config(format!(
            "checkpoint expects windows of {} samples, {} holds {}",
            model.config.window_size,
            dataset.display(),
            ds.window_size()
        )));
    }
    let split = split_dataset(&ds, model.split_fractions, model.split_seed)?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let mut out = Vec::new();
    for &which in splits {
        let r = evaluate_split(&model, &split, which)?;
        write_split_report(out_dir, &r)?;
        out.push(r);
    }
    Ok(out)
}

/// Redraws the charts of a run directory from its CSV files.
pub fn cmd_plot(run_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let read = |name: &str| {
        let p = run_dir.join(name);
        std::fs::read_to_string(&p).map_err(CliError::io(&p))
    };
    let trace = EpochTrace::from_csv(&read("trace.csv")?)?;
    let (acc, loss) = learning_curves(&trace)?;
    let mut written = vec![run_dir.join("accuracy.svg"), run_dir.join("loss.svg")];
    atomic_write(&written[0], acc.as_bytes())?;
    atomic_write(&written[1], loss.as_bytes())?;
    let roc_path = run_dir.join("roc_test.csv");
    if roc_path.is_file() {
        let points = parse_roc_csv(&read("roc_test.csv")?)?;
        let svg = roc_chart(&points, roc_area(&points))?;
        let p = run_dir.join("roc.svg");
        atomic_write(&p, svg.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}
