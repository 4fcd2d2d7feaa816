//! Record ingestion and dataset building.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use apnea_core::dataset::{
    build_dataset, build_report, merge_class_streams, segment_events, summarize_labels, write_dataset,
    BuildReport, EventSegment, LabelSummary, MergedClassStream, RecordGroup,
};
use apnea_core::wfdb::{load_record, MinuteLabelSequence, WfdbError};
use rayon::prelude::*;

use crate::error::{CliError, IngestFailure};
use crate::{atomic_write, ExperimentConfig};

/// The 35 released records that carry apnoea annotations.
pub fn default_records() -> Vec<String> {
    let mut names = Vec::with_capacity(35);
    names.extend((1..=20).map(|i| format!("a{i:02}")));
    names.extend((1..=5).map(|i| format!("b{i:02}")));
    names.extend((1..=10).map(|i| format!("c{i:02}")));
    names
}

/// One record name per line; blank lines and `#` comments are ignored.
pub fn read_manifest(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read records manifest {}: {e}", path.display())))?;
    let names: Vec<String> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(CliError::Config(format!("records manifest {} lists no records", path.display())));
    }
    Ok(names)
}

pub fn record_names(cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    match &cfg.records_manifest {
        Some(p) => read_manifest(p),
        None => Ok(default_records()),
    }
}

/// Labels and event segments of every record.
pub struct Ingested {
    pub labels: Vec<MinuteLabelSequence>,
    pub segments: Vec<EventSegment>,
    pub summary: LabelSummary,
}

fn failure(name: &str, e: WfdbError) -> IngestFailure {
    let reason = match e {
        WfdbError::Io { file, .. } => format!("{file} is missing or unreadable"),
        other => other.to_string(),
    };
    IngestFailure {
        record: name.to_string(),
        reason,
    }
}

/// Loads and segments every record in parallel. Signal samples are only
/// kept as segments, so peak memory stays near one copy of the data.
/// Every failing record is reported, not just the first.
pub fn ingest(data_dir: &Path, names: &[String]) -> Result<Ingested, CliError> {
    if names.is_empty() {
        return Err(CliError::Config("no records to ingest".into()));
    }
    for n in names {
        RecordGroup::of(n)?;
    }
    let results: Vec<Result<(MinuteLabelSequence, Vec<EventSegment>), IngestFailure>> = names
        .par_iter()
        .map(|name| {
            let rec = load_record(data_dir, name).map_err(|e| failure(name, e))?;
            let segments = segment_events(&rec.labels, &rec.trace).map_err(|e| IngestFailure {
                record: name.clone(),
                reason: e.to_string(),
            })?;
            Ok((rec.labels, segments))
        })
        .collect();
    let mut labels = Vec::new();
    let mut segments = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((l, s)) => {
                labels.push(l);
                segments.extend(s);
            }
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Ingest(failures));
    }
    let summary = summarize_labels(&labels)?;
    Ok(Ingested {
        labels,
        segments,
        summary,
    })
}

pub fn format_ingest_summary(ing: &Ingested) -> String {
    let mut s = String::from("record  apnoea_minutes  non_apnoea_minutes\n");
    for l in &ing.labels {
        let (a, n) = l.counts();
        let _ = writeln!(s, "{:<6}  {a:>14}  {n:>18}", l.record_name);
    }
    let _ = writeln!(s, "\ngroup           records  apnoea  non_apnoea  total");
    for (g, c) in &ing.summary.groups {
        let _ = writeln!(
            s,
            "{:<14}  {:>7}  {:>6}  {:>10}  {:>5}",
            g.name(),
            c.records,
            c.apnoea,
            c.non_apnoea,
            c.apnoea + c.non_apnoea
        );
    }
    let t = ing.summary.total;
    let _ = writeln!(
        s,
        "{:<14}  {:>7}  {:>6}  {:>10}  {:>5}",
        "Total",
        t.records,
        t.apnoea,
        t.non_apnoea,
        t.apnoea + t.non_apnoea
    );
    let (n_a, n_n) = ing.segments.iter().fold((0, 0), |(a, n), seg| {
        if seg.label.bit() == 1 {
            (a + 1, n)
        } else {
            (a, n + 1)
        }
    });
    let _ = writeln!(s, "\nsegments: apnoea {n_a}, non_apnoea {n_n}");
    s
}

pub struct BuiltDataset {
    pub path: PathBuf,
    pub report: BuildReport,
}

/// Writes one container and one build report per window size.
pub fn build_all(
    streams: &(MergedClassStream, MergedClassStream),
    windows: &[usize],
    out_dir: &Path,
) -> Result<Vec<BuiltDataset>, CliError> {
    if let Some(w) = windows.iter().find(|&&w| w == 0) {
        return Err(CliError::Config(format!("window size {w} must be positive")));
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let (apnoea, non_apnoea) = streams;
    let mut built = Vec::new();
    for &w in windows {
        let ds = build_dataset(apnoea, non_apnoea, w, None)?;
        let report = build_report(apnoea, non_apnoea, w)?;
        let path = out_dir.join(format!("w{w}.osaw"));
        write_dataset(&path, &ds)?;
        atomic_write(&out_dir.join(format!("w{w}.report.txt")), report.to_string().as_bytes())?;
        log::info!("wrote {} ({} rows)", path.display(), ds.n_rows());
        built.push(BuiltDataset { path, report });
    }
    Ok(built)
}

/// Ingests the configured records and builds the requested windows.
pub fn cmd_build(cfg: &ExperimentConfig, windows: &[usize], out_dir: &Path) -> Result<Vec<BuiltDataset>, CliError> {
    if let Some(w) = windows.iter().find(|&&w| w == 0) {
        return Err(CliError::Config(format!("window size {w} must be positive")));
    }
    let data_dir = cfg.resolve_data_directory()?;
    let ing = ingest(&data_dir, &record_names(cfg)?)?;
    let streams = merge_class_streams(ing.segments)?;
    build_all(&streams, windows, out_dir)
}
