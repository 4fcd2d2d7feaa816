use std::fmt;

use super::{DatasetError, MergedClassStream, NormStats, RowMatrix, WindowedDataset};

/// The five window widths, in samples.
pub const WINDOW_SIZES: [usize; 5] = [500, 1000, 1500, 2000, 2500];

/// Total row counts reported for the reference datasets at each window
/// width. Kept only for comparison in build reports.
const REFERENCE_ROWS: [(usize, usize); 5] = [
    (500, 150_384),
    (1000, 75_190),
    (1500, 50_126),
    (2000, 37_592),
    (2500, 30_060),
];

/// Non-overlapping `w`-sample rows of `stream`; a trailing remainder shorter
/// than `w` is dropped.
pub fn window_rows(stream: &[f32], w: usize) -> Result<std::slice::ChunksExact<'_, f32>, DatasetError> {
    if w == 0 {
        return Err(DatasetError::Config("window size must be positive".into()));
    }
    Ok(stream.chunks_exact(w))
}

fn class_rows(stream: &MergedClassStream, w: usize) -> Result<usize, DatasetError> {
    let mut total = 0;
    for (_, s) in &stream.per_record_streams {
        total += window_rows(s, w)?.len();
    }
    Ok(total)
}

/// Builds the balanced dataset for window width `w`.
///
/// Each record's class stream is cut into rows independently; rows are
/// stacked in record order; the larger class is truncated from its end to
/// the size of the smaller one. Apnoea rows come first.
pub fn build_dataset(
    apnoea: &MergedClassStream,
    non_apnoea: &MergedClassStream,
    w: usize,
    normalization: Option<&NormStats>,
) -> Result<WindowedDataset, DatasetError> {
    let n_a = class_rows(apnoea, w)?;
    let n_n = class_rows(non_apnoea, w)?;
    if n_a == 0 {
        return Err(DatasetError::EmptyClass("apnoea"));
    }
    if n_n == 0 {
        return Err(DatasetError::EmptyClass("non-apnoea"));
    }
    let per_class = n_a.min(n_n);
    let mut rows = RowMatrix::with_capacity(w, 2 * per_class);
    let mut scratch = vec![0f32; w];
    for (stream, label) in [(apnoea, 1u8), (non_apnoea, 0u8)] {
        let mut taken = 0;
        'records: for (_, s) in &stream.per_record_streams {
            for chunk in window_rows(s, w)? {
                if taken == per_class {
                    break 'records;
                }
                match normalization {
                    Some(stats) => {
                        for (d, &v) in scratch.iter_mut().zip(chunk) {
                            *d = stats.apply(v);
                        }
                        rows.push_row(&scratch, label);
                    }
                    None => rows.push_row(chunk, label),
                }
                taken += 1;
            }
        }
    }
    Ok(WindowedDataset { rows })
}

/// Row accounting for one window width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub window_size: usize,
    pub apnoea_rows_available: usize,
    pub non_apnoea_rows_available: usize,
    pub rows_per_class: usize,
    /// Samples lost to per-record remainders shorter than the window.
    pub apnoea_samples_discarded: usize,
    pub non_apnoea_samples_discarded: usize,
    /// Rows dropped from the end of the larger class.
    pub truncated_rows: usize,
    pub truncated_class: Option<&'static str>,
    pub reference_total_rows: Option<usize>,
}

impl BuildReport {
    pub fn total_rows(&self) -> usize {
        2 * self.rows_per_class
    }

    /// Relative difference of our total row count from the reference count.
    pub fn reference_delta(&self) -> Option<f64> {
        self.reference_total_rows
            .map(|r| (self.total_rows() as f64 - r as f64) / r as f64)
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "window_size = {}", self.window_size)?;
        writeln!(f, "apnoea_rows_available = {}", self.apnoea_rows_available)?;
        writeln!(f, "non_apnoea_rows_available = {}", self.non_apnoea_rows_available)?;
        writeln!(f, "rows_per_class = {}", self.rows_per_class)?;
        writeln!(f, "total_rows = {}", self.total_rows())?;
        writeln!(f, "apnoea_samples_discarded = {}", self.apnoea_samples_discarded)?;
        writeln!(f, "non_apnoea_samples_discarded = {}", self.non_apnoea_samples_discarded)?;
        writeln!(f, "truncated_rows = {}", self.truncated_rows)?;
        writeln!(f, "truncated_class = {}", self.truncated_class.unwrap_or("none"))?;
        match (self.reference_total_rows, self.reference_delta()) {
            (Some(r), Some(d)) => {
                writeln!(f, "reference_total_rows = {r}")?;
                writeln!(f, "reference_delta = {:+.2}%", d * 100.0)
            }
            _ => writeln!(f, "reference_total_rows = none"),
        }
    }
}

pub fn build_report(
    apnoea: &MergedClassStream,
    non_apnoea: &MergedClassStream,
    w: usize,
) -> Result<BuildReport, DatasetError> {
    let n_a = class_rows(apnoea, w)?;
    let n_n = class_rows(non_apnoea, w)?;
    let per_class = n_a.min(n_n);
    let truncated_class = match n_a.cmp(&n_n) {
        std::cmp::Ordering::Greater => Some("apnoea"),
        std::cmp::Ordering::Less => Some("non-apnoea"),
        std::cmp::Ordering::Equal => None,
    };
    Ok(BuildReport {
        window_size: w,
        apnoea_rows_available: n_a,
        non_apnoea_rows_available: n_n,
        rows_per_class: per_class,
        apnoea_samples_discarded: apnoea.total_samples() - n_a * w,
        non_apnoea_samples_discarded: non_apnoea.total_samples() - n_n * w,
        truncated_rows: n_a.max(n_n) - per_class,
        truncated_class,
        reference_total_rows: REFERENCE_ROWS.iter().find(|(rw, _)| *rw == w).map(|&(_, r)| r),
    })
}
