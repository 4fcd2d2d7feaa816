//! From labelled records to balanced, windowed, split datasets.
//!
//! The pipeline runs record → [`EventSegment`]s → per-class
//! [`MergedClassStream`]s → [`WindowedDataset`] → [`DatasetSplit`].

mod container;
mod segment;
mod split;
mod synthetic;
mod window;

use thiserror::Error;

pub use container::{
    read_dataset, read_rows, read_split, write_csv, write_dataset, write_rows, write_split,
    HEADER_LEN, MAGIC,
};
pub use segment::{
    merge_class_streams, segment_events, summarize_labels, EventSegment, LabelSummary,
    MergedClassStream, MinuteCounts, RecordGroup,
};
pub use split::{split_counts, split_dataset, DatasetSplit, SplitFractions};
pub use synthetic::synthetic_dataset;
pub use window::{build_dataset, build_report, window_rows, BuildReport, WINDOW_SIZES};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("record {0:?} does not belong to a known group (a/b/c prefix)")]
    Grouping(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("class {0} has no rows")]
    EmptyClass(&'static str),
    #[error("dataset format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major matrix of fixed-width sample rows with one label byte per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    width: usize,
    values: Vec<f32>,
    labels: Vec<u8>,
}

impl RowMatrix {
    pub fn new(width: usize) -> Self {
        RowMatrix {
            width,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn with_capacity(width: usize, rows: usize) -> Self {
        RowMatrix {
            width,
            values: Vec::with_capacity(width * rows),
            labels: Vec::with_capacity(rows),
        }
    }

    pub fn from_parts(width: usize, values: Vec<f32>, labels: Vec<u8>) -> Result<Self, DatasetError> {
        if values.len() != width * labels.len() {
            return Err(DatasetError::Format(format!(
                "{} values do not form {} rows of width {width}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(DatasetError::Format(format!("label {l} is not 0 or 1")));
        }
        Ok(RowMatrix { width, values, labels })
    }

    pub fn push_row(&mut self, row: &[f32], label: u8) {
        assert_eq!(row.len(), self.width, "row width");
        assert!(label <= 1, "label must be 0 or 1");
        self.values.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact on width 0 panics; a zero-width matrix has no values anyway
        self.values
            .chunks_exact(self.width.max(1))
            .take(self.labels.len())
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Number of rows labelled 1 (apnoea).
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> RowMatrix {
        let mut out = RowMatrix::with_capacity(self.width, indices.len());
        for &i in indices {
            out.push_row(self.row(i), self.labels[i]);
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(f32) -> f32) -> RowMatrix {
        RowMatrix {
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// A balanced dataset: apnoea rows (label 1) first, then the same number of
/// non-apnoea rows (label 0).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub rows: RowMatrix,
}

impl WindowedDataset {
    pub fn window_size(&self) -> usize {
        self.rows.width()
    }

    pub fn n_apnoea_rows(&self) -> usize {
        self.rows.n_positive()
    }

    pub fn n_non_apnoea_rows(&self) -> usize {
        self.rows.n_rows() - self.rows.n_positive()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.n_rows()
    }
}

/// Global z-score statistics over every value of a row set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { mean: 0.0, std: 1.0 };

    /// Mean and population standard deviation of all values. Falls back to
    /// unit scale when the values are constant.
    pub fn from_rows(rows: &RowMatrix) -> NormStats {
        let n = rows.values().len();
        if n == 0 {
            return NormStats::IDENTITY;
        }
        let mean = rows.values().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = rows
            .values()
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        NormStats {
            mean,
            std: if std > 0.0 && std.is_finite() { std } else { 1.0 },
        }
    }

    pub fn apply(&self, v: f32) -> f32 {
        ((v as f64 - self.mean) / self.std) as f32
    }

    pub fn normalize(&self, rows: &RowMatrix) -> RowMatrix {
        rows.map_values(|v| self.apply(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_matrix_basics() {
        let mut m = RowMatrix::new(2);
        m.push_row(&[1.0, 2.0], 1);
        m.push_row(&[3.0, 4.0], 0);
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.rows().count(), 2);
        assert_eq!(m.select(&[1, 0]).labels(), &[0, 1]);
        assert!(RowMatrix::from_parts(2, vec![0.0; 3], vec![0]).is_err());
        assert!(RowMatrix::from_parts(1, vec![0.0], vec![2]).is_err());
    }

    #[test]
    fn norm_stats() {
        let m = RowMatrix::from_parts(2, vec![1.0, 3.0, 1.0, 3.0], vec![0, 1]).unwrap();
        let s = NormStats::from_rows(&m);
        assert_eq!(s, NormStats { mean: 2.0, std: 1.0 });
        assert_eq!(s.normalize(&m).values(), &[-1.0, 1.0, -1.0, 1.0]);
        let flat = RowMatrix::from_parts(1, vec![5.0, 5.0], vec![0, 1]).unwrap();
        assert_eq!(NormStats::from_rows(&flat).std, 1.0);
    }
}
