//! Reading Apnea-ECG records: `.hea` headers, signal files and per-minute
//! `.apn` annotations.

mod annotation;
mod header;
mod signal;

use std::path::Path;

use thiserror::Error;

pub use annotation::{
    annotations_to_minute_labels, encode_annotations, parse_annotations,
    parse_annotations_bounded, AnnotationEvent, MinuteLabel, MinuteLabelSequence,
    SAMPLES_PER_MINUTE,
};
pub use header::{
    format_header, parse_header, RecordHeader, DEFAULT_ADC_RESOLUTION, DEFAULT_GAIN,
    DEFAULT_SAMPLING_FREQUENCY,
};
pub use signal::{
    checksum16, decode_format16, decode_format212, encode_format212, format212_len, SignalTrace,
    SAMPLE_MAX, SAMPLE_MIN,
};

#[derive(Debug, Error)]
pub enum WfdbError {
    #[error("parse error (line {line}): {reason}")]
    Parse { line: usize, reason: String },
    #[error("truncated data: expected {expected}, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("sample {index} out of 12-bit range: {value}")]
    Range { index: usize, value: i32 },
    #[error("checksum mismatch for {record}: header {expected}, data {got}")]
    Checksum { record: String, expected: i16, got: i16 },
    #[error("{record}: annotation at sample {sample_index} is not on a minute boundary")]
    Alignment { record: String, sample_index: u64 },
    #[error("unexpected annotation code {code} at sample {sample}; only A and N are accepted")]
    UnexpectedCode { code: u16, sample: u64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{record}: cannot read {file}: {source}")]
    Io {
        record: String,
        file: String,
        #[source]
        source: std::io::Error,
    },
}

/// One annotated record: header, decoded signal and minute labels.
#[derive(Debug, Clone)]
pub struct Record {
    pub trace: SignalTrace,
    pub labels: MinuteLabelSequence,
}

impl Record {
    pub fn name(&self) -> &str {
        &self.trace.header.record_name
    }

    pub fn header(&self) -> &RecordHeader {
        &self.trace.header
    }
}

fn read(dir: &Path, record: &str, file: &str) -> Result<Vec<u8>, WfdbError> {
    std::fs::read(dir.join(file)).map_err(|source| WfdbError::Io {
        record: record.to_string(),
        file: file.to_string(),
        source,
    })
}

/// Loads `<name>.hea`, its signal file and `<name>.apn` from `dir`.
pub fn load_record(dir: &Path, name: &str) -> Result<Record, WfdbError> {
    let hea_name = format!("{name}.hea");
    let header = parse_header(&read(dir, name, &hea_name)?)?;
    if header.record_name != name {
        log::warn!("{hea_name} names record {:?}", header.record_name);
    }
    let dat = read(dir, name, &header.file_name.clone())?;
    let trace = SignalTrace::decode(header, &dat)?;
    let apn = read(dir, name, &format!("{name}.apn"))?;
    let events = parse_annotations_bounded(&apn, Some(trace.header.n_samples as u64))?;
    let labels = annotations_to_minute_labels(&events, &trace.header)?;
    Ok(Record { trace, labels })
}

/// Writes a single-signal format-212 record with its annotations; the
/// inverse of [`load_record`]. The header checksum is filled in from the
/// samples.
pub fn write_record(
    dir: &Path,
    name: &str,
    samples: &[i16],
    labels: &[MinuteLabel],
) -> Result<(), WfdbError> {
    let io = |file: String| {
        let record = name.to_string();
        move |source| WfdbError::Io { record, file, source }
    };
    let hea = format!(
        "{name} 1 100 {}\n{name}.dat 212 200 12 0 {} {} 0 ECG\n",
        samples.len(),
        samples.first().copied().unwrap_or(0),
        checksum16(samples)
    );
    std::fs::write(dir.join(format!("{name}.hea")), hea).map_err(io(format!("{name}.hea")))?;
    std::fs::write(dir.join(format!("{name}.dat")), encode_format212(samples)?)
        .map_err(io(format!("{name}.dat")))?;
    let events: Vec<AnnotationEvent> = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| AnnotationEvent {
            sample_index: (i * SAMPLES_PER_MINUTE) as u64,
            label,
        })
        .collect();
    std::fs::write(dir.join(format!("{name}.apn")), encode_annotations(&events)?)
        .map_err(io(format!("{name}.apn")))?;
    Ok(())
}
