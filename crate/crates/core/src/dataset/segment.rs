use std::collections::BTreeMap;

use super::DatasetError;
use crate::wfdb::{MinuteLabel, MinuteLabelSequence, SignalTrace, SAMPLES_PER_MINUTE};

/// A maximal run of same-label minutes from one record.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSegment {
    pub record_name: String,
    pub label: MinuteLabel,
    pub start_minute: usize,
    pub length_minutes: usize,
    /// Amplitudes in millivolts, `6000 * length_minutes` long.
    pub samples: Vec<f32>,
}

/// Splits a record into alternating runs of apnoea / non-apnoea minutes.
pub fn segment_events(
    labels: &MinuteLabelSequence,
    trace: &SignalTrace,
) -> Result<Vec<EventSegment>, DatasetError> {
    let needed = labels.len() * SAMPLES_PER_MINUTE;
    if trace.samples.len() < needed {
        return Err(DatasetError::Alignment(format!(
            "{}: {} labelled minutes need {needed} samples, trace has {}",
            labels.record_name,
            labels.len(),
            trace.samples.len()
        )));
    }
    let header = &trace.header;
    let mut segments = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let label = labels.labels[start];
        let len = labels.labels[start..]
            .iter()
            .take_while(|&&l| l == label)
            .count();
        let raw = &trace.samples[start * SAMPLES_PER_MINUTE..(start + len) * SAMPLES_PER_MINUTE];
        segments.push(EventSegment {
            record_name: labels.record_name.clone(),
            label,
            start_minute: start,
            length_minutes: len,
            samples: raw
                .iter()
                .map(|&s| header.to_millivolts(s as i32) as f32)
                .collect(),
        });
        start += len;
    }
    Ok(segments)
}

/// Record groups of the annotated Apnea-ECG set, keyed by name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordGroup {
    /// `a01`-`a20`
    Apnoea,
    /// `b01`-`b05`
    Borderline,
    /// `c01`-`c10`
    Normal,
}

impl RecordGroup {
    pub fn of(record_name: &str) -> Result<Self, DatasetError> {
        match record_name.chars().next().map(|c| c.to_ascii_lowercase()) {
            Some('a') => Ok(RecordGroup::Apnoea),
            Some('b') => Ok(RecordGroup::Borderline),
            Some('c') => Ok(RecordGroup::Normal),
            _ => Err(DatasetError::Grouping(record_name.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordGroup::Apnoea => "Apnoea-Set",
            RecordGroup::Borderline => "Borderline-Set",
            RecordGroup::Normal => "Normal-Set",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MinuteCounts {
    pub records: usize,
    pub apnoea: usize,
    pub non_apnoea: usize,
}

impl MinuteCounts {
    pub fn total(&self) -> usize {
        self.apnoea + self.non_apnoea
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSummary {
    pub groups: BTreeMap<RecordGroup, MinuteCounts>,
    pub total: MinuteCounts,
}

impl LabelSummary {
    pub fn group(&self, g: RecordGroup) -> MinuteCounts {
        self.groups.get(&g).copied().unwrap_or_default()
    }
}

pub fn summarize_labels(all: &[MinuteLabelSequence]) -> Result<LabelSummary, DatasetError> {
    let mut summary = LabelSummary::default();
    for seq in all {
        let group = RecordGroup::of(&seq.record_name)?;
        let (a, n) = seq.counts();
        for c in [summary.groups.entry(group).or_default(), &mut summary.total] {
            c.records += 1;
            c.apnoea += a;
            c.non_apnoea += n;
        }
    }
    Ok(summary)
}

/// All samples of one class, concatenated per record.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedClassStream {
    pub label: MinuteLabel,
    pub per_record_streams: Vec<(String, Vec<f32>)>,
}

impl MergedClassStream {
    pub fn total_samples(&self) -> usize {
        self.per_record_streams.iter().map(|(_, s)| s.len()).sum()
    }
}

fn record_key(name: &str) -> (Option<RecordGroup>, String) {
    (RecordGroup::of(name).ok(), name.to_string())
}

/// Concatenates same-label segments per record, in temporal order. Records
/// are ordered by group then name; a record with no minutes of a class
/// contributes an empty stream to that class.
pub fn merge_class_streams(
    segments: Vec<EventSegment>,
) -> Result<(MergedClassStream, MergedClassStream), DatasetError> {
    let mut by_record: BTreeMap<(Option<RecordGroup>, String), Vec<EventSegment>> = BTreeMap::new();
    for seg in segments {
        if seg.samples.len() != seg.length_minutes * SAMPLES_PER_MINUTE || seg.length_minutes == 0 {
            return Err(DatasetError::Alignment(format!(
                "{}: segment at minute {} has {} samples for {} minute(s)",
                seg.record_name,
                seg.start_minute,
                seg.samples.len(),
                seg.length_minutes
            )));
        }
        by_record.entry(record_key(&seg.record_name)).or_default().push(seg);
    }
    let mut apnoea = MergedClassStream {
        label: MinuteLabel::A,
        per_record_streams: Vec::with_capacity(by_record.len()),
    };
    let mut normal = MergedClassStream {
        label: MinuteLabel::N,
        per_record_streams: Vec::with_capacity(by_record.len()),
    };
    for ((_, name), mut segs) in by_record {
        segs.sort_by_key(|s| s.start_minute);
        let mut a = Vec::new();
        let mut n = Vec::new();
        for s in segs {
            match s.label {
                MinuteLabel::A => a.extend(s.samples),
                MinuteLabel::N => n.extend(s.samples),
            }
        }
        apnoea.per_record_streams.push((name.clone(), a));
        normal.per_record_streams.push((name, n));
    }
    Ok((apnoea, normal))
}
