//! MIT-format binary annotation files (`.apn`).
//!
//! Each 16-bit little-endian word holds a 6-bit annotation code in its top
//! bits and a 10-bit sample-time delta in the rest. Pseudo-codes extend the
//! stream:
//!
//! * `SKIP` (59): the next two words hold a 32-bit delta, high word first.
//! * `NUM`/`SUB`/`CHN` (60-62): metadata carried in the delta field.
//! * `AUX` (63): the delta field is a byte count; the payload follows,
//!   padded to an even length.
//! * code 0 with delta 0 ends the stream.

use super::{RecordHeader, WfdbError};

pub const SAMPLES_PER_MINUTE: usize = 6000;

const CODE_NORMAL: u16 = 1;
const CODE_APNOEA: u16 = 8;
const CODE_SKIP: u16 = 59;
const CODE_NUM: u16 = 60;
const CODE_SUB: u16 = 61;
const CODE_CHN: u16 = 62;
const CODE_AUX: u16 = 63;

/// Per-minute apnoea annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MinuteLabel {
    /// Apnoea not in progress at the start of the minute.
    N,
    /// Apnoea in progress at the start of the minute.
    A,
}

impl MinuteLabel {
    /// Dataset label bit: apnoea = 1.
    pub fn bit(self) -> u8 {
        match self {
            MinuteLabel::A => 1,
            MinuteLabel::N => 0,
        }
    }

    pub fn mnemonic(self) -> char {
        match self {
            MinuteLabel::A => 'A',
            MinuteLabel::N => 'N',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationEvent {
    pub sample_index: u64,
    pub label: MinuteLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinuteLabelSequence {
    pub record_name: String,
    pub labels: Vec<MinuteLabel>,
}

impl MinuteLabelSequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (apnoea minutes, non-apnoea minutes)
    pub fn counts(&self) -> (usize, usize) {
        let a = self.labels.iter().filter(|&&l| l == MinuteLabel::A).count();
        (a, self.labels.len() - a)
    }
}

fn unterminated() -> WfdbError {
    WfdbError::Parse {
        line: 0,
        reason: "unterminated stream".into(),
    }
}

/// Decodes an annotation stream into absolute-time A/N events.
///
/// Any label code other than `N` or `A` is an error.
pub fn parse_annotations(raw: &[u8]) -> Result<Vec<AnnotationEvent>, WfdbError> {
    parse_annotations_bounded(raw, None)
}

/// As [`parse_annotations`], rejecting events at or beyond `limit` samples.
pub fn parse_annotations_bounded(
    raw: &[u8],
    limit: Option<u64>,
) -> Result<Vec<AnnotationEvent>, WfdbError> {
    let mut words = raw
        .chunks(2)
        .map(|c| if c.len() == 2 { Some(u16::from_le_bytes([c[0], c[1]])) } else { None });
    let mut next = || -> Result<u16, WfdbError> {
        match words.next() {
            Some(Some(w)) => Ok(w),
            _ => Err(unterminated()),
        }
    };

    let mut time: u64 = 0;
    let mut events: Vec<AnnotationEvent> = Vec::new();
    loop {
        let word = next()?;
        let code = word >> 10;
        let delta = (word & 0x03FF) as u64;
        match code {
            0 if delta == 0 => break,
            0 => {
                return Err(WfdbError::Parse {
                    line: 0,
                    reason: format!("annotation code 0 with nonzero delta {delta}"),
                })
            }
            CODE_SKIP => {
                let hi = next()? as u32;
                let lo = next()? as u32;
                let skip = ((hi << 16) | lo) as i32;
                time = time
                    .checked_add_signed(skip as i64)
                    .ok_or_else(|| WfdbError::Parse {
                        line: 0,
                        reason: format!("SKIP of {skip} moves before the start of the record"),
                    })?;
            }
            CODE_NUM | CODE_SUB | CODE_CHN => {}
            CODE_AUX => {
                for _ in 0..delta.div_ceil(2) {
                    next()?;
                }
            }
            CODE_NORMAL | CODE_APNOEA => {
                time = time.checked_add(delta).ok_or_else(|| WfdbError::Parse {
                    line: 0,
                    reason: "annotation time overflow".into(),
                })?;
                if let Some(limit) = limit {
                    if time >= limit {
                        return Err(WfdbError::Parse {
                            line: 0,
                            reason: format!(
                                "annotation at sample {time} lies beyond the record length {limit}"
                            ),
                        });
                    }
                }
                if let Some(prev) = events.last() {
                    if time <= prev.sample_index {
                        return Err(WfdbError::Parse {
                            line: 0,
                            reason: format!(
                                "annotation times not strictly increasing ({} then {time})",
                                prev.sample_index
                            ),
                        });
                    }
                }
                let label = if code == CODE_APNOEA {
                    MinuteLabel::A
                } else {
                    MinuteLabel::N
                };
                events.push(AnnotationEvent {
                    sample_index: time,
                    label,
                });
            }
            other => return Err(WfdbError::UnexpectedCode { code: other, sample: time + delta }),
        }
    }
    Ok(events)
}

/// Encodes A/N events as an MIT annotation stream. Deltas above 1023 are
/// carried by a `SKIP` word. Used to build fixtures.
pub fn encode_annotations(events: &[AnnotationEvent]) -> Result<Vec<u8>, WfdbError> {
    let mut out = Vec::new();
    let mut push = |w: u16| out.extend_from_slice(&w.to_le_bytes());
    let mut time = 0u64;
    for (i, e) in events.iter().enumerate() {
        if i > 0 && e.sample_index <= time {
            return Err(WfdbError::Parse {
                line: 0,
                reason: "events must be strictly increasing".into(),
            });
        }
        let mut delta = e.sample_index - time;
        if delta > 0x03FF {
            let skip = u32::try_from(delta).map_err(|_| WfdbError::Parse {
                line: 0,
                reason: "delta exceeds 32 bits".into(),
            })?;
            push(CODE_SKIP << 10);
            push((skip >> 16) as u16);
            push((skip & 0xFFFF) as u16);
            delta = 0;
        }
        let code = match e.label {
            MinuteLabel::A => CODE_APNOEA,
            MinuteLabel::N => CODE_NORMAL,
        };
        push((code << 10) | delta as u16);
        time = e.sample_index;
    }
    push(0);
    Ok(out)
}

/// Maps minute-aligned events onto a per-minute label track.
///
/// The event for minute `i` must sit at sample `6000 * i`; a missing minute
/// is an error. Events whose minute is not fully contained in the signal are
/// dropped (logged), so the result never exceeds `floor(n_samples / 6000)`.
pub fn annotations_to_minute_labels(
    events: &[AnnotationEvent],
    header: &RecordHeader,
) -> Result<MinuteLabelSequence, WfdbError> {
    let spm = SAMPLES_PER_MINUTE as u64;
    let complete = header.complete_minutes(SAMPLES_PER_MINUTE) as u64;
    let mut labels = Vec::with_capacity(events.len());
    for e in events {
        if e.sample_index % spm != 0 {
            return Err(WfdbError::Alignment {
                record: header.record_name.clone(),
                sample_index: e.sample_index,
            });
        }
        let minute = e.sample_index / spm;
        let expected = labels.len() as u64;
        if minute < expected {
            return Err(WfdbError::Parse {
                line: 0,
                reason: format!("{}: duplicate annotation for minute {minute}", header.record_name),
            });
        }
        if minute > expected {
            return Err(WfdbError::Parse {
                line: 0,
                reason: format!(
                    "{}: no annotation for minute {expected} (next is minute {minute})",
                    header.record_name
                ),
            });
        }
        if minute >= complete {
            log::warn!(
                "{}: dropping annotation for partial minute {minute} ({} samples in record)",
                header.record_name,
                header.n_samples
            );
            continue;
        }
        labels.push(e.label);
    }
    Ok(MinuteLabelSequence {
        record_name: header.record_name.clone(),
        labels,
    })
}
