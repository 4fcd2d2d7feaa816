//! Signal file codecs.
//!
//! Format 212 packs two 12-bit two's-complement samples into three bytes:
//!
//! ```text
//! byte 0: low 8 bits of sample 0
//! byte 1: high nibble = high 4 bits of sample 1, low nibble = high 4 bits of sample 0
//! byte 2: low 8 bits of sample 1
//! ```
//!
//! Format 16 (little-endian 16-bit words) is accepted on the read path only.

use super::{RecordHeader, WfdbError};

pub const SAMPLE_MIN: i32 = -2048;
pub const SAMPLE_MAX: i32 = 2047;

#[inline]
fn sign_extend12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Number of bytes occupied by `n_samples` format-212 samples.
pub fn format212_len(n_samples: usize) -> usize {
    (n_samples * 3).div_ceil(2)
}

pub fn decode_format212(raw: &[u8], n_samples: usize) -> Result<Vec<i16>, WfdbError> {
    let needed = format212_len(n_samples);
    if raw.len() < needed {
        return Err(WfdbError::TruncatedData {
            expected: needed,
            got: raw.len(),
        });
    }
    let mut out = Vec::with_capacity(n_samples);
    for frame in raw[..needed].chunks(3) {
        let b0 = frame[0] as u16;
        let b1 = frame[1] as u16;
        out.push(sign_extend12(((b1 & 0x0F) << 8) | b0));
        if out.len() == n_samples {
            break;
        }
        let b2 = frame[2] as u16;
        out.push(sign_extend12(((b1 & 0xF0) << 4) | b2));
    }
    Ok(out)
}

/// Inverse of [`decode_format212`]. An odd trailing sample is written as two
/// bytes with a zero pad nibble.
pub fn encode_format212(samples: &[i16]) -> Result<Vec<u8>, WfdbError> {
    let mut out = Vec::with_capacity(format212_len(samples.len()));
    for (pair_idx, pair) in samples.chunks(2).enumerate() {
        for (k, &s) in pair.iter().enumerate() {
            if !(SAMPLE_MIN..=SAMPLE_MAX).contains(&(s as i32)) {
                return Err(WfdbError::Range {
                    index: pair_idx * 2 + k,
                    value: s as i32,
                });
            }
        }
        let s0 = (pair[0] as u16) & 0x0FFF;
        match pair.get(1) {
            Some(&s1) => {
                let s1 = (s1 as u16) & 0x0FFF;
                out.push((s0 & 0xFF) as u8);
                out.push((((s1 >> 8) << 4) | (s0 >> 8)) as u8);
                out.push((s1 & 0xFF) as u8);
            }
            None => {
                out.push((s0 & 0xFF) as u8);
                out.push((s0 >> 8) as u8);
            }
        }
    }
    Ok(out)
}

pub fn decode_format16(raw: &[u8], n_samples: usize) -> Result<Vec<i16>, WfdbError> {
    let needed = n_samples * 2;
    if raw.len() < needed {
        return Err(WfdbError::TruncatedData {
            expected: needed,
            got: raw.len(),
        });
    }
    Ok(raw[..needed]
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect())
}

/// Signed 16-bit wrapping sum used by WFDB header checksums.
pub fn checksum16(samples: &[i16]) -> i16 {
    samples.iter().fold(0i16, |acc, &s| acc.wrapping_add(s))
}

/// Raw samples of one single-signal record.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub header: RecordHeader,
    pub samples: Vec<i16>,
}

impl SignalTrace {
    /// Decodes the `.dat` payload described by `header` and checks length,
    /// amplitude range and checksum.
    pub fn decode(header: RecordHeader, raw: &[u8]) -> Result<Self, WfdbError> {
        let samples = match header.format_code {
            212 => decode_format212(raw, header.n_samples)?,
            16 => decode_format16(raw, header.n_samples)?,
            other => {
                return Err(WfdbError::Unsupported(format!(
                    "signal format {other} (record {})",
                    header.record_name
                )))
            }
        };
        let trace = SignalTrace { header, samples };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), WfdbError> {
        let h = &self.header;
        if self.samples.len() != h.n_samples {
            return Err(WfdbError::TruncatedData {
                expected: h.n_samples,
                got: self.samples.len(),
            });
        }
        let bits = h.adc_resolution.clamp(1, 16);
        let lo = -(1i32 << (bits - 1));
        let hi = (1i32 << (bits - 1)) - 1;
        if let Some((i, &s)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, &s)| !(lo..=hi).contains(&(s as i32)))
        {
            return Err(WfdbError::Range {
                index: i,
                value: s as i32,
            });
        }
        if let Some(expected) = h.checksum {
            let got = checksum16(&self.samples);
            if got != expected {
                return Err(WfdbError::Checksum {
                    record: h.record_name.clone(),
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    pub fn millivolts(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&s| self.header.to_millivolts(s as i32))
    }
}
