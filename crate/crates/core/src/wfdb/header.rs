//! WFDB `.hea` header parsing.
//!
//! Only the subset of the header grammar used by single-signal PhysioNet
//! records is accepted: one record line followed by one line per signal.
//! Comment lines (`#`) and blank lines are ignored.

use super::WfdbError;

/// WFDB default gain when a signal line omits it or gives 0.
pub const DEFAULT_GAIN: f64 = 200.0;
/// WFDB default sampling frequency when the record line omits it.
pub const DEFAULT_SAMPLING_FREQUENCY: f64 = 250.0;
/// Default ADC resolution for format 212.
pub const DEFAULT_ADC_RESOLUTION: u32 = 12;

/// Parsed header metadata for a single-signal record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    /// Samples per second per signal.
    pub sampling_frequency: f64,
    pub n_samples: usize,
    pub file_name: String,
    pub format_code: u32,
    /// ADC units per physical unit (mV).
    pub gain: f64,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: i32,
    /// Signed 16-bit sum of all samples, when the header supplies one.
    pub checksum: Option<i16>,
    pub block_size: u32,
    pub signal_description: String,
}

impl RecordHeader {
    /// Converts a raw ADC value to millivolts.
    pub fn to_millivolts(&self, adu: i32) -> f64 {
        (adu - self.adc_zero) as f64 / self.gain
    }

    /// Number of complete 60 s minutes contained in the signal.
    pub fn complete_minutes(&self, samples_per_minute: usize) -> usize {
        self.n_samples / samples_per_minute
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn perr(line: usize, reason: impl Into<String>) -> WfdbError {
    WfdbError::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T, WfdbError> {
    tok.parse::<T>()
        .map_err(|_| perr(line, format!("non-numeric {what}: {tok:?}")))
}

/// Parses a WFDB header.
///
/// Record line: `name[/segments] n_signals [fs[/counter[(base)]] [n_samples ...]]`.
/// Signal line: `file format[x..][:..][+..] gain[(baseline)][/units] adc_res adc_zero init checksum block_size description`.
pub fn parse_header(raw: &[u8]) -> Result<RecordHeader, WfdbError> {
    let text = std::str::from_utf8(raw).map_err(|_| perr(0, "header is not valid UTF-8"))?;
    let mut lines = data_lines(text);

    let (rec_line, rec) = lines.next().ok_or_else(|| perr(0, "missing record line"))?;
    let fields: Vec<&str> = rec.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(perr(rec_line, "record line needs at least name and signal count"));
    }
    let record_name = fields[0].split('/').next().unwrap_or_default().to_string();
    if fields[0].contains('/') {
        return Err(perr(rec_line, "multi-segment records are not supported"));
    }
    let n_signals: usize = parse_num(rec_line, "signal count", fields[1])?;
    if n_signals == 0 {
        return Err(perr(rec_line, "record declares zero signals"));
    }
    let sampling_frequency = match fields.get(2) {
        Some(tok) => {
            let fs_tok = tok.split(['/', '(']).next().unwrap_or(tok);
            let fs: f64 = parse_num(rec_line, "sampling frequency", fs_tok)?;
            if fs <= 0.0 {
                return Err(perr(rec_line, "sampling frequency must be positive"));
            }
            fs
        }
        None => {
            log::info!("{record_name}: sampling frequency absent, using WFDB default {DEFAULT_SAMPLING_FREQUENCY}");
            DEFAULT_SAMPLING_FREQUENCY
        }
    };
    let n_samples: usize = match fields.get(3) {
        Some(tok) => parse_num(rec_line, "sample count", tok)?,
        None => return Err(perr(rec_line, "record line has no sample count")),
    };
    if n_samples == 0 {
        return Err(perr(rec_line, "sample count must be positive"));
    }

    let signal_lines: Vec<(usize, &str)> = lines.collect();
    if signal_lines.len() != n_signals {
        return Err(perr(
            signal_lines.last().map(|(n, _)| *n).unwrap_or(rec_line),
            format!(
                "record declares {n_signals} signal(s) but header has {} signal line(s)",
                signal_lines.len()
            ),
        ));
    }
    if n_signals > 1 {
        return Err(WfdbError::Unsupported(format!(
            "record {record_name} declares {n_signals} signals; only single-signal records are supported"
        )));
    }
    let (sig_line, sig) = signal_lines[0];
    let mut toks = sig.split_whitespace();
    let file_name = toks
        .next()
        .ok_or_else(|| perr(sig_line, "empty signal line"))?
        .to_string();
    let fmt_tok = toks
        .next()
        .ok_or_else(|| perr(sig_line, "signal line has no format"))?;
    let fmt_base = fmt_tok.split(['x', ':', '+']).next().unwrap_or(fmt_tok);
    let format_code: u32 = parse_num(sig_line, "format", fmt_base)?;

    let mut gain = DEFAULT_GAIN;
    let mut units = String::from("mV");
    let mut baseline: Option<i32> = None;
    match toks.next() {
        Some(tok) => {
            let (gain_part, unit_part) = match tok.split_once('/') {
                Some((g, u)) => (g, Some(u)),
                None => (tok, None),
            };
            let gain_num = match gain_part.split_once('(') {
                Some((g, b)) => {
                    let b = b.trim_end_matches(')');
                    baseline = Some(parse_num(sig_line, "baseline", b)?);
                    g
                }
                None => gain_part,
            };
            let g: f64 = parse_num(sig_line, "gain", gain_num)?;
            if g == 0.0 {
                log::info!("{record_name}: gain 0, using WFDB default {DEFAULT_GAIN}");
            } else {
                gain = g;
            }
            if let Some(u) = unit_part {
                units = u.to_string();
            }
        }
        None => log::info!("{record_name}: gain absent, using WFDB default {DEFAULT_GAIN}"),
    }

    let adc_resolution = match toks.next() {
        Some(t) => match parse_num::<u32>(sig_line, "ADC resolution", t)? {
            0 => DEFAULT_ADC_RESOLUTION,
            r => r,
        },
        None => {
            log::info!("{record_name}: ADC resolution absent, using default {DEFAULT_ADC_RESOLUTION}");
            DEFAULT_ADC_RESOLUTION
        }
    };
    let adc_zero = match toks.next() {
        Some(t) => parse_num(sig_line, "ADC zero", t)?,
        None => {
            log::info!("{record_name}: ADC zero absent, using default 0");
            0
        }
    };
    let initial_value = match toks.next() {
        Some(t) => parse_num(sig_line, "initial value", t)?,
        None => adc_zero,
    };
    let checksum = match toks.next() {
        Some(t) => Some(parse_num::<i32>(sig_line, "checksum", t)? as i16),
        None => None,
    };
    let block_size = match toks.next() {
        Some(t) => parse_num(sig_line, "block size", t)?,
        None => 0,
    };
    let signal_description = toks.collect::<Vec<_>>().join(" ");
    if baseline.is_some_and(|b| b != adc_zero) {
        log::debug!("{record_name}: baseline {baseline:?} differs from ADC zero {adc_zero}");
    }

    Ok(RecordHeader {
        record_name,
        n_signals,
        sampling_frequency,
        n_samples,
        file_name,
        format_code,
        gain,
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        block_size,
        signal_description,
    })
}

/// Renders a header in the same grammar [`parse_header`] accepts.
pub fn format_header(h: &RecordHeader) -> String {
    let checksum = h.checksum.map(|c| c.to_string()).unwrap_or_else(|| "0".into());
    format!(
        "{} {} {} {}\n{} {} {}/{} {} {} {} {} {} {}\n",
        h.record_name,
        h.n_signals,
        h.sampling_frequency,
        h.n_samples,
        h.file_name,
        h.format_code,
        h.gain,
        h.units,
        h.adc_resolution,
        h.adc_zero,
        h.initial_value,
        checksum,
        h.block_size,
        h.signal_description
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_header() {
        let h = parse_header(b"x 1 100 6000\nx.dat 212 200 12 0 0 0 0 ECG\n").unwrap();
        assert_eq!(h.n_samples, 6000);
        assert_eq!(h.format_code, 212);
        assert_eq!(h.sampling_frequency, 100.0);
        assert_eq!(h.signal_description, "ECG");
        assert_eq!(h.checksum, Some(0));
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let h = parse_header(b"# comment\n\nrec 1 100 12000\nrec.dat 212\n").unwrap();
        assert_eq!(h.gain, DEFAULT_GAIN);
        assert_eq!(h.adc_zero, 0);
        assert_eq!(h.adc_resolution, 12);
        assert_eq!(h.checksum, None);
        assert_eq!(h.units, "mV");
    }

    #[test]
    fn gain_with_baseline_and_units() {
        let h = parse_header(b"r 1 100 6000\nr.dat 212 200(5)/mV 12 5 -3 1234 0 ECG lead\n").unwrap();
        assert_eq!(h.gain, 200.0);
        assert_eq!(h.adc_zero, 5);
        assert_eq!(h.initial_value, -3);
        assert_eq!(h.checksum, Some(1234));
        assert_eq!(h.signal_description, "ECG lead");
        assert!((h.to_millivolts(205) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn literal_sample_count() {
        let h = parse_header(b"a01 1 100 489600\na01.dat 212 200 12 0 0 0 0 ECG\n").unwrap();
        assert_eq!(h.sampling_frequency, 100.0);
        assert_eq!(h.n_samples, 489600);
    }

    #[test]
    fn signal_line_count_mismatch() {
        let err = parse_header(b"x 2 100 6000\nx.dat 212 200 12 0 0 0 0 ECG\n").unwrap_err();
        assert!(matches!(err, WfdbError::Parse { .. }));
        let two = b"x 2 100 6000\nx.dat 212 200 12 0 0 0 0 ECG\nx.dat 212 200 12 0 0 0 0 ECG\n";
        assert!(matches!(parse_header(two).unwrap_err(), WfdbError::Unsupported(_)));
        let err = parse_header(b"x 1 100 6000\n").unwrap_err();
        assert!(matches!(err, WfdbError::Parse { .. }));
    }

    #[test]
    fn non_numeric_and_zero_signals() {
        assert!(matches!(
            parse_header(b"x one 100 6000\n").unwrap_err(),
            WfdbError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_header(b"x 0 100 6000\n").unwrap_err(),
            WfdbError::Parse { .. }
        ));
        assert!(matches!(
            parse_header(b"x 1 100 6000\nx.dat 212 abc\n").unwrap_err(),
            WfdbError::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn format_then_parse() {
        let h = parse_header(b"r 1 100 6000\nr.dat 212 200/mV 12 0 7 -12 0 ECG\n").unwrap();
        assert_eq!(parse_header(format_header(&h).as_bytes()).unwrap(), h);
    }
}
