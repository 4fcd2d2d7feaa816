//! Versioned binary model checkpoints.
//!
//! ```text
//! "OSAM" | version u8 | header length u32 | header | header CRC-32 u32
//!        | 6 x (count u64, count x f32) | payload CRC-32 u32
//! ```
//!
//! The header holds the model configuration, normalisation statistics and
//! split parameters. All integers and floats are little-endian.

use std::path::Path;

use super::{ModelConfig, ModelParameters, NnError, TrainedModel};
use crate::dataset::{NormStats, SplitFractions};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OSAM";
pub const CHECKPOINT_VERSION: u8 = 1;

const NO_PATIENCE: u64 = u64::MAX;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NnError::Format("checkpoint is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, NnError> {
        usize::try_from(self.u64()?).map_err(|_| NnError::Format("size field overflows".into()))
    }
    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn encode_header(m: &TrainedModel) -> Vec<u8> {
    let c = &m.config;
    let mut w = Writer(Vec::new());
    for v in [
        c.window_size,
        c.n_filters,
        c.kernel_size,
        c.pool_size,
        c.pool_stride,
        c.hidden_units,
        c.batch_size,
        c.epochs,
    ] {
        w.u64(v as u64);
    }
    for v in [c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon, c.dropout] {
        w.f64(v);
    }
    w.u64(c.seed);
    w.u64(c.conv_relu as u64);
    w.u64(c.early_stopping_patience.map_or(NO_PATIENCE, |p| p as u64));
    w.f64(m.norm.mean);
    w.f64(m.norm.std);
    w.f64(m.split_fractions.train);
    w.f64(m.split_fractions.test);
    w.f64(m.split_fractions.validation);
    w.u64(m.split_seed);
    w.u64(m.epoch as u64);
    w.0
}

pub fn encode_checkpoint(m: &TrainedModel) -> Vec<u8> {
    let header = encode_header(m);
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&crc32fast::hash(&header).to_le_bytes());
    let payload_start = out.len();
    for t in m.params.tensors() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainedModel, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(NnError::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = r.take(1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Format(format!("unsupported checkpoint version {version}")));
    }
    let header_len = r.u32()? as usize;
    let header = r.take(header_len)?;
    if r.u32()? != crc32fast::hash(header) {
        return Err(NnError::Format("checkpoint header checksum mismatch".into()));
    }
    let mut h = Reader { buf: header, pos: 0 };
    let mut dims = [0usize; 8];
    for d in dims.iter_mut() {
        *d = h.usize()?;
    }
    let mut rates = [0f64; 5];
    for v in rates.iter_mut() {
        *v = h.f64()?;
    }
    let seed = h.u64()?;
    let conv_relu = h.u64()? != 0;
    let patience = match h.u64()? {
        NO_PATIENCE => None,
        p => Some(p as usize),
    };
    let config = ModelConfig {
        window_size: dims[0],
        n_filters: dims[1],
        kernel_size: dims[2],
        pool_size: dims[3],
        pool_stride: dims[4],
        hidden_units: dims[5],
        batch_size: dims[6],
        epochs: dims[7],
        learning_rate: rates[0],
        adam_beta1: rates[1],
        adam_beta2: rates[2],
        adam_epsilon: rates[3],
        dropout: rates[4],
        seed,
        conv_relu,
        early_stopping_patience: patience,
    };
    let norm = NormStats {
        mean: h.f64()?,
        std: h.f64()?,
    };
    let split_fractions = SplitFractions {
        train: h.f64()?,
        test: h.f64()?,
        validation: h.f64()?,
    };
    let split_seed = h.u64()?;
    let epoch = h.usize()?;
    config.validate()?;

    let payload_start = r.pos;
    let mut params = ModelParameters::<f32>::zeros(config.architecture())?;
    for t in params.tensors_mut() {
        let n = r.usize()?;
        if n != t.len() {
            return Err(NnError::Format(format!(
                "tensor holds {n} values, configuration implies {}",
                t.len()
            )));
        }
        let raw = r.take(n.checked_mul(4).ok_or_else(|| NnError::Format("tensor size overflows".into()))?)?;
        for (dst, b) in t.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(b.try_into().unwrap());
        }
    }
    let payload_crc = crc32fast::hash(&bytes[payload_start..r.pos]);
    if r.u32()? != payload_crc {
        return Err(NnError::Format("checkpoint parameter checksum mismatch".into()));
    }
    if r.pos != bytes.len() {
        return Err(NnError::Format("trailing bytes after checkpoint".into()));
    }
    Ok(TrainedModel {
        config,
        norm,
        params,
        split_fractions,
        split_seed,
        epoch,
    })
}

pub fn write_checkpoint(path: &Path, m: &TrainedModel) -> Result<(), NnError> {
    let io = |e: std::io::Error| NnError::Io(format!("{}: {e}", path.display()));
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, encode_checkpoint(m)).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<TrainedModel, NnError> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
