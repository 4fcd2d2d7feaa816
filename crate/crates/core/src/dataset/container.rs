//! Binary dataset container and CSV export.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `OSAW`               |
//! | 4      | 1    | version (1)                |
//! | 5      | 4    | window width `W` (u32)     |
//! | 9      | 8    | row count (u64)            |
//! | 17     | ...  | rows: `W` f32 + label byte |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DatasetError, DatasetSplit, RowMatrix, SplitFractions, WindowedDataset};

pub const MAGIC: &[u8; 4] = b"OSAW";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 17;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to a sibling temp file, then renames over `path`.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), DatasetError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let file = fs::File::create(tmp).map_err(io_err(tmp))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(io_err(tmp))?;
    w.into_inner()
        .map_err(|e| e.into_error())
        .and_then(|f| f.sync_all())
        .map_err(io_err(tmp))?;
    fs::rename(tmp, path).map_err(io_err(path))
}

pub fn write_rows(path: &Path, rows: &RowMatrix) -> Result<(), DatasetError> {
    let width = u32::try_from(rows.width())
        .map_err(|_| DatasetError::Format(format!("width {} exceeds u32", rows.width())))?;
    write_atomic(path, |w| {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION])?;
        w.write_all(&width.to_le_bytes())?;
        w.write_all(&(rows.n_rows() as u64).to_le_bytes())?;
        for (row, &label) in rows.rows().zip(rows.labels()) {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&[label])?;
        }
        Ok(())
    })
}

/// Reads a container; `expected_width` turns a width mismatch into an error.
pub fn read_rows(path: &Path, expected_width: Option<usize>) -> Result<RowMatrix, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let fmt = |m: String| DatasetError::Format(format!("{}: {m}", path.display()));
    if bytes.len() < HEADER_LEN {
        return Err(fmt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(fmt("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(fmt(format!("unsupported version {}", bytes[4])));
    }
    let width = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let n_rows = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
    if let Some(w) = expected_width {
        if w != width {
            return Err(fmt(format!("window width {width}, expected {w}")));
        }
    }
    let stride = 4 * width + 1;
    let body = &bytes[HEADER_LEN..];
    if n_rows.checked_mul(stride) != Some(body.len()) {
        return Err(fmt(format!(
            "body has {} bytes, {n_rows} rows of width {width} need {}",
            body.len(),
            n_rows.saturating_mul(stride)
        )));
    }
    let mut values = Vec::with_capacity(width * n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for rec in body.chunks_exact(stride.max(1)) {
        values.extend(
            rec[..4 * width]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap())),
        );
        labels.push(rec[4 * width]);
    }
    RowMatrix::from_parts(width, values, labels).map_err(|e| fmt(e.to_string()))
}

pub fn write_dataset(path: &Path, ds: &WindowedDataset) -> Result<(), DatasetError> {
    write_rows(path, &ds.rows)
}

pub fn read_dataset(path: &Path, expected_width: Option<usize>) -> Result<WindowedDataset, DatasetError> {
    Ok(WindowedDataset {
        rows: read_rows(path, expected_width)?,
    })
}

const SPLIT_PARTS: [&str; 3] = ["train", "test", "validation"];

/// Writes a split as three containers plus a `split.txt` sidecar.
pub fn write_split(dir: &Path, split: &DatasetSplit) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, rows) in SPLIT_PARTS.iter().zip([&split.train, &split.test, &split.validation]) {
        write_rows(&dir.join(format!("{name}.osaw")), rows)?;
    }
    let f = &split.fractions;
    let meta = format!(
        "seed = {}\ntrain_fraction = {}\ntest_fraction = {}\nvalidation_fraction = {}\n",
        split.seed, f.train, f.test, f.validation
    );
    let path = dir.join("split.txt");
    write_atomic(&path, |w| w.write_all(meta.as_bytes()))
}

pub fn read_split(dir: &Path) -> Result<DatasetSplit, DatasetError> {
    let meta_path = dir.join("split.txt");
    let meta = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let mut seed = None;
    let mut fr = [None; 3];
    for line in meta.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DatasetError::Format(format!("split.txt: bad line {line:?}")))?;
        let v = v.trim();
        let bad = || DatasetError::Format(format!("split.txt: bad value {v:?}"));
        match k.trim() {
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            "train_fraction" => fr[0] = Some(v.parse().map_err(|_| bad())?),
            "test_fraction" => fr[1] = Some(v.parse().map_err(|_| bad())?),
            "validation_fraction" => fr[2] = Some(v.parse().map_err(|_| bad())?),
            other => return Err(DatasetError::Format(format!("split.txt: unknown key {other:?}"))),
        }
    }
    let missing = || DatasetError::Format("split.txt: missing field".into());
    let train = read_rows(&dir.join("train.osaw"), None)?;
    let w = Some(train.width());
    Ok(DatasetSplit {
        test: read_rows(&dir.join("test.osaw"), w)?,
        validation: read_rows(&dir.join("validation.osaw"), w)?,
        train,
        fractions: SplitFractions {
            train: fr[0].ok_or_else(missing)?,
            test: fr[1].ok_or_else(missing)?,
            validation: fr[2].ok_or_else(missing)?,
        },
        seed: seed.ok_or_else(missing)?,
    })
}

/// One line per row: `W` comma-separated values, then the label.
pub fn write_csv(path: &Path, rows: &RowMatrix) -> Result<(), DatasetError> {
    write_atomic(path, |w| {
        for (row, &label) in rows.rows().zip(rows.labels()) {
            for v in row {
                write!(w, "{v},")?;
            }
            writeln!(w, "{label}")?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split_dataset;

    fn two_rows() -> WindowedDataset {
        let rows = RowMatrix::from_parts(3, vec![1.5, -2.0, 0.25, f32::MIN_POSITIVE, 7.0, -0.0], vec![1, 0])
            .unwrap();
        WindowedDataset { rows }
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.osaw");
        let ds = WindowedDataset { rows: RowMatrix::new(500) };
        write_dataset(&p, &ds).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 17);
        assert_eq!(read_dataset(&p, Some(500)).unwrap(), ds);
    }

    #[test]
    fn two_row_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.osaw");
        let ds = two_rows();
        write_dataset(&p, &ds).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len() as usize, 17 + 2 * (4 * 3 + 1));
        let back = read_dataset(&p, None).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.rows.row(1)[2].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.osaw");
        write_dataset(&p, &two_rows()).unwrap();
        assert!(matches!(read_dataset(&p, Some(4)).unwrap_err(), DatasetError::Format(_)));

        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_dataset(&p, None).unwrap_err(), DatasetError::Format(_)));

        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_dataset(&p, None).unwrap_err(), DatasetError::Format(_)));
        fs::write(&p, b"OSAW").unwrap();
        assert!(matches!(read_dataset(&p, None).unwrap_err(), DatasetError::Format(_)));
    }

    #[test]
    fn split_round_trip_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = RowMatrix::new(2);
        for i in 0..20 {
            rows.push_row(&[i as f32, -(i as f32)], (i < 10) as u8);
        }
        let split = split_dataset(&WindowedDataset { rows }, SplitFractions::default(), 11).unwrap();
        write_split(dir.path(), &split).unwrap();
        assert_eq!(read_split(dir.path()).unwrap(), split);

        let csv = dir.path().join("t.csv");
        write_csv(&csv, &two_rows().rows).unwrap();
        let text = fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "1.5,-2,0.25,1");
    }
}
