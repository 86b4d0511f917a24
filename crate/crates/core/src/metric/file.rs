//! `TDLM` binary metric files.
//!
//! Layout (all little-endian):
//!
//! | offset | size      | field                         |
//! |--------|-----------|-------------------------------|
//! | 0      | 4         | magic `b"TDLM"`               |
//! | 4      | 4         | format version (`u32`, = 1)   |
//! | 8      | 4         | dimension `d` (`u32`)         |
//! | 12     | `8·d·d`   | entries, row-major `f64`      |

use std::fs;
use std::io::Write;
use std::path::Path;

use super::MetricMatrix;
use crate::error::{Error, Result};

pub const METRIC_MAGIC: &[u8; 4] = b"TDLM";
pub const METRIC_VERSION: u32 = 1;

const HEADER_LEN: usize = 12;

pub fn encode_metric(m: &MetricMatrix) -> Vec<u8> {
    let d = m.dim();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * d * d);
    buf.extend_from_slice(METRIC_MAGIC);
    buf.extend_from_slice(&METRIC_VERSION.to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for v in m.to_row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_metric(bytes: &[u8], path: &Path) -> Result<MetricMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != METRIC_MAGIC {
        return Err(Error::format(path, "missing TDLM magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != METRIC_VERSION {
        return Err(Error::format(path, format!("unsupported TDLM version {version}")));
    }
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + 8 * d * d;
    if d == 0 || bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("dimension {d} needs {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let entries: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = nalgebra::DMatrix::from_row_slice(d, d, &entries);
    MetricMatrix::new(m).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_metric(path: impl AsRef<Path>, m: &MetricMatrix) -> Result<()> {
    let path = path.as_ref();
    write_atomic_bytes(path, &encode_metric(m))
}

pub fn read_metric(path: impl AsRef<Path>) -> Result<MetricMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_metric(&bytes, path)
}

/// Lossy CSV dump (`d` rows of `d` comma-separated values).
pub fn export_metric_csv(path: impl AsRef<Path>, m: &MetricMatrix) -> Result<()> {
    let path = path.as_ref();
    let d = m.dim();
    let mut out = String::with_capacity(d * d * 12);
    for r in 0..d {
        let row: Vec<String> = (0..d).map(|c| format!("{:.9e}", m.get(r, c))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic_bytes(path, out.as_bytes())
}

/// Writes through a sibling temp file so readers never see a partial file.
pub(crate) fn write_atomic_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
