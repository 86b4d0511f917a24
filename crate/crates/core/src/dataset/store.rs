//! `TDLF` single-file feature store.
//!
//! Layout (little-endian; strings are a `u32` byte length then UTF-8):
//!
//! ```text
//! magic        b"TDLF"
//! version      u32 (= 1)
//! preset_hash  [u8; 32]   SHA-256 of the descriptor preset
//! source_hash  [u8; 32]   SHA-256 of the inputs the records came from
//! preset_name  string
//! dim          u32
//! count        u64
//! count × { person_id string, camera_id string, dim × f64 }
//! ```

use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::metric::{FeatureVector, LabeledSample};

pub const STORE_MAGIC: &[u8; 4] = b"TDLF";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreHeader {
    pub version: u32,
    pub preset_name: String,
    pub preset_hash: [u8; 32],
    pub source_hash: [u8; 32],
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub header: StoreHeader,
    pub records: Vec<LabeledSample>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl FeatureStore {
    pub fn new(
        preset_name: impl Into<String>,
        preset_hash: [u8; 32],
        source_hash: [u8; 32],
        records: Vec<LabeledSample>,
    ) -> Result<Self> {
        let dim = records.first().map_or(0, LabeledSample::dim);
        if let Some(bad) = records.iter().find(|r| r.dim() != dim) {
            return Err(invalid!(
                "record {}/{} has dimension {}, store has {dim}",
                bad.person_id,
                bad.camera_id,
                bad.dim()
            ));
        }
        Ok(FeatureStore {
            header: StoreHeader {
                version: STORE_VERSION,
                preset_name: preset_name.into(),
                preset_hash,
                source_hash,
                dim,
                count: records.len(),
            },
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.records
    }

    pub fn encode(&self) -> Vec<u8> {
        let d = self.header.dim;
        let mut buf = Vec::with_capacity(128 + self.records.len() * (d * 8 + 32));
        buf.extend_from_slice(STORE_MAGIC);
        buf.extend_from_slice(&STORE_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.header.preset_hash);
        buf.extend_from_slice(&self.header.source_hash);
        put_str(&mut buf, &self.header.preset_name);
        buf.extend_from_slice(&(d as u32).to_le_bytes());
        buf.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            put_str(&mut buf, &r.person_id);
            put_str(&mut buf, &r.camera_id);
            for v in r.feature.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != STORE_MAGIC {
            return Err(Error::format(path, "missing TDLF magic"));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(Error::format(path, format!("unsupported TDLF version {version}")));
        }
        let preset_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let source_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let preset_name = r.string()?;
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let remaining = bytes.len() - r.pos;
        // Each record needs at least two length prefixes plus its values.
        if count.saturating_mul(8 + dim * 8) > remaining {
            return Err(Error::format(path, format!("{count} records cannot fit in {remaining} bytes")));
        }
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let person_id = r.string()?;
            let camera_id = r.string()?;
            let values: Vec<f64> = r
                .take(dim * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let feature = FeatureVector::new(values).map_err(|e| Error::format(path, e.to_string()))?;
            let sample = LabeledSample::new(feature, person_id, camera_id)
                .map_err(|e| Error::format(path, e.to_string()))?;
            records.push(sample);
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after last record"));
        }
        Ok(FeatureStore {
            header: StoreHeader {
                version,
                preset_name,
                preset_hash,
                source_hash,
                dim,
                count,
            },
            records,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::metric::write_atomic_bytes(path.as_ref(), &self.encode())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        FeatureStore::decode(&bytes, path)
    }

    /// `person_id,camera_id,v0,...,v_{d−1}` rows, with a header line.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("person_id,camera_id");
        for i in 0..self.header.dim {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&csv_field(&r.person_id));
            out.push(',');
            out.push_str(&csv_field(&r.camera_id));
            for v in r.feature.as_slice() {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        crate::metric::write_atomic_bytes(path.as_ref(), out.as_bytes())
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::format(self.path, "truncated TDLF file"));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::format(self.path, "string is not UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(p: &str, c: &str, v: Vec<f64>) -> LabeledSample {
        LabeledSample::new(FeatureVector::new(v).unwrap(), p, c).unwrap()
    }

    #[test]
    fn header_layout() {
        let s = FeatureStore::new("x", [1; 32], [2; 32], vec![rec("p", "c", vec![0.5])]).unwrap();
        let b = s.encode();
        assert_eq!(&b[..4], b"TDLF");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..40], &[1; 32]);
        assert_eq!(&b[40..72], &[2; 32]);
        assert_eq!(&b[72..77], &[1, 0, 0, 0, b'x']);
        assert_eq!(&b[77..81], &[1, 0, 0, 0]);
        assert_eq!(&b[81..89], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(b.len(), 89 + 5 + 5 + 8);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let recs = vec![rec("a", "c", vec![1.0]), rec("b", "c", vec![1.0, 2.0])];
        assert!(FeatureStore::new("x", [0; 32], [0; 32], recs).is_err());
    }

    #[test]
    fn corrupt_files_rejected() {
        let s = FeatureStore::new("x", [0; 32], [0; 32], vec![rec("p", "c", vec![0.5, 1.0])]).unwrap();
        let b = s.encode();
        let p = Path::new("mem");
        assert!(FeatureStore::decode(&b[..b.len() - 1], p).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(FeatureStore::decode(&extra, p).is_err());
        let mut magic = b.clone();
        magic[3] = b'M';
        assert!(matches!(FeatureStore::decode(&magic, p), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let s = FeatureStore::new(
            "x",
            [0; 32],
            [0; 32],
            vec![rec("a,b", "cam", vec![0.5, -1.0]), rec("c", "cam", vec![0.1, 2.0])],
        )
        .unwrap();
        let path = dir.path().join("f.csv");
        s.export_csv(&path).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "person_id,camera_id,v0,v1");
        assert_eq!(lines[1], "\"a,b\",cam,0.5,-1.0");
        assert_eq!(lines[2], "c,cam,0.1,2.0");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_bitwise(
            vals in proptest::collection::vec(-1e6f64..1e6, 12),
            name in "[a-z]{1,8}",
        ) {
            let recs: Vec<LabeledSample> = vals
                .chunks(3)
                .enumerate()
                .map(|(i, c)| rec(&format!("{name}{i}"), "cam_a", c.to_vec()))
                .collect();
            let s = FeatureStore::new(name.clone(), [7; 32], [9; 32], recs).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.tdlf");
            s.write(&path).unwrap();
            let back = FeatureStore::read(&path).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.encode(), s.encode());
        }
    }
}
