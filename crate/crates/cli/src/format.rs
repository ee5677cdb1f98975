//! Binary containers. Every file is little-endian, stores 64-bit floats
//! row-major, and ends with the SHA-256 of all preceding bytes.
//!
//! | kind        | layout after magic + `u32` version                              |
//! |-------------|------------------------------------------------------------------|
//! | `.featmat`  | rows `u64`, cols `u64`, data                                     |
//! | `.quatseq`  | frames `u64`, joints `u64`, frame interval `f64`, `(w,x,y,z)` data |
//! | containers  | header length `u64`, JSON header, data of every listed array     |

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use latdyn::so3::{Rotation, RotationSequence};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const FEATMAT_MAGIC: &[u8; 4] = b"LDFM";
pub const QUATSEQ_MAGIC: &[u8; 4] = b"LDQS";
const CHECKSUM_LEN: usize = 32;

fn checksum(bytes: &[u8]) -> [u8; CHECKSUM_LEN] {
    Sha256::digest(bytes).into()
}

/// Appends the trailer.
fn seal(mut body: Vec<u8>) -> Vec<u8> {
    let sum = checksum(&body);
    body.extend_from_slice(&sum);
    body
}

/// Verifies the trailer and magic/version, returning the payload after them.
fn open<'a>(bytes: &'a [u8], magic: &[u8; 4], what: &str) -> Result<&'a [u8], CliError> {
    if bytes.len() < 8 + CHECKSUM_LEN {
        return Err(CliError::Format(format!("{what}: file is truncated ({} bytes)", bytes.len())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if &bytes[..4] != magic {
        return Err(CliError::Format(format!(
            "{what}: bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    if checksum(body) != trailer {
        return Err(CliError::Format(format!("{what}: checksum mismatch")));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CliError::Format(format!("{what}: unsupported format version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(&body[8..])
}

fn header(magic: &[u8; 4]) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.reserve(xs.len() * 8);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Cursor over a verified payload.
struct Reader<'a> {
    buf: &'a [u8],
    what: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.buf.len() < n {
            return Err(CliError::Format(format!("{}: payload ends early (need {n} more bytes, have {})", self.what, self.buf.len())));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize, CliError> {
        let x = self.u64()?;
        usize::try_from(x).map_err(|_| CliError::Format(format!("{}: size {x} does not fit in memory", self.what)))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        let bytes = n.checked_mul(8).ok_or_else(|| CliError::Format(format!("{}: array size overflows", self.what)))?;
        Ok(self.take(bytes)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn finish(&self) -> Result<(), CliError> {
        if !self.buf.is_empty() {
            return Err(CliError::Format(format!("{}: {} unexpected trailing bytes", self.what, self.buf.len())));
        }
        Ok(())
    }
}

/// A row-major `rows × cols` array of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CliError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(CliError::Format(format!("row {bad} has {} columns, expected {cols}", rows[bad].len())));
        }
        Ok(FeatureMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks_exact(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn expect_cols(&self, cols: usize, what: &str) -> Result<(), CliError> {
        if self.cols != cols {
            return Err(CliError::Format(format!("{what}: expected {cols} columns, file has {}", self.cols)));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header(FEATMAT_MAGIC);
        put_u64(&mut out, self.rows as u64);
        put_u64(&mut out, self.cols as u64);
        put_f64s(&mut out, &self.data);
        seal(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let what = "feature matrix";
        let mut r = Reader { buf: open(bytes, FEATMAT_MAGIC, what)?, what };
        let rows = r.usize()?;
        let cols = r.usize()?;
        let n = rows.checked_mul(cols).ok_or_else(|| CliError::Format(format!("{what}: shape {rows}x{cols} overflows")))?;
        let data = r.f64s(n)?;
        r.finish()?;
        Ok(FeatureMatrix { rows, cols, data })
    }
}

pub fn encode_quatseq(seq: &RotationSequence) -> Vec<u8> {
    let mut out = header(QUATSEQ_MAGIC);
    put_u64(&mut out, seq.frames() as u64);
    put_u64(&mut out, seq.joints() as u64);
    out.extend_from_slice(&seq.frame_interval().to_le_bytes());
    for q in seq.data() {
        put_f64s(&mut out, &q.to_array());
    }
    seal(out)
}

pub fn decode_quatseq(bytes: &[u8]) -> Result<RotationSequence, CliError> {
    let what = "rotation sequence";
    let mut r = Reader { buf: open(bytes, QUATSEQ_MAGIC, what)?, what };
    let frames = r.usize()?;
    let joints = r.usize()?;
    let interval = r.f64()?;
    let n = frames
        .checked_mul(joints)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| CliError::Format(format!("{what}: shape {frames}x{joints} overflows")))?;
    let raw = r.f64s(n)?;
    r.finish()?;
    let data = raw
        .chunks_exact(4)
        .map(|q| Rotation::from_stored(q[0], q[1], q[2], q[3]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Format(format!("{what}: {e}")))?;
    RotationSequence::with_interval(frames, joints, data, interval).map_err(|e| CliError::Format(format!("{what}: {e}")))
}

/// Shape entry of a container array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        NamedArray { name: name.into(), rows, cols, data }
    }

    pub fn vector(name: impl Into<String>, data: &[f64]) -> Self {
        Self::new(name, 1, data.len(), data.to_vec())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContainerHeader<M> {
    meta: M,
    arrays: Vec<ArrayInfo>,
}

/// JSON metadata plus named arrays.
pub fn encode_container<M: Serialize>(magic: &[u8; 4], meta: &M, arrays: &[NamedArray]) -> Result<Vec<u8>, CliError> {
    let head = ContainerHeader {
        meta,
        arrays: arrays.iter().map(|a| ArrayInfo { name: a.name.clone(), rows: a.rows, cols: a.cols }).collect(),
    };
    let json = serde_json::to_vec(&head).map_err(|e| CliError::Format(format!("cannot encode header: {e}")))?;
    let mut out = header(magic);
    put_u64(&mut out, json.len() as u64);
    out.extend_from_slice(&json);
    for a in arrays {
        put_f64s(&mut out, &a.data);
    }
    Ok(seal(out))
}

pub fn decode_container<M: DeserializeOwned>(bytes: &[u8], magic: &[u8; 4], what: &str) -> Result<(M, Vec<NamedArray>), CliError> {
    let mut r = Reader { buf: open(bytes, magic, what)?, what };
    let len = r.usize()?;
    let head: ContainerHeader<M> =
        serde_json::from_slice(r.take(len)?).map_err(|e| CliError::Format(format!("{what}: bad header: {e}")))?;
    let mut arrays = Vec::with_capacity(head.arrays.len());
    for info in head.arrays {
        let n = info
            .rows
            .checked_mul(info.cols)
            .ok_or_else(|| CliError::Format(format!("{what}: array {} shape overflows", info.name)))?;
        let data = r.f64s(n)?;
        arrays.push(NamedArray { name: info.name, rows: info.rows, cols: info.cols, data });
    }
    r.finish()?;
    Ok((head.meta, arrays))
}

/// Sequential access to decoded arrays by expected name and shape.
pub struct ArrayCursor {
    arrays: std::vec::IntoIter<NamedArray>,
    what: String,
}

impl ArrayCursor {
    pub fn new(arrays: Vec<NamedArray>, what: &str) -> Self {
        ArrayCursor { arrays: arrays.into_iter(), what: what.to_string() }
    }

    pub fn next(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>, CliError> {
        let a = self
            .arrays
            .next()
            .ok_or_else(|| CliError::Format(format!("{}: missing array {name}", self.what)))?;
        if a.name != name || a.rows != rows || a.cols != cols {
            return Err(CliError::Format(format!(
                "{}: expected array {name} ({rows}x{cols}), found {} ({}x{})",
                self.what, a.name, a.rows, a.cols
            )));
        }
        Ok(a.data)
    }

    /// Next array with the given name, any number of rows.
    pub fn next_rows(&mut self, name: &str, cols: usize) -> Result<(usize, Vec<f64>), CliError> {
        let a = self
            .arrays
            .next()
            .ok_or_else(|| CliError::Format(format!("{}: missing array {name}", self.what)))?;
        if a.name != name || a.cols != cols {
            return Err(CliError::Format(format!(
                "{}: expected array {name} with {cols} columns, found {} ({}x{})",
                self.what, a.name, a.rows, a.cols
            )));
        }
        Ok((a.rows, a.data))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        if let Some(a) = self.arrays.next() {
            return Err(CliError::Format(format!("{}: unexpected extra array {}", self.what, a.name)));
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_featmat(path: &Path) -> Result<FeatureMatrix, CliError> {
    FeatureMatrix::from_bytes(&read_file(path)?).map_err(|e| e.in_file(path))
}

pub fn write_featmat(path: &Path, m: &FeatureMatrix) -> Result<(), CliError> {
    write_file(path, &m.to_bytes())
}

pub fn read_quatseq(path: &Path) -> Result<RotationSequence, CliError> {
    decode_quatseq(&read_file(path)?).map_err(|e| e.in_file(path))
}

pub fn write_quatseq(path: &Path, seq: &RotationSequence) -> Result<(), CliError> {
    write_file(path, &encode_quatseq(seq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featmat_round_trip() {
        let m = FeatureMatrix { rows: 2, cols: 3, data: vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5, 1e300, -7.25] };
        let bytes = m.to_bytes();
        let back = FeatureMatrix::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.data[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(&bytes[..4], b"LDFM");
        assert_eq!(bytes.len(), 4 + 4 + 16 + 48 + 32);
    }

    #[test]
    fn featmat_rejects_corruption() {
        let m = FeatureMatrix { rows: 1, cols: 2, data: vec![1.0, 2.0] };
        let mut bytes = m.to_bytes();
        bytes[30] ^= 1;
        assert!(matches!(FeatureMatrix::from_bytes(&bytes), Err(CliError::Format(msg)) if msg.contains("checksum")));

        let mut bad_version = header(FEATMAT_MAGIC);
        bad_version[4] = 2;
        put_u64(&mut bad_version, 0);
        put_u64(&mut bad_version, 0);
        let err = FeatureMatrix::from_bytes(&seal(bad_version)).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");

        assert!(FeatureMatrix::from_bytes(b"LDQS").is_err());
        let q = encode_quatseq(&RotationSequence::new(1, 1, vec![Rotation::IDENTITY]).unwrap());
        assert!(FeatureMatrix::from_bytes(&q).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn featmat_rejects_shape_mismatch() {
        let mut body = header(FEATMAT_MAGIC);
        put_u64(&mut body, 2);
        put_u64(&mut body, 2);
        put_f64s(&mut body, &[1.0, 2.0, 3.0]);
        let err = FeatureMatrix::from_bytes(&seal(body)).unwrap_err();
        assert!(err.to_string().contains("ends early"), "{err}");
    }

    #[test]
    fn quatseq_round_trip() {
        let data = vec![
            Rotation::IDENTITY,
            Rotation::from_quaternion(0.5, 0.5, -0.5, 0.5).unwrap(),
            Rotation::from_quaternion(0.9, 0.1, 0.2, 0.3).unwrap(),
            Rotation::from_quaternion(0.1, 0.9, 0.2, -0.3).unwrap(),
        ];
        let seq = RotationSequence::with_interval(2, 2, data, 1.0 / 30.0).unwrap();
        let bytes = encode_quatseq(&seq);
        let back = decode_quatseq(&bytes).unwrap();
        assert_eq!(back, seq);
        assert_eq!(encode_quatseq(&back), bytes);
    }

    #[test]
    fn container_round_trip() {
        #[derive(Debug, PartialEq, Serialize, Deserialize)]
        struct Meta {
            name: String,
            scale: f64,
        }
        let meta = Meta { name: "x".into(), scale: 0.1 + 0.2 };
        let arrays = vec![NamedArray::vector("a", &[1.0, 2.0]), NamedArray::new("b", 2, 1, vec![3.0, 4.0])];
        let bytes = encode_container(b"TEST", &meta, &arrays).unwrap();
        let (m2, a2): (Meta, _) = decode_container(&bytes, b"TEST", "test").unwrap();
        assert_eq!(m2, meta);
        assert_eq!(a2, arrays);
        assert_eq!(encode_container(b"TEST", &m2, &a2).unwrap(), bytes);

        let mut cur = ArrayCursor::new(a2, "test");
        assert!(cur.next("a", 1, 3).is_err());
    }
}
