//! Binary checkpoint container.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size        field
//! 0       8           magic  b"QLAMCKPT"
//! 8       4   u32     format version (1)
//! 12      4   u32     metadata length M
//! 16      M           metadata, UTF-8 JSON
//! 16+M    4   u32     array count A
//! then A times:
//!         2   u16     name length N
//!         N           name, UTF-8
//!         1   u8      rank R
//!         8R  u64[R]  shape
//!         8P  f64[P]  values, P = product of shape, row-major
//! ```
//!
//! The file must end exactly after the last array.

use std::fs;
use std::path::Path;

use crate::error::{QlamError, Result};
use crate::nn::ParamView;

pub const MAGIC: &[u8; 8] = b"QLAMCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_views(metadata: String, views: &[ParamView<'_>]) -> Self {
        Self {
            metadata,
            arrays: views
                .iter()
                .map(|v| NamedArray {
                    name: v.name.clone(),
                    shape: v.shape.clone(),
                    data: v.data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u16).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.push(a.shape.len() as u8);
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            source,
        };
        if r.take(8)? != MAGIC {
            return Err(QlamError::parse(source, 0, "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(QlamError::parse(
                source,
                8,
                format!("unsupported version {version}"),
            ));
        }
        let meta_len = r.u32()? as usize;
        let meta_at = r.pos;
        let metadata = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| QlamError::parse(source, meta_at as u64, "metadata is not UTF-8"))?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name_at = r.pos;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| QlamError::parse(source, name_at as u64, "array name is not UTF-8"))?;
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some())
                .ok_or_else(|| {
                    QlamError::parse(source, r.pos as u64, format!("array {name} is too large"))
                })?;
            let raw = r.take(len * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(QlamError::parse(
                source,
                r.pos as u64,
                "trailing bytes after last array",
            ));
        }
        Ok(Self { metadata, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| QlamError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| QlamError::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    /// Copies every array into `targets`, matching by name and shape. Every
    /// target must be present; extra arrays in the checkpoint are an error.
    pub fn restore_into(&self, targets: &[ParamView<'_>], flat: &mut Vec<f64>) -> Result<()> {
        if targets.len() != self.arrays.len() {
            return Err(QlamError::Shape(format!(
                "checkpoint holds {} arrays, model has {}",
                self.arrays.len(),
                targets.len()
            )));
        }
        flat.clear();
        for t in targets {
            let a = self
                .get(&t.name)
                .ok_or_else(|| QlamError::Shape(format!("checkpoint has no array {}", t.name)))?;
            if a.shape != t.shape {
                return Err(QlamError::Shape(format!(
                    "array {}: checkpoint shape {:?}, model shape {:?}",
                    t.name, a.shape, t.shape
                )));
            }
            flat.extend_from_slice(&a.data);
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(QlamError::parse(
                self.source,
                self.bytes.len() as u64,
                "unexpected end of file",
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
