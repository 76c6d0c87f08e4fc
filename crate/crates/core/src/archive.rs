//! Self-describing archive of named numeric arrays, used for model weights.
//!
//! Layout: the magic bytes `HLNA1\n`, a little-endian `u32` header length,
//! a JSON header holding free-form metadata and `{name, shape, dtype}` for
//! every entry, then the raw little-endian element data of each entry in
//! header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"HLNA1\n";

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F32(_) => "f32",
            ArrayData::F64(_) => "f64",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: serde_json::Value,
    arrays: Vec<HeaderEntry>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    /// Free-form description stored alongside the arrays (e.g. the model spec).
    pub metadata: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

impl Archive {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: ArrayData) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Fetch an `f32` array, checking its shape.
    pub fn f32(&self, name: &str, shape: &[usize]) -> Result<&[f32]> {
        match self.lookup(name, shape)? {
            ArrayData::F32(v) => Ok(v),
            ArrayData::F64(_) => Err(Error::Parse(format!("`{name}` is f64, expected f32"))),
        }
    }

    /// Fetch an `f64` array, checking its shape.
    pub fn f64(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        match self.lookup(name, shape)? {
            ArrayData::F64(v) => Ok(v),
            ArrayData::F32(_) => Err(Error::Parse(format!("`{name}` is f32, expected f64"))),
        }
    }

    fn lookup(&self, name: &str, shape: &[usize]) -> Result<&ArrayData> {
        let entry = self
            .get(name)
            .ok_or_else(|| Error::Parse(format!("archive has no array `{name}`")))?;
        if entry.shape != shape {
            return Err(Error::Parse(format!(
                "array `{name}` has shape {:?}, expected {shape:?}",
                entry.shape
            )));
        }
        Ok(&entry.data)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = Header {
            metadata: self.metadata.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|a| HeaderEntry {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                    dtype: a.data.dtype().to_string(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for a in &self.arrays {
            match &a.data {
                ArrayData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
                ArrayData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a weight archive (bad magic)".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for h in header.arrays {
            let n: usize = h.shape.iter().product();
            let data = match h.dtype.as_str() {
                "f32" => {
                    let mut buf = vec![0u8; n * 4];
                    r.read_exact(&mut buf)?;
                    ArrayData::F32(buf.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
                }
                "f64" => {
                    let mut buf = vec![0u8; n * 8];
                    r.read_exact(&mut buf)?;
                    ArrayData::F64(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
                }
                other => return Err(Error::Parse(format!("unknown dtype `{other}`"))),
            };
            arrays.push(NamedArray {
                name: h.name,
                shape: h.shape,
                data,
            });
        }
        Ok(Self {
            metadata: header.metadata,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
