//! Versioned single-file container for weights and training state.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   8 bytes  "GEOADAPT"
//! version u32
//! hlen    u64      byte length of the JSON header
//! header  hlen     {"meta": <any>, "arrays": [{"name","dtype","shape"}...]}
//! payload          array data in header order, f32 or f64
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GEOADAPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ArrayData {
    fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
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
struct ArrayHeader {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    arrays: Vec<ArrayHeader>,
}

/// In-memory checkpoint: free-form JSON metadata plus named arrays.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: ArrayData) {
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            data,
        });
    }

    /// Store every array of `params` under `prefix/`.
    pub fn push_params(&mut self, prefix: &str, params: &ParamSet<f32>) {
        for p in params.iter() {
            self.push(
                format!("{prefix}/{}", p.name),
                p.shape.clone(),
                ArrayData::F32(p.data.clone()),
            );
        }
    }

    pub fn array(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
    }

    pub fn f64_array(&self, name: &str) -> Result<&[f64]> {
        match &self.array(name)?.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::F32(_) => Err(Error::Checkpoint(format!("{name} is not f64"))),
        }
    }

    /// Overwrite `params` (whose layout defines what is read) from `prefix/`.
    pub fn load_params(&self, prefix: &str, params: &mut ParamSet<f32>) -> Result<()> {
        for p in params.iter_mut() {
            let name = format!("{prefix}/{}", p.name);
            let a = self.array(&name)?;
            if a.shape != p.shape {
                return Err(Error::Checkpoint(format!(
                    "{name}: stored shape {:?}, expected {:?}",
                    a.shape, p.shape
                )));
            }
            match &a.data {
                ArrayData::F32(v) => p.data.copy_from_slice(v),
                ArrayData::F64(_) => return Err(Error::Checkpoint(format!("{name} is not f32"))),
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|a| ArrayHeader {
                    name: a.name.clone(),
                    dtype: a.data.dtype().into(),
                    shape: a.shape.clone(),
                })
                .collect(),
        };
        let hjson = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(hjson.len() + 20);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(hjson.len() as u64).to_le_bytes());
        out.extend_from_slice(&hjson);
        for a in &self.arrays {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(Error::Checkpoint(format!("{}: shape/data mismatch", a.name)));
            }
            match &a.data {
                ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let hend = 20usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..hend])?;
        let mut pos = hend;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for h in header.arrays {
            let n: usize = h.shape.iter().product();
            let data = match h.dtype.as_str() {
                "f32" => {
                    let end = pos + 4 * n;
                    let raw = bytes.get(pos..end).ok_or_else(|| bad("truncated payload"))?;
                    pos = end;
                    ArrayData::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect())
                }
                "f64" => {
                    let end = pos + 8 * n;
                    let raw = bytes.get(pos..end).ok_or_else(|| bad("truncated payload"))?;
                    pos = end;
                    ArrayData::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect())
                }
                other => return Err(Error::Checkpoint(format!("unknown dtype {other}"))),
            };
            arrays.push(NamedArray {
                name: h.name,
                shape: h.shape,
                data,
            });
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self {
            meta: header.meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
