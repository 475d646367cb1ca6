//! `CMN1` parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     4 bytes   "CMN1"
//! count     u32       number of records
//! record*   count times:
//!   name_len  u32
//!   name      name_len bytes, UTF-8
//!   ndim      u32
//!   dims      ndim x u64
//!   data      product(dims) x f64 (IEEE-754, little-endian)
//! ```
//!
//! Records are written in lexical name order. A JSON sidecar (`<file>.json`)
//! carries the layer layout plus free-form metadata such as channel tags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::array::NumArray;
use crate::error::{NnError, Result};
use crate::params::ParamSet;

pub const MAGIC: &[u8; 4] = b"CMN1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub layout: Vec<LayoutEntry>,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl Sidecar {
    pub fn for_params(params: &ParamSet, meta: Map<String, Value>) -> Self {
        Self {
            format: "CMN1".into(),
            layout: params
                .layout()
                .into_iter()
                .map(|(name, shape)| LayoutEntry { name, shape })
                .collect(),
            meta,
        }
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(Value::as_str)
    }
}

pub fn encode(params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, arr) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(arr.ndim() as u32).to_le_bytes());
        for d in arr.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in arr.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| NnError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamSet> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::Format("bad magic, expected CMN1".into()));
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| NnError::Format(format!("parameter name is not UTF-8: {e}")))?
            .to_string();
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| NnError::Format("shape overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.insert(name, NumArray::new(shape, data)?)?;
    }
    if r.pos != bytes.len() {
        return Err(NnError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(params)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` and its `path.json` sidecar.
pub fn save(path: &Path, params: &ParamSet, meta: Map<String, Value>) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| NnError::io(path, e))?;
    let side = Sidecar::for_params(params, meta);
    let json = serde_json::to_string_pretty(&side).map_err(|e| NnError::Format(format!("sidecar encoding: {e}")))?;
    let sp = sidecar_path(path);
    fs::write(&sp, json + "\n").map_err(|e| NnError::io(sp, e))
}

pub fn load(path: &Path) -> Result<(ParamSet, Sidecar)> {
    let bytes = fs::read(path).map_err(|e| NnError::io(path, e))?;
    let params = decode(&bytes)?;
    let sp = sidecar_path(path);
    let text = fs::read_to_string(&sp).map_err(|e| NnError::io(&sp, e))?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|e| NnError::Format(format!("{}: {e}", sp.display())))?;
    let layout: Vec<(String, Vec<usize>)> = side.layout.iter().map(|e| (e.name.clone(), e.shape.clone())).collect();
    if layout != params.layout() {
        return Err(NnError::Format(format!(
            "{}: sidecar layout disagrees with container",
            sp.display()
        )));
    }
    Ok((params, side))
}
