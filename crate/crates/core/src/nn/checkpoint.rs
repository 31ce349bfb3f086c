//! Binary checkpoint container: named f32 tensors plus a config text.

use std::collections::BTreeMap;
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::raster::atomic_write;

pub const MAGIC: &[u8; 4] = b"WCKP";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, Tensor<f32>>,
    pub config: String,
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let nb = name.as_bytes();
            if nb.len() > u16::MAX as usize || t.shape().len() > u8::MAX as usize {
                return Err(Error::Config(format!("tensor {name} not encodable")));
            }
            out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
            out.extend_from_slice(nb);
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: "bad checkpoint magic".into(),
            });
        }
        let count = r.u32()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let nl = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let at = r.pos;
            let name = String::from_utf8(r.take(nl)?.to_vec()).map_err(|_| Error::Format {
                offset: at as u64,
                msg: "tensor name is not utf-8".into(),
            })?;
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let at = r.pos;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format {
                offset: at as u64,
                msg: "tensor too large".into(),
            })?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if tensors.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(Error::Format {
                    offset: at as u64,
                    msg: format!("duplicate tensor {name}"),
                });
            }
        }
        let cl = r.u32()? as usize;
        let at = r.pos;
        let config = String::from_utf8(r.take(cl)?.to_vec()).map_err(|_| Error::Format {
            offset: at as u64,
            msg: "config text is not utf-8".into(),
        })?;
        if r.pos != bytes.len() {
            return Err(Error::Format {
                offset: r.pos as u64,
                msg: "trailing bytes after checkpoint".into(),
            });
        }
        Ok(Checkpoint { tensors, config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    /// Tensors whose names start with `prefix`, with the prefix removed.
    pub fn group(&self, prefix: &str) -> BTreeMap<String, Tensor<f32>> {
        self.tensors
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect()
    }

    pub fn insert_group(&mut self, prefix: &str, group: &BTreeMap<String, Tensor<f32>>) {
        for (k, v) in group {
            self.tensors.insert(format!("{prefix}{k}"), v.clone());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("truncated checkpoint, needed {n} more bytes"),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
