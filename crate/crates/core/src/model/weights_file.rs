//! Flat binary tensor file: named, shaped, row-major little-endian `f64`.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"CKTW"
//! version u32 = 1
//! count   u32
//! count x {
//!     name_len u32, name [u8; name_len] (UTF-8)
//!     ndim     u32, dims [u64; ndim]
//!     values   [f64; product(dims)]
//! }
//! ```
//!
//! Tensors are written in name order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CKTW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    tensors: BTreeMap<String, ArrayD<f64>>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: ArrayD<f64>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn insert1(&mut self, name: impl Into<String>, t: &Array1<f64>) {
        self.insert(name, t.clone().into_dyn());
    }

    pub fn insert2(&mut self, name: impl Into<String>, t: &Array2<f64>) {
        self.insert(name, t.clone().into_dyn());
    }

    pub fn insert3(&mut self, name: impl Into<String>, t: &Array3<f64>) {
        self.insert(name, t.clone().into_dyn());
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("tensor {name}")))
    }

    pub fn get1(&self, name: &str) -> Result<Array1<f64>> {
        self.get(name)?
            .clone()
            .into_dimensionality()
            .map_err(|e| Error::shape(format!("{name}: {e}")))
    }

    pub fn get2(&self, name: &str) -> Result<Array2<f64>> {
        self.get(name)?
            .clone()
            .into_dimensionality()
            .map_err(|e| Error::shape(format!("{name}: {e}")))
    }

    pub fn get3(&self, name: &str) -> Result<Array3<f64>> {
        self.get(name)?
            .clone()
            .into_dimensionality()
            .map_err(|e| Error::shape(format!("{name}: {e}")))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, tensor) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(tensor.ndim() as u32).to_le_bytes())?;
            for &d in tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            // iter() walks in logical row-major order regardless of layout
            for v in tensor.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let io = |e| Error::io("tensor file", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::invalid("not a tensor file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::invalid(format!("unsupported tensor file version {version}")));
        }
        let count = read_u32(&mut r)?;
        let mut store = Self::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(io)?;
            let name = String::from_utf8(name).map_err(|_| Error::invalid("tensor name is not UTF-8"))?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(io)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw).map_err(io)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let tensor =
                ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::shape(format!("{name}: {e}")))?;
            if store.tensors.insert(name.clone(), tensor).is_some() {
                return Err(Error::invalid(format!("duplicate tensor {name}")));
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io("tensor file", e))?;
    Ok(u32::from_le_bytes(b))
}
