//! `KWSW` weight container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "KWSW" u16 version u16 count
//! count × { u16 name_len, name (UTF-8), u8 dtype, [i8 frac if dtype = 1],
//!           u32 rank, rank × u32 dim, payload }
//! ```
//!
//! dtype 0 is `f32` (4 bytes per element), dtype 1 is `i8` with a fixed-point
//! fraction length. Names are unique. Trailing bytes are rejected.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{param_layout, LayerParams, ModelWeights};
use crate::model::ModelSpec;

pub const MAGIC: &[u8; 4] = b"KWSW";
pub const VERSION: u16 = 1;
pub const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8 { frac: i8, data: Vec<i8> },
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I8 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let t = NamedTensor { name: name.into(), dims, data };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        if self.name.len() > u16::MAX as usize {
            return Err(Error::Format(format!("tensor name of {} bytes is too long", self.name.len())));
        }
        if self.dims.len() > MAX_RANK || self.dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format(format!("tensor {} has unsupported dims {:?}", self.name, self.dims)));
        }
        let n = element_count(&self.dims).ok_or_else(|| Error::Format(format!("tensor {} dims overflow", self.name)))?;
        if n != self.data.len() {
            return Err(Error::Format(format!(
                "tensor {}: dims {:?} need {n} values, got {}",
                self.name,
                self.dims,
                self.data.len()
            )));
        }
        Ok(())
    }
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d))
}

pub fn encode(tensors: &[NamedTensor]) -> Result<Vec<u8>> {
    let count = u16::try_from(tensors.len())
        .map_err(|_| Error::Format(format!("{} tensors exceed the container limit", tensors.len())))?;
    let mut names = HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for t in tensors {
        t.check()?;
        if !names.insert(t.name.as_str()) {
            return Err(Error::Format(format!("duplicate tensor name {}", t.name)));
        }
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        match &t.data {
            TensorData::F32(_) => out.push(0),
            TensorData::I8 { frac, .. } => {
                out.push(1);
                out.push(*frac as u8);
            }
        }
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &t.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::I8 { data, .. } => out.extend(data.iter().map(|&x| x as u8)),
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let rest = &self.buf[self.pos..];
        if rest.len() < n {
            return Err(Error::Format(format!("truncated container: {what} at byte {}", self.pos)));
        }
        self.pos += n;
        Ok(&rest[..n])
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("not a KWSW weight file (bad magic)".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported KWSW version {version}")));
    }
    let count = c.u16("tensor count")? as usize;
    let mut names = HashSet::new();
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        if !names.insert(name.clone()) {
            return Err(Error::Format(format!("duplicate tensor name {name}")));
        }
        let dtype = c.u8("dtype")?;
        let frac = match dtype {
            0 => None,
            1 => Some(c.u8("fraction length")? as i8),
            d => return Err(Error::Format(format!("tensor {name}: unknown dtype {d}"))),
        };
        let rank = c.u32("rank")? as usize;
        if rank > MAX_RANK {
            return Err(Error::Format(format!("tensor {name}: rank {rank} exceeds {MAX_RANK}")));
        }
        let dims = (0..rank).map(|_| c.u32("dim").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = element_count(&dims).ok_or_else(|| Error::Format(format!("tensor {name}: dims overflow")))?;
        let width = if frac.is_some() { 1 } else { 4 };
        let bytes = n.checked_mul(width).ok_or_else(|| Error::Format(format!("tensor {name}: size overflows")))?;
        let payload = c.take(bytes, "payload")?;
        let data = match frac {
            None => TensorData::F32(payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()),
            Some(frac) => TensorData::I8 { frac, data: payload.iter().map(|&b| b as i8).collect() },
        };
        tensors.push(NamedTensor { name, dims, data });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after last tensor", bytes.len() - c.pos)));
    }
    Ok(tensors)
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>> {
    decode(&fs::read(path)?)
}

pub fn write_container(path: impl AsRef<Path>, tensors: &[NamedTensor]) -> Result<()> {
    fs::write(path, encode(tensors)?)?;
    Ok(())
}

/// True when every tensor is stored as `i8`.
pub fn is_quantized(tensors: &[NamedTensor]) -> bool {
    !tensors.is_empty() && tensors.iter().all(|t| matches!(t.data, TensorData::I8 { .. }))
}

pub fn tensor_name(layer: usize, param: &str) -> String {
    format!("{layer}.{param}")
}

/// Serialises float weights as `"{layer}.{param}"` tensors.
pub fn float_weights_to_tensors(spec: &ModelSpec, weights: &ModelWeights<f32>) -> Result<Vec<NamedTensor>> {
    weights.check(spec)?;
    let mut out = Vec::new();
    for (i, ((params, layer), shape)) in weights.layers.iter().zip(spec.layers()).zip(spec.shapes()).enumerate() {
        for ((name, dims), (_, data)) in param_layout(layer, shape).into_iter().zip(params.tensors()) {
            out.push(NamedTensor::new(tensor_name(i, name), dims, TensorData::F32(data.to_vec()))?);
        }
    }
    Ok(out)
}

/// Looks up every tensor a model needs. Extra tensors are rejected.
pub(crate) fn collect_layers<T: Copy>(
    spec: &ModelSpec,
    tensors: &[NamedTensor],
    skip: impl Fn(&str) -> bool,
    mut convert: impl FnMut(&NamedTensor) -> Result<Vec<T>>,
) -> Result<ModelWeights<T>> {
    let mut used = 0;
    let mut layers = Vec::with_capacity(spec.layers().len());
    for (i, (layer, shape)) in spec.layers().iter().zip(spec.shapes()).enumerate() {
        let mut data = Vec::new();
        for (name, dims) in param_layout(layer, shape) {
            let full = tensor_name(i, name);
            let t = tensors
                .iter()
                .find(|t| t.name == full)
                .ok_or_else(|| Error::Format(format!("missing tensor {full}")))?;
            if t.dims != dims {
                return Err(Error::Format(format!("tensor {full}: dims {:?}, model needs {dims:?}", t.dims)));
            }
            data.push(convert(t)?);
            used += 1;
        }
        layers.push(LayerParams::assemble(layer, shape, data)?);
    }
    let extra = tensors.iter().filter(|t| !skip(&t.name)).count() - used;
    if extra > 0 {
        return Err(Error::Format(format!("{extra} tensors do not belong to this model")));
    }
    Ok(ModelWeights { layers })
}

pub fn float_weights_from_tensors(spec: &ModelSpec, tensors: &[NamedTensor]) -> Result<ModelWeights<f32>> {
    collect_layers(spec, tensors, |_| false, |t| match &t.data {
        TensorData::F32(v) => Ok(v.clone()),
        TensorData::I8 { .. } => Err(Error::Format(format!("tensor {} is 8-bit, expected float", t.name))),
    })
}
