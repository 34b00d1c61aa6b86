//! Binary checkpoints.
//!
//! Layout (little-endian): `"DDET"`, u32 version 1, u32 tensor count, then per
//! tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32, 1 = f64), u8 rank,
//! rank x u64 dims, raw values.

use std::collections::BTreeMap;
use std::path::Path;

use ddet_core::model::Params;
use ddet_core::optim::SgdState;
use ddet_core::scalar::DType;
use ddet_core::tensor::Tensor;

use crate::error::{Error, IoContext, Result};

pub const MAGIC: &[u8; 4] = b"DDET";
pub const VERSION: u32 = 1;

const STEP: &str = "sgd/step";
const VELOCITY: &str = "sgd/velocity/";

#[derive(Debug, Clone, PartialEq)]
pub enum Stored {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl Stored {
    fn shape(&self) -> &[usize] {
        match self {
            Stored::F32(t) => t.shape(),
            Stored::F64(t) => t.shape(),
        }
    }

    pub fn to_f32(&self) -> Tensor<f32> {
        match self {
            Stored::F32(t) => t.clone(),
            Stored::F64(t) => t.cast(),
        }
    }
}

/// Named tensors in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Stored)>,
}

fn short(what: &str) -> Error {
    Error::Checkpoint(format!("truncated while reading {what}"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| short(what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let len =
                u16::try_from(name.len()).map_err(|_| Error::Checkpoint(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let dtype = match t {
                Stored::F32(_) => DType::F32,
                Stored::F64(_) => DType::F64,
            };
            out.push(dtype as u8);
            let shape = t.shape();
            out.push(u8::try_from(shape.len()).map_err(|_| Error::Checkpoint(format!("rank too large for {name}")))?);
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match t {
                Stored::F32(t) => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                Stored::F64(t) => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Checkpoint("bad magic, expected DDET".into()));
        }
        let version = u32::from_le_bytes(r.array("version")?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(r.array("tensor count")?);
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = u16::from_le_bytes(r.array("name length")?) as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let [dtype] = r.array::<1>("dtype")?;
            let dtype = DType::from_byte(dtype)
                .ok_or_else(|| Error::Checkpoint(format!("unknown dtype {dtype} for {name}")))?;
            let [rank] = r.array::<1>("rank")?;
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(r.array("dims")?) as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("shape of {name} overflows")))?;
            let raw = r.take(n.checked_mul(dtype.size()).ok_or_else(|| short("values"))?, "values")?;
            let t = match dtype {
                DType::F32 => Stored::F32(Tensor::new(
                    shape,
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )?),
                DType::F64 => Stored::F64(Tensor::new(
                    shape,
                    raw.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )?),
            };
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).at(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path).at(path)?)
    }

    /// Parameters plus, for resuming, the optimizer state and step count.
    pub fn from_training(params: &Params<f32>, state: Option<(&SgdState<f32>, usize)>) -> Self {
        let mut tensors: Vec<(String, Stored)> = params
            .tensors
            .iter()
            .map(|(k, v)| (k.clone(), Stored::F32(v.clone())))
            .collect();
        if let Some((state, step)) = state {
            tensors.push((STEP.into(), Stored::F64(Tensor::scalar(step as f64))));
            for (k, v) in &state.velocity {
                tensors.push((format!("{VELOCITY}{k}"), Stored::F32(v.clone())));
            }
        }
        Checkpoint { tensors }
    }

    pub fn params(&self) -> Params<f32> {
        let tensors = self
            .tensors
            .iter()
            .filter(|(k, _)| !k.starts_with("sgd/"))
            .map(|(k, v)| (k.clone(), v.to_f32()))
            .collect();
        Params { tensors }
    }

    /// Optimizer state and completed steps, if the checkpoint carries them.
    pub fn training_state(&self) -> Option<(SgdState<f32>, usize)> {
        let step = self.tensors.iter().find(|(k, _)| k == STEP)?;
        let step = match &step.1 {
            Stored::F64(t) => t.data()[0],
            Stored::F32(t) => t.data()[0] as f64,
        } as usize;
        let velocity: BTreeMap<String, Tensor<f32>> = self
            .tensors
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(VELOCITY).map(|k| (k.to_string(), v.to_f32())))
            .collect();
        Some((SgdState { velocity }, step))
    }
}
