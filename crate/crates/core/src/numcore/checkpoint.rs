//! Binary checkpoint: magic, config hash, seed, then named tensors.
//!
//! ```text
//! "LGRCKPT1"
//! u32 hash_len, hash bytes (utf-8)
//! u64 seed
//! u32 tensor_count
//! per tensor: u32 name_len, name, u32 ndim, u64 dims..., f64 data... (all LE)
//! ```

use std::io::{Read, Write};

use super::params::ParamSet;
use super::tensor::Tensor;
use super::NumError;

const MAGIC: &[u8; 8] = b"LGRCKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub seed: u64,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, config_hash: impl Into<String>, seed: u64) -> Checkpoint {
        Checkpoint {
            config_hash: config_hash.into(),
            seed,
            tensors: params.iter().map(|(_, n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    /// Copies every tensor into `params` by name. The hash must match and
    /// every parameter must be present with its registered shape.
    pub fn restore_into(&self, params: &mut ParamSet, expected_hash: &str) -> Result<(), NumError> {
        if self.config_hash != expected_hash {
            return Err(NumError::ConfigMismatch { expected: expected_hash.into(), found: self.config_hash.clone() });
        }
        for id in params.ids().collect::<Vec<_>>() {
            let name = params.name(id).to_string();
            let (_, t) = self
                .tensors
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| NumError::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != params.get(id).shape() {
                return Err(NumError::Shape(format!("{name}: checkpoint {:?} vs model {:?}", t.shape(), params.get(id).shape())));
            }
            *params.get_mut(id) = t.clone();
        }
        Ok(())
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<(), NumError> {
    w.write_all(MAGIC)?;
    write_str(&mut w, &ck.config_hash)?;
    w.write_all(&ck.seed.to_le_bytes())?;
    w.write_all(&(ck.tensors.len() as u32).to_le_bytes())?;
    for (name, t) in &ck.tensors {
        write_str(&mut w, name)?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, NumError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NumError::Checkpoint("bad magic".into()));
    }
    let config_hash = read_str(&mut r)?;
    let seed = read_u64(&mut r)?;
    let count = read_u32(&mut r)?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name = read_str(&mut r)?;
        let ndim = read_u32(&mut r)?;
        if ndim > 8 {
            return Err(NumError::Checkpoint(format!("{name}: rank {ndim}")));
        }
        let shape = (0..ndim).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    Ok(Checkpoint { config_hash, seed, tensors })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, NumError> {
    let n = read_u32(r)? as usize;
    if n > 1 << 20 {
        return Err(NumError::Checkpoint(format!("string length {n}")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| NumError::Checkpoint(e.to_string()))
}
