//! `DASM` model checkpoints.
//!
//! Little-endian: magic `DASM`, version u16, variant u8, Z u16, dropout f64,
//! input extent 3 x u16, block count u16 and per block kernel 3 x u16,
//! channels u16, pool 3 x u16; dense count u16 and widths u16 each; seed u64;
//! record count u32; then per parameter: name length u16, name bytes,
//! rank u8, dims u32 x rank, f32 values.

use std::io::Write;
use std::path::Path;

use super::model::Model;
use super::spec::{ArchitectureSpec, ConvBlock, Variant};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fsio::{atomic_write, put_f32s, read_file, Reader};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DASM";
pub const CHECKPOINT_VERSION: u16 = 1;
pub const CHECKPOINT_EXT: &str = "dasm";

fn u16_of(v: usize, what: &str) -> std::io::Result<[u8; 2]> {
    u16::try_from(v)
        .map(u16::to_le_bytes)
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{what} {v} exceeds u16")))
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: &Path) -> Result<()> {
    let spec = &model.spec;
    atomic_write(path, |w: &mut dyn Write| {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[spec.variant.code()])?;
        w.write_all(&u16_of(spec.z, "Z")?)?;
        w.write_all(&spec.dropout.to_le_bytes())?;
        for v in spec.input {
            w.write_all(&u16_of(v, "input extent")?)?;
        }
        w.write_all(&u16_of(spec.blocks.len(), "block count")?)?;
        for b in &spec.blocks {
            for v in b.kernel.iter().chain([&b.channels]).chain(&b.pool) {
                w.write_all(&u16_of(*v, "layer size")?)?;
            }
        }
        w.write_all(&u16_of(spec.fc.len(), "dense count")?)?;
        for &v in &spec.fc {
            w.write_all(&u16_of(v, "dense width")?)?;
        }
        w.write_all(&model.seed.to_le_bytes())?;
        w.write_all(&(model.params().len() as u32).to_le_bytes())?;
        for p in model.params() {
            w.write_all(&u16_of(p.name.len(), "name length")?)?;
            w.write_all(p.name.as_bytes())?;
            w.write_all(&[p.value.rank() as u8])?;
            for &d in p.value.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let vals: Vec<f32> = p.value.data().iter().map(|v| v.as_f32()).collect();
            put_f32s(w, &vals)?;
        }
        Ok(())
    })
}

fn read_spec(r: &mut Reader<'_>) -> Result<ArchitectureSpec> {
    let code = r.u8()?;
    let variant = Variant::from_code(code).ok_or_else(|| r.error(format!("unknown network variant {code}")))?;
    let z = r.u16()? as usize;
    let dropout = r.f64()?;
    let input = [r.u16()? as usize, r.u16()? as usize, r.u16()? as usize];
    let n_blocks = r.u16()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let mut v = [0usize; 7];
        for x in &mut v {
            *x = r.u16()? as usize;
        }
        blocks.push(ConvBlock { kernel: [v[0], v[1], v[2]], channels: v[3], pool: [v[4], v[5], v[6]] });
    }
    let n_fc = r.u16()? as usize;
    let fc = (0..n_fc).map(|_| r.u16().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let spec = ArchitectureSpec { variant, z, input, blocks, dropout, fc };
    spec.validate().map_err(|e| r.error(format!("invalid architecture: {e}")))?;
    Ok(spec)
}

/// Loads a checkpoint; when `expected` is given the stored architecture must
/// equal it.
pub fn load_checkpoint<T: Real>(path: &Path, expected: Option<&ArchitectureSpec>) -> Result<Model<T>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.error(format!("unsupported checkpoint version {version}")));
    }
    let spec = read_spec(&mut r)?;
    if let Some(want) = expected {
        if want != &spec {
            return Err(Error::format(
                path,
                format!(
                    "checkpoint holds a {} network for Z={}, expected {} for Z={}",
                    spec.variant.name(),
                    spec.z,
                    want.variant.name(),
                    want.z
                ),
            ));
        }
    }
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.error("parameter name is not UTF-8"))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.error("tensor too large"))?;
        let vals = r.f32s(n)?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(r.error(format!("non-finite value in {name}")));
        }
        params.push((name, Tensor::new(shape, vals.into_iter().map(<T as Real>::from_f32).collect())?));
    }
    r.finish()?;
    Model::from_params(spec, seed, params).map_err(|e| Error::format(path, e.to_string()))
}
