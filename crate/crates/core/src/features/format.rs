//! `DASF` feature-cube files.
//!
//! Layout (little-endian): magic `DASF`, version u16, Z u16, bands u16,
//! frames u16, cube_count u64, then per cube: center_channel u32,
//! window_index u32, label u8 (0 non-leak, 1 leak, 255 unlabelled) and
//! `bands * frames * Z` f32 values in (band, frame, z) order.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{CubeLabel, FeatureCube};
use crate::error::{Error, Result};
use crate::fsio::{atomic_write, put_f32s};
use crate::scalar::Real;

pub const CUBE_MAGIC: &[u8; 4] = b"DASF";
pub const CUBE_VERSION: u16 = 1;
pub const CUBE_EXT: &str = "dasf";
const HEADER_LEN: u64 = 4 + 2 + 2 + 2 + 2 + 8;

pub fn write_cube_file<T: Real>(
    path: &Path,
    depth: usize,
    bands: usize,
    frames: usize,
    cubes: &[FeatureCube<T>],
) -> Result<()> {
    for c in cubes {
        if (c.depth, c.bands, c.frames) != (depth, bands, frames) || c.values.len() != depth * bands * frames {
            return Err(Error::shape(format!(
                "cube at window {} channel {} is {}x{}x{}, file is {bands}x{frames}x{depth}",
                c.window_index, c.center_channel, c.bands, c.frames, c.depth
            )));
        }
    }
    let dims: [u16; 3] = [depth, bands, frames].map(|v| u16::try_from(v).unwrap_or(u16::MAX));
    atomic_write(path, |w: &mut dyn Write| {
        w.write_all(CUBE_MAGIC)?;
        w.write_all(&CUBE_VERSION.to_le_bytes())?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&(cubes.len() as u64).to_le_bytes())?;
        let mut vals = Vec::new();
        for c in cubes {
            w.write_all(&(c.center_channel as u32).to_le_bytes())?;
            w.write_all(&(c.window_index as u32).to_le_bytes())?;
            w.write_all(&[CubeLabel::code(c.label)])?;
            vals.clear();
            vals.extend(c.values.iter().map(|v| v.as_f32()));
            put_f32s(w, &vals)?;
        }
        Ok(())
    })
}

/// Streaming reader; the header and total length are validated on open so a
/// truncated file fails before any cube is produced.
pub struct CubeFileReader {
    path: PathBuf,
    reader: BufReader<File>,
    pub depth: usize,
    pub bands: usize,
    pub frames: usize,
    pub count: u64,
    read: u64,
}

impl CubeFileReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let mut header = [0u8; HEADER_LEN as usize];
        reader
            .read_exact(&mut header)
            .map_err(|_| Error::format(path, format!("truncated: {len} bytes is shorter than the header")))?;
        if &header[..4] != CUBE_MAGIC {
            return Err(Error::format(path, "bad magic, expected DASF"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([header[o], header[o + 1]]);
        let version = u16_at(4);
        if version != CUBE_VERSION {
            return Err(Error::format(path, format!("unsupported cube file version {version}")));
        }
        let (depth, bands, frames) = (u16_at(6) as usize, u16_at(8) as usize, u16_at(10) as usize);
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let record = 9 + 4 * (depth * bands * frames) as u64;
        let expected = count.checked_mul(record).and_then(|v| v.checked_add(HEADER_LEN));
        if expected != Some(len) {
            return Err(Error::format(
                path,
                format!("length {len} does not match {count} cubes of {bands}x{frames}x{depth}"),
            ));
        }
        if depth == 0 || depth % 2 == 0 {
            return Err(Error::format(path, format!("invalid cube depth {depth}")));
        }
        Ok(CubeFileReader { path: path.to_path_buf(), reader, depth, bands, frames, count, read: 0 })
    }

    pub fn next_cube<T: Real>(&mut self) -> Result<Option<FeatureCube<T>>> {
        if self.read == self.count {
            return Ok(None);
        }
        let mut head = [0u8; 9];
        self.reader.read_exact(&mut head).map_err(|e| Error::io(&self.path, e))?;
        let center_channel = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
        let window_index = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let label = CubeLabel::from_code(head[8])
            .ok_or_else(|| Error::format(&self.path, format!("invalid label byte {}", head[8])))?;
        let n = self.depth * self.bands * self.frames;
        let mut raw = vec![0u8; 4 * n];
        self.reader.read_exact(&mut raw).map_err(|e| Error::io(&self.path, e))?;
        let mut values = Vec::with_capacity(n);
        for c in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(&self.path, "non-finite feature value"));
            }
            values.push(<T as Real>::from_f32(v));
        }
        self.read += 1;
        Ok(Some(FeatureCube {
            bands: self.bands,
            frames: self.frames,
            depth: self.depth,
            values,
            center_channel,
            window_index,
            label,
        }))
    }
}

pub fn read_cube_file<T: Real>(path: &Path) -> Result<Vec<FeatureCube<T>>> {
    let mut r = CubeFileReader::open(path)?;
    let mut out = Vec::with_capacity(r.count as usize);
    while let Some(c) = r.next_cube()? {
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubes(n: usize) -> Vec<FeatureCube<f32>> {
        (0..n)
            .map(|i| FeatureCube {
                bands: 2,
                frames: 3,
                depth: 3,
                values: (0..18).map(|j| (i * 100 + j) as f32 * 0.125 - 3.0).collect(),
                center_channel: i + 1,
                window_index: i / 2,
                label: [Some(CubeLabel::Leak), Some(CubeLabel::NonLeak), None][i % 3],
            })
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(vals in prop::collection::vec(-1e6f32..1e6, 18), ch in 0usize..1000, win in 0usize..1000) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.dasf");
            let cube = FeatureCube { bands: 2, frames: 3, depth: 3, values: vals, center_channel: ch, window_index: win, label: Some(CubeLabel::Leak) };
            write_cube_file(&path, 3, 2, 3, std::slice::from_ref(&cube)).unwrap();
            let back: Vec<FeatureCube<f32>> = read_cube_file(&path).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0], &cube);
        }
    }

    #[test]
    fn labels_and_order_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.dasf");
        let cs = cubes(5);
        write_cube_file(&path, 3, 2, 3, &cs).unwrap();
        assert_eq!(read_cube_file::<f32>(&path).unwrap(), cs);
    }

    #[test]
    fn truncation_and_bad_magic_rejected_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.dasf");
        write_cube_file(&path, 3, 2, 3, &cubes(4)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(CubeFileReader::open(&path), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[3] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(CubeFileReader::open(&path), Err(Error::Format { .. })));
        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(CubeFileReader::open(&path).is_err());
    }

    #[test]
    fn mismatched_cube_shapes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_cube_file(&dir.path().join("c.dasf"), 5, 2, 3, &cubes(1)).is_err());
    }
}
