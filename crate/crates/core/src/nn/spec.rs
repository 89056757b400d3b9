use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// 3x3 kernels on the centre channel of each cube.
    Cnn2d,
    /// 3x3x3 kernels over the whole cube.
    Cnn3d,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Cnn2d => 2,
            Variant::Cnn3d => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            2 => Some(Variant::Cnn2d),
            3 => Some(Variant::Cnn3d),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cnn2d => "2d",
            Variant::Cnn3d => "3d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2d" | "cnn2d" => Some(Variant::Cnn2d),
            "3d" | "cnn3d" => Some(Variant::Cnn3d),
            _ => None,
        }
    }
}

/// Conv -> max-pool -> batch-norm -> ReLU block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    /// Kernel extent along (band, frame, depth); odd, same padding.
    pub kernel: [usize; 3],
    pub channels: usize,
    /// Pooling window, equal to its stride.
    pub pool: [usize; 3],
}

/// Activation extent after a block: (band, frame, depth, channels).
pub type BlockShape = [usize; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub variant: Variant,
    /// Channels per feature cube the model is trained for.
    pub z: usize,
    /// Network input extent (band, frame, depth); depth is 1 for the 2D variant.
    pub input: [usize; 3],
    pub blocks: Vec<ConvBlock>,
    pub dropout: f64,
    /// Output widths of the dense layers; the last one is the class count.
    pub fc: Vec<usize>,
}

pub const DEFAULT_DROPOUT: f64 = 0.3;

impl ArchitectureSpec {
    /// Four-block network over `bands x frames x z` cubes with 16/32/64/128
    /// filters, then dense layers 128 -> 128 -> 64 -> 2.
    pub fn standard(variant: Variant, z: usize) -> Result<Self> {
        Self::for_input(variant, z, 90, 98)
    }

    pub fn for_input(variant: Variant, z: usize, bands: usize, frames: usize) -> Result<Self> {
        if z == 0 || z % 2 == 0 {
            return Err(Error::domain(format!("cube depth Z must be odd, got {z}")));
        }
        let (kd, depth, s, last) = match variant {
            Variant::Cnn3d => (3, z, if z == 3 { 1 } else { 2 }, 2),
            Variant::Cnn2d => (1, 1, 1, 1),
        };
        let block = |channels, pd| ConvBlock { kernel: [3, 3, kd], channels, pool: [2, 2, pd] };
        let spec = ArchitectureSpec {
            variant,
            z,
            input: [bands, frames, depth],
            blocks: vec![block(16, 1), block(32, s), block(64, 1), block(128, last)],
            dropout: DEFAULT_DROPOUT,
            fc: vec![128, 64, 2],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two-block miniature used for gradient checks and quick tests.
    pub fn shrunken(variant: Variant) -> Self {
        let (kd, depth, pd) = match variant {
            Variant::Cnn3d => (3, 3, 2),
            Variant::Cnn2d => (1, 1, 1),
        };
        ArchitectureSpec {
            variant,
            z: 3,
            input: [12, 12, depth],
            blocks: vec![
                ConvBlock { kernel: [3, 3, kd], channels: 2, pool: [2, 2, 1] },
                ConvBlock { kernel: [3, 3, kd], channels: 2, pool: [2, 2, pd] },
            ],
            dropout: DEFAULT_DROPOUT,
            fc: vec![4, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.fc.is_empty() {
            return Err(Error::domain("network needs at least one conv block and one dense layer"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::domain(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.fc.last() != Some(&2) {
            return Err(Error::domain("the output layer must have two classes"));
        }
        if self.fc.contains(&0) {
            return Err(Error::domain("dense layers need a positive width"));
        }
        let expected_depth = match self.variant {
            Variant::Cnn3d => self.z,
            Variant::Cnn2d => 1,
        };
        if self.input[2] != expected_depth {
            return Err(Error::domain(format!(
                "{} input depth must be {expected_depth}, got {}",
                self.variant.name(),
                self.input[2]
            )));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel.iter().any(|&k| k % 2 == 0) || b.channels == 0 || b.pool.contains(&0) {
                return Err(Error::domain(format!("block {} has an invalid kernel, width or pool", i + 1)));
            }
            if self.variant == Variant::Cnn2d && (b.kernel[2] != 1 || b.pool[2] != 1) {
                return Err(Error::domain("2d blocks cannot span the depth axis"));
            }
        }
        self.trace().map(|_| ())
    }

    /// Activation shape after every block; fails on a zero-sized axis.
    pub fn trace(&self) -> Result<Vec<BlockShape>> {
        let [mut h, mut w, mut d] = self.input;
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            h /= b.pool[0];
            w /= b.pool[1];
            d /= b.pool[2];
            if h == 0 || w == 0 || d == 0 {
                return Err(Error::domain(format!("pooling in block {} leaves a zero-sized axis", i + 1)));
            }
            out.push([h, w, d, b.channels]);
        }
        Ok(out)
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn feature_width(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.channels)
    }

    /// Dense layer (fan_in, fan_out) pairs.
    pub fn dense_dims(&self) -> Vec<(usize, usize)> {
        let mut prev = self.feature_width();
        self.fc
            .iter()
            .map(|&o| {
                let d = (prev, o);
                prev = o;
                d
            })
            .collect()
    }
}
