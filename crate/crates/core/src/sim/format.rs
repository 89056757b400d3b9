//! `DASR` recording files and their `.truth` sidecars.
//!
//! Recording layout (little-endian): magic `DASR`, version u16,
//! channel_count u32, sample_rate f64, channel_spacing f64,
//! samples_per_channel u64, then channel-major f32 samples.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{CaseTruth, DasConfig, DasRecording};
use crate::error::{Error, Result};
use crate::fsio::{atomic_write, atomic_write_text, put_f32s, read_file, read_text, Reader};

pub const RECORDING_MAGIC: &[u8; 4] = b"DASR";
pub const RECORDING_VERSION: u16 = 1;
pub const RECORDING_EXT: &str = "dasr";
pub const TRUTH_EXT: &str = "truth";

/// Writes the samples; geometry beyond channel count, rate and spacing is not stored.
pub fn write_recording(path: &Path, rec: &DasRecording) -> Result<()> {
    rec.validate()?;
    atomic_write(path, |w: &mut dyn Write| {
        w.write_all(RECORDING_MAGIC)?;
        w.write_all(&RECORDING_VERSION.to_le_bytes())?;
        w.write_all(&(rec.config.channel_count as u32).to_le_bytes())?;
        w.write_all(&rec.config.sampling_rate.to_le_bytes())?;
        w.write_all(&rec.config.channel_spacing.to_le_bytes())?;
        w.write_all(&(rec.samples_per_channel as u64).to_le_bytes())?;
        put_f32s(w, &rec.samples)
    })
}

/// Reads a recording; `template` supplies the fields the file does not carry
/// (spatial resolution, instrument noise).
pub fn read_recording(path: &Path, template: &DasConfig) -> Result<DasRecording> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(RECORDING_MAGIC)?;
    let version = r.u16()?;
    if version != RECORDING_VERSION {
        return Err(r.error(format!("unsupported recording version {version}")));
    }
    let channel_count = r.u32()? as usize;
    let sampling_rate = r.f64()?;
    let channel_spacing = r.f64()?;
    let samples_per_channel = usize::try_from(r.u64()?).map_err(|_| r.error("sample count overflow"))?;
    if !(sampling_rate.is_finite() && sampling_rate > 0.0 && channel_spacing.is_finite() && channel_spacing > 0.0) {
        return Err(r.error("non-positive sampling rate or channel spacing"));
    }
    let total = channel_count
        .checked_mul(samples_per_channel)
        .ok_or_else(|| r.error("sample count overflow"))?;
    let samples = r.f32s(total)?;
    r.finish()?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(r.error("recording contains non-finite samples"));
    }
    let config = DasConfig { sampling_rate, channel_spacing, channel_count, ..*template };
    Ok(DasRecording { config, samples_per_channel, samples, truth: None })
}

pub fn truth_path(recording: &Path) -> PathBuf {
    recording.with_extension(TRUTH_EXT)
}

pub fn write_truth(path: &Path, truth: &CaseTruth) -> Result<()> {
    let text = serde_json::to_string_pretty(truth).map_err(|e| Error::format(path, e.to_string()))?;
    atomic_write_text(path, &(text + "\n"))
}

pub fn read_truth(path: &Path) -> Result<CaseTruth> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, format!("invalid truth sidecar: {e}")))
}
