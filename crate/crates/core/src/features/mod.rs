//! Mel-spectrogram features.
//!
//! Per fibre channel the recording is cut into non-overlapping 5 s clips.
//! Each clip is Z-scored, transformed with a centred 2048-point STFT (hop
//! 512), mapped through a 128-band Mel filterbank on 0-5 kHz, compressed
//! with `ln(1 + P)`, truncated to the first 90 bands and Z-scored again.
//! Spectrograms of `Z` neighbouring channels are stacked into a
//! `90 x 98 x Z` cube.

mod format;
pub mod mel;

pub use format::{read_cube_file, write_cube_file, CubeFileReader, CUBE_EXT};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank, Stft};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::{CaseTruth, DasRecording};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Seconds.
    pub segment_length: f64,
    pub window_length: usize,
    pub hop_length: usize,
    pub mel_bands_total: usize,
    pub mel_bands_kept: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub center: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            segment_length: 5.0,
            window_length: 2048,
            hop_length: 512,
            mel_bands_total: 128,
            mel_bands_kept: 90,
            fmin: 0.0,
            fmax: 5000.0,
            center: true,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.segment_length > 0.0) {
            return Err(Error::domain("segment length must be positive"));
        }
        if self.hop_length == 0 || self.hop_length > self.window_length {
            return Err(Error::domain("hop length must be in 1..=window length"));
        }
        if self.mel_bands_kept == 0 || self.mel_bands_kept > self.mel_bands_total {
            return Err(Error::domain("kept Mel bands must be in 1..=total bands"));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= sample_rate / 2.0 + 1e-9) {
            return Err(Error::domain(format!(
                "frequency range {}..{} Hz invalid for {sample_rate} Hz sampling",
                self.fmin, self.fmax
            )));
        }
        Ok(())
    }

    pub fn segment_samples(&self, sample_rate: f64) -> usize {
        (self.segment_length * sample_rate).round() as usize
    }

    pub fn frame_count(&self, sample_rate: f64) -> usize {
        let n = self.segment_samples(sample_rate);
        if self.center {
            1 + n / self.hop_length
        } else if n < self.window_length {
            0
        } else {
            1 + (n - self.window_length) / self.hop_length
        }
    }
}

/// Z-score with a guarded denominator: constant input maps to zeros.
pub fn zscore<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd == 0.0 || sd <= 1e-12 * mean.abs() || !sd.is_finite() {
        return vec![T::zero(); n];
    }
    x.iter().map(|v| T::lit((v.as_f64() - mean) / sd)).collect()
}

/// One 5 s clip of one channel.
#[derive(Debug, Clone, Copy)]
pub struct Clip<'a> {
    pub channel: usize,
    pub window_index: usize,
    pub samples: &'a [f32],
}

/// Non-overlapping clips, window-major; a trailing partial segment is dropped.
pub fn segment<'a>(rec: &'a DasRecording, params: &FeatureParams) -> Result<Vec<Clip<'a>>> {
    if rec.samples_per_channel == 0 || rec.config.channel_count == 0 {
        return Err(Error::domain("recording is empty"));
    }
    let seg = params.segment_samples(rec.config.sampling_rate);
    if seg == 0 {
        return Err(Error::domain("segment shorter than one sample"));
    }
    let windows = rec.samples_per_channel / seg;
    let mut out = Vec::with_capacity(windows * rec.config.channel_count);
    for w in 0..windows {
        for c in 0..rec.config.channel_count {
            out.push(Clip { channel: c, window_index: w, samples: &rec.channel(c)[w * seg..(w + 1) * seg] });
        }
    }
    Ok(out)
}

/// Windows per channel for a recording of `samples` samples.
pub fn window_count(samples: usize, sample_rate: f64, params: &FeatureParams) -> usize {
    let seg = params.segment_samples(sample_rate);
    if seg == 0 {
        0
    } else {
        samples / seg
    }
}

/// Band-major `bands x frames` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram<T> {
    pub bands: usize,
    pub frames: usize,
    pub values: Vec<T>,
    pub source_channel: usize,
    pub window_index: usize,
}

impl<T: Real> MelSpectrogram<T> {
    pub fn at(&self, band: usize, frame: usize) -> T {
        self.values[band * self.frames + frame]
    }
}

/// Reusable per-thread feature pipeline.
#[derive(Clone)]
pub struct MelExtractor<T: Real> {
    pub params: FeatureParams,
    pub sample_rate: f64,
    stft: Stft<T>,
    filterbank: MelFilterbank<T>,
}

impl<T: Real> MelExtractor<T> {
    pub fn new(params: FeatureParams, sample_rate: f64) -> Result<Self> {
        params.validate(sample_rate)?;
        Ok(MelExtractor {
            params,
            sample_rate,
            stft: Stft::new(params.window_length, params.hop_length, params.center),
            filterbank: MelFilterbank::new(params.mel_bands_total, params.window_length, sample_rate, params.fmin, params.fmax),
        })
    }

    pub fn stft(&self) -> &Stft<T> {
        &self.stft
    }

    pub fn filterbank(&self) -> &MelFilterbank<T> {
        &self.filterbank
    }

    pub fn frames(&self) -> usize {
        self.params.frame_count(self.sample_rate)
    }

    pub fn bands(&self) -> usize {
        self.params.mel_bands_kept
    }

    /// Log-Mel matrix of one clip before the final Z-score.
    pub fn log_mel(&self, clip: &[T]) -> Result<Vec<T>> {
        let want = self.params.segment_samples(self.sample_rate);
        if clip.len() != want {
            return Err(Error::domain(format!("clip has {} samples, expected {want}", clip.len())));
        }
        let normalized = zscore(clip);
        let power = self.stft.power_frames(&normalized);
        let (bands, frames) = (self.bands(), power.len());
        let mut all = vec![T::zero(); self.params.mel_bands_total];
        let mut out = vec![T::zero(); bands * frames];
        for (t, p) in power.iter().enumerate() {
            self.filterbank.apply(p, &mut all);
            for b in 0..bands {
                out[b * frames + t] = all[b].ln_1p();
            }
        }
        Ok(out)
    }

    pub fn extract(&self, clip: &[T], source_channel: usize, window_index: usize) -> Result<MelSpectrogram<T>> {
        let values = zscore(&self.log_mel(clip)?);
        Ok(MelSpectrogram { bands: self.bands(), frames: self.frames(), values, source_channel, window_index })
    }

    pub fn extract_f32(&self, clip: &[f32], source_channel: usize, window_index: usize) -> Result<MelSpectrogram<T>> {
        let converted: Vec<T> = clip.iter().map(|&v| <T as Real>::from_f32(v)).collect();
        self.extract(&converted, source_channel, window_index)
    }
}

/// Spectrograms of every (window, channel) of one recording.
#[derive(Debug, Clone)]
pub struct SpectrogramGrid<T> {
    pub windows: usize,
    pub channels: usize,
    pub bands: usize,
    pub frames: usize,
    /// `[window][channel]` flattened; each entry `bands * frames`.
    mats: Vec<Vec<T>>,
}

impl<T: Real> SpectrogramGrid<T> {
    pub fn from_recording(rec: &DasRecording, extractor: &MelExtractor<T>) -> Result<Self> {
        Self::from_recording_windows(rec, extractor, None)
    }

    /// Only the listed windows are computed; others hold empty matrices.
    pub fn from_recording_windows(
        rec: &DasRecording,
        extractor: &MelExtractor<T>,
        only: Option<&[usize]>,
    ) -> Result<Self> {
        if (rec.config.sampling_rate - extractor.sample_rate).abs() > 1e-9 {
            return Err(Error::domain("recording and extractor sampling rates differ"));
        }
        let clips = segment(rec, &extractor.params)?;
        let windows = window_count(rec.samples_per_channel, rec.config.sampling_rate, &extractor.params);
        let mut mats = Vec::with_capacity(clips.len());
        for clip in &clips {
            if only.is_some_and(|w| !w.contains(&clip.window_index)) {
                mats.push(Vec::new());
                continue;
            }
            mats.push(extractor.extract_f32(clip.samples, clip.channel, clip.window_index)?.values);
        }
        Ok(SpectrogramGrid {
            windows,
            channels: rec.config.channel_count,
            bands: extractor.bands(),
            frames: extractor.frames(),
            mats,
        })
    }

    pub fn from_spectrograms(windows: usize, channels: usize, specs: Vec<MelSpectrogram<T>>) -> Result<Self> {
        if specs.len() != windows * channels {
            return Err(Error::shape(format!("{} spectrograms for {windows}x{channels} grid", specs.len())));
        }
        let (bands, frames) = specs.first().map_or((0, 0), |s| (s.bands, s.frames));
        let mut mats = vec![Vec::new(); windows * channels];
        for s in specs {
            if s.window_index >= windows || s.source_channel >= channels || s.bands != bands || s.frames != frames {
                return Err(Error::shape("spectrogram does not fit the grid"));
            }
            mats[s.window_index * channels + s.source_channel] = s.values;
        }
        Ok(SpectrogramGrid { windows, channels, bands, frames, mats })
    }

    pub fn get(&self, window: usize, channel: usize) -> &[T] {
        &self.mats[window * self.channels + channel]
    }

    pub fn is_computed(&self, window: usize) -> bool {
        self.mats[window * self.channels..(window + 1) * self.channels].iter().all(|m| !m.is_empty())
    }

    /// Centre channels that have a full neighbourhood for depth `z`.
    pub fn scored_channels(&self, z: usize) -> std::ops::Range<usize> {
        let half = z / 2;
        half..self.channels.saturating_sub(half).max(half)
    }

    /// Writes the `(band, frame, z)` cube centred on `center` into `out`.
    pub fn fill_cube(&self, window: usize, center: usize, z: usize, out: &mut [T]) -> Result<()> {
        check_depth(z, self.channels)?;
        let half = z / 2;
        if center < half || center + half >= self.channels {
            return Err(Error::domain(format!("channel {center} lacks a full depth-{z} neighbourhood")));
        }
        let plane = self.bands * self.frames;
        if out.len() != plane * z {
            return Err(Error::shape("cube buffer has wrong size"));
        }
        for d in 0..z {
            let src = self.get(window, center + d - half);
            if src.len() != plane {
                return Err(Error::domain(format!("window {window} was not computed")));
            }
            for (i, &v) in src.iter().enumerate() {
                out[i * z + d] = v;
            }
        }
        Ok(())
    }

    pub fn cube(&self, window: usize, center: usize, z: usize) -> Result<FeatureCube<T>> {
        let mut values = vec![T::zero(); self.bands * self.frames * z];
        self.fill_cube(window, center, z, &mut values)?;
        Ok(FeatureCube {
            bands: self.bands,
            frames: self.frames,
            depth: z,
            values,
            center_channel: center,
            window_index: window,
            label: None,
        })
    }
}

pub(crate) fn check_depth(z: usize, channels: usize) -> Result<()> {
    if z == 0 || z % 2 == 0 {
        return Err(Error::domain(format!("cube depth must be odd, got {z}")));
    }
    if z > channels {
        return Err(Error::domain(format!("cube depth {z} exceeds {channels} channels")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CubeLabel {
    NonLeak,
    Leak,
}

impl CubeLabel {
    pub fn code(label: Option<CubeLabel>) -> u8 {
        match label {
            Some(CubeLabel::NonLeak) => 0,
            Some(CubeLabel::Leak) => 1,
            None => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Option<CubeLabel>> {
        match code {
            0 => Some(Some(CubeLabel::NonLeak)),
            1 => Some(Some(CubeLabel::Leak)),
            255 => Some(None),
            _ => None,
        }
    }

    pub fn class_index(self) -> usize {
        match self {
            CubeLabel::NonLeak => 0,
            CubeLabel::Leak => 1,
        }
    }
}

/// `(band, frame, z)`-ordered stack of neighbouring spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCube<T> {
    pub bands: usize,
    pub frames: usize,
    pub depth: usize,
    pub values: Vec<T>,
    pub center_channel: usize,
    pub window_index: usize,
    pub label: Option<CubeLabel>,
}

impl<T: Real> FeatureCube<T> {
    pub fn at(&self, band: usize, frame: usize, z: usize) -> T {
        self.values[(band * self.frames + frame) * self.depth + z]
    }
}

/// Every cube of the grid, ordered by (window, channel); edge channels are skipped.
pub fn stack_cubes<T: Real>(grid: &SpectrogramGrid<T>, z: usize) -> Result<Vec<FeatureCube<T>>> {
    check_depth(z, grid.channels)?;
    let mut out = Vec::new();
    for w in 0..grid.windows {
        if !grid.is_computed(w) {
            continue;
        }
        for c in grid.scored_channels(z) {
            out.push(grid.cube(w, c, z)?);
        }
    }
    Ok(out)
}

/// Default half-width of the leak label around the orifice (m).
pub const DEFAULT_LEAK_HALO: f64 = 1.0;

/// Ground-truth label of a cube centred on `center`.
///
/// Leak iff the case leaks and the centre lies within `halo` metres of the
/// orifice; the channel nearest the orifice is always a leak channel.
pub fn cube_label(truth: &CaseTruth, center: usize, halo: f64) -> CubeLabel {
    match (truth.leak_position_m, truth.leak_channel) {
        (Some(pos), Some(nearest)) => {
            let x = center as f64 * truth.channel_spacing;
            if center == nearest || (x - pos).abs() <= halo + 1e-9 {
                CubeLabel::Leak
            } else {
                CubeLabel::NonLeak
            }
        }
        _ => CubeLabel::NonLeak,
    }
}

/// Whether a cube is eligible as training data: leak-labelled cubes and
/// non-leak cubes at the reference positions.
pub fn is_training_position(truth: &CaseTruth, center: usize, halo: f64) -> bool {
    cube_label(truth, center, halo) == CubeLabel::Leak || truth.reference_channels.contains(&center)
}

/// Attaches ground-truth labels to every cube.
pub fn label_cubes<T: Real>(cubes: &mut [FeatureCube<T>], truth: &CaseTruth, halo: f64) {
    for c in cubes {
        c.label = Some(cube_label(truth, c.center_channel, halo));
    }
}

/// Labelled cubes restricted to training positions.
pub fn training_cubes<T: Real>(cubes: Vec<FeatureCube<T>>, truth: &CaseTruth, halo: f64) -> Vec<FeatureCube<T>> {
    cubes
        .into_iter()
        .filter(|c| is_training_position(truth, c.center_channel, halo))
        .map(|mut c| {
            c.label = Some(cube_label(truth, c.center_channel, halo));
            c
        })
        .collect()
}
