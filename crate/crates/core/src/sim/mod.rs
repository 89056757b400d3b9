//! Synthetic DAS testbed.
//!
//! The generator is phenomenological: it reproduces the statistical
//! structure a leak detector relies on rather than simulating the optics.
//!
//! * flow-induced background: zero-mean Gaussian noise with a one-pole
//!   low-pass envelope (corner 500 Hz, -20 dB/decade) and RMS
//!   `k_flow * q^2` (q in L/s), scaled by 1.5 at flange joints and 1.3 at
//!   elbows;
//! * leak jet: flat 200-4000 Hz noise whose amplitude decays as
//!   `A0 exp(-|x - x_leak| / lambda)` along the fibre, with
//!   `lambda = c_lambda * R` and `A0 = c_amp * R * rms_flow(q)`, where `R` is
//!   the leak-to-pipe Reynolds ratio;
//! * instrument: moving average over the gauge length plus white noise;
//! * optional short broadband bursts standing in for external perturbations.
//!
//! Every generator is a pure function of its parameters and seed.

mod dataset;
mod format;
mod noise;

pub use dataset::{build_dataset, default_cases, load_manifest, DatasetEntry, Manifest, MANIFEST_FILE};
pub use format::{read_recording, read_truth, write_recording, write_truth, RECORDING_EXT, TRUTH_EXT};
pub use noise::shaped_noise;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::hydraulics::{reynolds_pipe, reynolds_ratio, FlowState, LeakSpec, PipeSpec};
use crate::rng::{mix_seed, Stream};

/// Largest cube depth the feature stage supports.
pub const MAX_CUBE_DEPTH: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DasConfig {
    pub sampling_rate: f64,
    pub channel_spacing: f64,
    pub spatial_resolution: f64,
    pub channel_count: usize,
    pub instrument_noise_rms: f64,
}

impl Default for DasConfig {
    fn default() -> Self {
        DasConfig {
            sampling_rate: 10_000.0,
            channel_spacing: 0.8,
            spatial_resolution: 2.0,
            channel_count: 50,
            instrument_noise_rms: 0.01,
        }
    }
}

impl DasConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("sampling_rate", self.sampling_rate)?;
        ensure_positive("channel_spacing", self.channel_spacing)?;
        ensure_positive("spatial_resolution", self.spatial_resolution)?;
        ensure_finite("instrument_noise_rms", self.instrument_noise_rms)?;
        if self.spatial_resolution < self.channel_spacing {
            return Err(Error::domain("spatial resolution must be at least the channel spacing"));
        }
        if self.channel_count < MAX_CUBE_DEPTH {
            return Err(Error::domain(format!(
                "channel_count {} is below the largest cube depth {MAX_CUBE_DEPTH}",
                self.channel_count
            )));
        }
        if self.instrument_noise_rms < 0.0 {
            return Err(Error::domain("instrument noise RMS must be non-negative"));
        }
        Ok(())
    }

    pub fn channel_position(&self, channel: usize) -> f64 {
        channel as f64 * self.channel_spacing
    }

    /// Channel whose position is nearest to `position` (clamped to the fibre).
    pub fn nearest_channel(&self, position: f64) -> usize {
        let c = (position / self.channel_spacing).round();
        (c.max(0.0) as usize).min(self.channel_count - 1)
    }

    /// Channels averaged by the gauge length: `round(resolution / spacing) + 1`,
    /// halves rounded to even.
    pub fn gauge_window(&self) -> usize {
        (self.spatial_resolution / self.channel_spacing).round_ties_even() as usize + 1
    }
}

/// Calibration of the phenomenological signal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Flow-noise RMS per (L/s)^2.
    pub flow_gain: f64,
    pub flow_corner_hz: f64,
    /// Leak amplitude at the orifice per unit Reynolds ratio, relative to flow-noise RMS.
    pub leak_amplitude_gain: f64,
    /// Spatial decay length per unit Reynolds ratio (m).
    pub leak_decay_per_ratio: f64,
    pub leak_band_low_hz: f64,
    pub leak_band_high_hz: f64,
    pub flange_coupling: f64,
    pub elbow_coupling: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        SignalModel {
            flow_gain: 1.0,
            flow_corner_hz: 500.0,
            leak_amplitude_gain: 1.8,
            leak_decay_per_ratio: 0.3,
            leak_band_low_hz: 200.0,
            leak_band_high_hz: 4000.0,
            flange_coupling: 1.5,
            elbow_coupling: 1.3,
        }
    }
}

impl SignalModel {
    /// RMS of the flow-induced background on a plain straight-pipe channel.
    pub fn flow_rms(&self, q: f64) -> f64 {
        let lps = q * 1e3;
        self.flow_gain * lps * lps
    }

    pub fn coupling(&self, tag: PositionTag) -> f64 {
        match tag {
            PositionTag::FlangeJoint => self.flange_coupling,
            PositionTag::Elbow => self.elbow_coupling,
            PositionTag::StraightPipe | PositionTag::LeakOrifice => 1.0,
        }
    }

    pub fn decay_length(&self, re_ratio: f64) -> f64 {
        self.leak_decay_per_ratio * re_ratio
    }

    /// Leak amplitude at distance `distance` from the orifice.
    pub fn leak_envelope(&self, re_ratio: f64, q: f64, distance: f64) -> f64 {
        let lambda = self.decay_length(re_ratio);
        if lambda <= 0.0 {
            return 0.0;
        }
        self.leak_amplitude_gain * re_ratio * self.flow_rms(q) * (-distance.abs() / lambda).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionTag {
    StraightPipe,
    FlangeJoint,
    Elbow,
    LeakOrifice,
}

/// Fittings along the sensed section and the non-leak reference positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedLayout {
    pub flange_channels: Vec<usize>,
    pub elbow_channels: Vec<usize>,
    /// Straight-pipe channels used as non-leak references.
    pub straight_reference_channels: Vec<usize>,
    /// Leak orifice position (m), whether or not the leak valve is open.
    pub leak_position: f64,
}

impl Default for TestbedLayout {
    fn default() -> Self {
        TestbedLayout {
            flange_channels: vec![41],
            elbow_channels: vec![38, 45],
            straight_reference_channels: vec![36, 39, 43, 47],
            leak_position: 16.0,
        }
    }
}

impl TestbedLayout {
    /// Per-channel tags; the orifice channel is tagged only when a leak is open.
    pub fn tags(&self, config: &DasConfig, open_leak: Option<f64>) -> Vec<PositionTag> {
        let mut tags = vec![PositionTag::StraightPipe; config.channel_count];
        for &c in &self.flange_channels {
            if c < tags.len() {
                tags[c] = PositionTag::FlangeJoint;
            }
        }
        for &c in &self.elbow_channels {
            if c < tags.len() {
                tags[c] = PositionTag::Elbow;
            }
        }
        if let Some(position) = open_leak {
            tags[config.nearest_channel(position)] = PositionTag::LeakOrifice;
        }
        tags
    }

    /// The seven non-leak training positions, sorted.
    pub fn reference_channels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .flange_channels
            .iter()
            .chain(&self.elbow_channels)
            .chain(&self.straight_reference_channels)
            .copied()
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case_id: String,
    pub flow: FlowState,
    pub leak: Option<LeakSpec>,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

impl CaseSpec {
    pub fn validate(&self, pipe: &PipeSpec) -> Result<()> {
        if self.case_id.is_empty() || self.case_id.contains(['/', '\\']) {
            return Err(Error::domain(format!("invalid case id {:?}", self.case_id)));
        }
        self.flow.validate()?;
        ensure_positive("duration", self.duration)?;
        match (&self.leak, self.flow.leak_flow_rate > 0.0) {
            (Some(leak), true) => leak.validate(pipe),
            (None, false) => Ok(()),
            _ => Err(Error::domain(format!(
                "case {}: leak spec must be present exactly when the leak flow is positive",
                self.case_id
            ))),
        }
    }

    pub fn re_ratio(&self, pipe: &PipeSpec) -> Result<f64> {
        match &self.leak {
            Some(leak) => reynolds_ratio(pipe, &self.flow, leak.orifice_diameter),
            None => Ok(0.0),
        }
    }

    pub fn pipe_reynolds(&self, pipe: &PipeSpec) -> Result<f64> {
        reynolds_pipe(pipe, self.flow.pipe_flow_rate)
    }
}

/// Ground truth shipped alongside every recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub case: CaseSpec,
    pub leak_position_m: Option<f64>,
    pub leak_channel: Option<usize>,
    pub re_ratio: f64,
    pub position_tags: Vec<PositionTag>,
    pub reference_channels: Vec<usize>,
    pub channel_spacing: f64,
}

impl CaseTruth {
    pub fn is_leak(&self) -> bool {
        self.case.leak.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DasRecording {
    pub config: DasConfig,
    pub samples_per_channel: usize,
    /// Channel-major samples.
    pub samples: Vec<f32>,
    pub truth: Option<CaseTruth>,
}

impl DasRecording {
    pub fn zeros(config: DasConfig, samples_per_channel: usize) -> Self {
        DasRecording {
            config,
            samples_per_channel,
            samples: vec![0.0; config.channel_count * samples_per_channel],
            truth: None,
        }
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.samples[c * self.samples_per_channel..(c + 1) * self.samples_per_channel]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.samples_per_channel;
        &mut self.samples[c * n..(c + 1) * n]
    }

    pub fn duration(&self) -> f64 {
        self.samples_per_channel as f64 / self.config.sampling_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.config.channel_count * self.samples_per_channel {
            return Err(Error::shape(format!(
                "{} samples for {} channels x {}",
                self.samples.len(),
                self.config.channel_count,
                self.samples_per_channel
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }
}

/// Flow-induced background for one channel.
///
/// Returns exactly `len` samples with RMS `k_flow q^2 * coupling(tag)`; zero flow
/// gives an all-zero series.
pub fn synth_flow_noise(
    config: &DasConfig,
    model: &SignalModel,
    q: f64,
    tag: PositionTag,
    seed: u64,
    len: usize,
) -> Result<Vec<f64>> {
    ensure_finite("flow rate", q)?;
    if q < 0.0 {
        return Err(Error::domain("flow rate must be non-negative"));
    }
    let rms = model.flow_rms(q) * model.coupling(tag);
    if rms == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let corner = model.flow_corner_hz;
    let mut x = shaped_noise(len, config.sampling_rate, seed, |f| 1.0 / (1.0 + (f / corner).powi(2)).sqrt());
    x.iter_mut().for_each(|v| *v *= rms);
    Ok(x)
}

/// Leak-jet signature on every channel (`channel_count` series of `len` samples).
///
/// Channels whose envelope falls below `1e-9` of the peak stay exactly zero.
pub fn synth_leak_signature(
    config: &DasConfig,
    model: &SignalModel,
    pipe: &PipeSpec,
    leak: &LeakSpec,
    flow: &FlowState,
    seed: u64,
    len: usize,
) -> Result<Vec<Vec<f64>>> {
    let source = LeakSource::new(config, model, pipe, leak, flow, seed)?;
    Ok((0..config.channel_count).map(|c| source.channel(c, len).unwrap_or_else(|| vec![0.0; len])).collect())
}

struct LeakSource<'a> {
    config: &'a DasConfig,
    model: &'a SignalModel,
    ratio: f64,
    position: f64,
    pipe_flow: f64,
    seed: u64,
}

impl<'a> LeakSource<'a> {
    fn new(
        config: &'a DasConfig,
        model: &'a SignalModel,
        pipe: &PipeSpec,
        leak: &LeakSpec,
        flow: &FlowState,
        seed: u64,
    ) -> Result<Self> {
        leak.validate(pipe)?;
        flow.validate()?;
        let ratio = reynolds_ratio(pipe, flow, leak.orifice_diameter)?;
        Ok(LeakSource { config, model, ratio, position: leak.position, pipe_flow: flow.pipe_flow_rate, seed })
    }

    /// `None` when the channel lies beyond the envelope's reach.
    fn channel(&self, c: usize, len: usize) -> Option<Vec<f64>> {
        let peak = self.model.leak_envelope(self.ratio, self.pipe_flow, 0.0);
        let amp =
            self.model.leak_envelope(self.ratio, self.pipe_flow, self.config.channel_position(c) - self.position);
        if amp == 0.0 || amp <= peak * 1e-9 {
            return None;
        }
        let (lo, hi) = (self.model.leak_band_low_hz, self.model.leak_band_high_hz);
        let mut x = shaped_noise(len, self.config.sampling_rate, mix_seed(self.seed, Stream::Leak, c as u64), |f| {
            if f >= lo && f <= hi {
                1.0
            } else {
                0.0
            }
        });
        x.iter_mut().for_each(|v| *v *= amp);
        Some(x)
    }
}

/// Gauge-length averaging followed by white instrument noise.
///
/// The moving average renormalises at the fibre ends, so a spatially
/// constant field passes unchanged.
pub fn apply_instrument(config: &DasConfig, series: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    check_series(config, series)?;
    Ok((0..series.len()).map(|c| instrument_channel(config, series, c, seed)).collect())
}

fn check_series<T, S: AsRef<[T]>>(config: &DasConfig, series: &[S]) -> Result<()> {
    if series.len() != config.channel_count {
        return Err(Error::shape(format!(
            "{} channel series for a {}-channel configuration",
            series.len(),
            config.channel_count
        )));
    }
    let len = series.first().map_or(0, |s| s.as_ref().len());
    if series.iter().any(|s| s.as_ref().len() != len) {
        return Err(Error::shape("channel series differ in length"));
    }
    Ok(())
}

fn instrument_channel<T, S>(config: &DasConfig, series: &[S], c: usize, seed: u64) -> Vec<f64>
where
    T: Copy + Into<f64>,
    S: AsRef<[T]>,
{
    let w = config.gauge_window();
    let before = (w - 1) / 2;
    let after = w / 2;
    let n = series.len();
    let len = series[0].as_ref().len();
    let lo = c.saturating_sub(before);
    let hi = (c + after).min(n - 1);
    let inv = 1.0 / (hi - lo + 1) as f64;
    let mut acc = vec![0.0; len];
    for s in &series[lo..=hi] {
        for (a, &v) in acc.iter_mut().zip(s.as_ref()) {
            *a += v.into();
        }
    }
    acc.iter_mut().for_each(|a| *a *= inv);
    if config.instrument_noise_rms > 0.0 {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Instrument, c as u64));
        for a in acc.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *a += config.instrument_noise_rms * z;
        }
    }
    acc
}

/// Broadband burst confined to at most three neighbouring channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientBurst {
    pub center_channel: usize,
    pub start_sample: usize,
    /// `(channel, gain)` pairs; the waveform is scaled by each gain.
    pub channel_gains: Vec<(usize, f64)>,
    pub waveform: Vec<f64>,
}

impl TransientBurst {
    pub fn add_to(&self, rec: &mut DasRecording) -> Result<()> {
        if self.start_sample + self.waveform.len() > rec.samples_per_channel {
            return Err(Error::domain("burst extends past the end of the recording"));
        }
        for &(c, g) in &self.channel_gains {
            if c >= rec.config.channel_count {
                return Err(Error::domain(format!("burst channel {c} outside the recording")));
            }
            let dst = &mut rec.channel_mut(c)[self.start_sample..self.start_sample + self.waveform.len()];
            for (d, w) in dst.iter_mut().zip(&self.waveform) {
                *d += (g * w) as f32;
            }
        }
        Ok(())
    }
}

/// Short external perturbation at `position` spanning `[start, start + duration)`.
///
/// `recording_duration` bounds the burst; the waveform is white noise
/// under a Hann taper with RMS `amplitude` on the centre channel and half
/// that on each neighbour.
pub fn synth_transient(
    config: &DasConfig,
    recording_duration: f64,
    position: f64,
    start: f64,
    duration: f64,
    amplitude: f64,
    seed: u64,
) -> Result<TransientBurst> {
    ensure_positive("burst duration", duration)?;
    ensure_finite("burst amplitude", amplitude)?;
    ensure_finite("burst start", start)?;
    if duration > 5.0 {
        return Err(Error::domain(format!("burst duration {duration} s exceeds 5 s")));
    }
    let span = config.channel_position(config.channel_count - 1);
    if start < 0.0 || start + duration > recording_duration + 1e-9 || !(0.0..=span).contains(&position) {
        return Err(Error::domain(format!(
            "burst at {position} m, {start}..{} s lies outside the recording",
            start + duration
        )));
    }
    let fs = config.sampling_rate;
    let start_sample = (start * fs).round() as usize;
    let len = ((duration * fs).floor() as usize).min(((recording_duration * fs).round() as usize) - start_sample);
    let center = config.nearest_channel(position);
    let mut channel_gains = vec![(center, 1.0)];
    if center > 0 {
        channel_gains.insert(0, (center - 1, 0.5));
    }
    if center + 1 < config.channel_count {
        channel_gains.push((center + 1, 0.5));
    }
    let mut waveform = vec![0.0; len];
    if amplitude != 0.0 && len > 1 {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Transient, center as u64));
        // sqrt(8/3) restores unit RMS under the Hann taper.
        let norm = amplitude * (8.0f64 / 3.0).sqrt();
        for (i, w) in waveform.iter_mut().enumerate() {
            let taper = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos();
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = norm * taper * z;
        }
    }
    Ok(TransientBurst { center_channel: center, start_sample, channel_gains, waveform })
}

/// Full recording for one case.
pub fn simulate_case(
    case: &CaseSpec,
    config: &DasConfig,
    model: &SignalModel,
    pipe: &PipeSpec,
    layout: &TestbedLayout,
) -> Result<DasRecording> {
    config.validate()?;
    pipe.validate()?;
    case.validate(pipe)?;
    let len = (case.duration * config.sampling_rate).round() as usize;
    let tags = layout.tags(config, case.leak.map(|l| l.position));
    let leak_source = match &case.leak {
        Some(leak) => Some(LeakSource::new(config, model, pipe, leak, &case.flow, case.seed)?),
        None => None,
    };
    let mut channels: Vec<Vec<f32>> = Vec::with_capacity(config.channel_count);
    for (c, &tag) in tags.iter().enumerate() {
        let mut x = synth_flow_noise(
            config,
            model,
            case.flow.pipe_flow_rate,
            tag,
            mix_seed(case.seed, Stream::Flow, c as u64),
            len,
        )?;
        if let Some(leak) = leak_source.as_ref().and_then(|s| s.channel(c, len)) {
            x.iter_mut().zip(&leak).for_each(|(d, s)| *d += s);
        }
        channels.push(x.into_iter().map(|v| v as f32).collect());
    }
    let mut samples = Vec::with_capacity(config.channel_count * len);
    for c in 0..config.channel_count {
        samples.extend(instrument_channel(config, &channels, c, case.seed).into_iter().map(|v| v as f32));
    }
    drop(channels);
    let leak_position = case.leak.map(|l| l.position);
    let truth = CaseTruth {
        case: case.clone(),
        leak_position_m: leak_position,
        leak_channel: leak_position.map(|p| config.nearest_channel(p)),
        re_ratio: case.re_ratio(pipe)?,
        position_tags: tags,
        reference_channels: layout.reference_channels(),
        channel_spacing: config.channel_spacing,
    };
    let rec = DasRecording { config: *config, samples_per_channel: len, samples, truth: Some(truth) };
    rec.validate()?;
    Ok(rec)
}
