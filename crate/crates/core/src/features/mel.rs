//! STFT and Mel filterbank.
//!
//! Mel scale: `mel(f) = 2595 log10(1 + f / 700)`. Band `m` of `M` is a
//! triangle on Hz with corners `f[m], f[m+1], f[m+2]`, where `f[i]` are
//! `M + 2` points equally spaced in Mel between `fmin` and `fmax`. Each
//! triangle is area-normalised by `2 / (f[m+2] - f[m])`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Sparse triangular filterbank over the one-sided spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    pub bands: usize,
    pub bins: usize,
    /// `(first_bin, weights)` per band.
    filters: Vec<(usize, Vec<T>)>,
    /// Corner frequencies, `bands + 2` entries.
    pub corners_hz: Vec<f64>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn new(bands: usize, n_fft: usize, sample_rate: f64, fmin: f64, fmax: f64) -> Self {
        let bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let corners_hz: Vec<f64> =
            (0..bands + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64)).collect();
        let bin_hz = sample_rate / n_fft as f64;
        let filters = (0..bands)
            .map(|m| {
                let (left, center, right) = (corners_hz[m], corners_hz[m + 1], corners_hz[m + 2]);
                let norm = 2.0 / (right - left);
                let weights: Vec<(usize, f64)> = (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = ((f - left) / (center - left)).min((right - f) / (right - center));
                        (w > 0.0).then_some((k, w * norm))
                    })
                    .collect();
                let first = weights.first().map_or(0, |w| w.0);
                debug_assert!(weights.windows(2).all(|p| p[1].0 == p[0].0 + 1));
                (first, weights.into_iter().map(|(_, w)| T::lit(w)).collect())
            })
            .collect();
        MelFilterbank { bands, bins, filters, corners_hz }
    }

    pub fn center_hz(&self, band: usize) -> f64 {
        self.corners_hz[band + 1]
    }

    /// Weight of `band` at FFT bin `bin`.
    pub fn weight(&self, band: usize, bin: usize) -> T {
        let (first, w) = &self.filters[band];
        if bin < *first || bin >= first + w.len() {
            T::zero()
        } else {
            w[bin - first]
        }
    }

    /// `out[m] = sum_k W[m, k] power[k]` for the first `out.len()` bands.
    pub fn apply(&self, power: &[T], out: &mut [T]) {
        for (o, (first, w)) in out.iter_mut().zip(&self.filters) {
            *o = w.iter().zip(&power[*first..]).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// Short-time Fourier transform with a periodic Hann window and optional
/// reflect padding of `n_fft / 2` on both sides.
#[derive(Clone)]
pub struct Stft<T: Real> {
    pub n_fft: usize,
    pub hop: usize,
    pub center: bool,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> Stft<T> {
    pub fn new(n_fft: usize, hop: usize, center: bool) -> Self {
        let window = (0..n_fft)
            .map(|n| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / n_fft as f64).cos()))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Stft { n_fft, hop, center, window, fft }
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        let padded = if self.center { len + self.n_fft } else { len };
        if padded < self.n_fft {
            0
        } else {
            1 + (padded - self.n_fft) / self.hop
        }
    }

    /// Reflect-padded (when centred) copy of the signal.
    pub fn padded(&self, x: &[T]) -> Vec<T> {
        if !self.center {
            return x.to_vec();
        }
        let pad = self.n_fft / 2;
        let n = x.len();
        let reflect = |i: isize| -> T {
            // numpy "reflect": mirror without repeating the edge sample
            let mut j = i;
            let period = 2 * (n as isize - 1).max(1);
            j = j.rem_euclid(period);
            if j >= n as isize {
                j = period - j;
            }
            x[j as usize]
        };
        (0..n + 2 * pad).map(|i| reflect(i as isize - pad as isize)).collect()
    }

    /// One-sided power spectrum `|X_k|^2`, `k = 0..=n_fft/2`, of every frame;
    /// frame-major.
    pub fn power_frames(&self, x: &[T]) -> Vec<Vec<T>> {
        let padded = self.padded(x);
        let frames = self.frame_count(x.len());
        let bins = self.n_fft / 2 + 1;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        (0..frames)
            .map(|t| {
                let start = t * self.hop;
                for ((b, &s), &w) in buf.iter_mut().zip(&padded[start..start + self.n_fft]).zip(&self.window) {
                    *b = Complex::new(s * w, T::zero());
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                buf[..bins].iter().map(|c| c.norm_sqr()).collect()
            })
            .collect()
    }

    /// Magnitudes `|X_k|` of a single already-extracted frame.
    pub fn frame_magnitudes(&self, frame: &[T]) -> Vec<T> {
        assert_eq!(frame.len(), self.n_fft);
        let mut buf: Vec<Complex<T>> =
            frame.iter().zip(&self.window).map(|(&s, &w)| Complex::new(s * w, T::zero())).collect();
        self.fft.process(&mut buf);
        buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm()).collect()
    }
}
