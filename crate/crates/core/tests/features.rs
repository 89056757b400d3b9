use std::f64::consts::PI;

use fiberleak::features::{stack_cubes, FeatureParams, MelExtractor, SpectrogramGrid, Stft};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// |X_k| by the textbook sum, with the Hann window applied first.
fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let windowed: Vec<f64> =
        frame.iter().enumerate().map(|(i, &x)| x * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in windowed.iter().enumerate() {
                // reduce k*i mod n so the angle stays exact
                let phase = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

fn worst_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1e-12)).fold(0.0, f64::max)
}

#[test]
fn single_frame_matches_direct_dft() {
    let stft = Stft::<f64>::new(2048, 512, true);
    for seed in 0..3 {
        let frame = random_signal(2048, seed);
        let err = worst_relative(&stft.frame_magnitudes(&frame), &dft_magnitudes(&frame));
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}

#[test]
fn single_precision_frame_stays_close() {
    let stft = Stft::<f32>::new(2048, 512, true);
    let frame = random_signal(2048, 9);
    let single: Vec<f32> = frame.iter().map(|&v| v as f32).collect();
    let fast: Vec<f64> = stft.frame_magnitudes(&single).iter().map(|&v| v as f64).collect();
    let reference = dft_magnitudes(&frame);
    let peak = reference.iter().cloned().fold(0.0, f64::max);
    let err = fast.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / peak;
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn every_clip_frame_matches_direct_dft() {
    let params = FeatureParams::default();
    let clip = random_signal(50_000, 4);
    let stft = Stft::<f64>::new(params.window_length, params.hop_length, true);
    let power = stft.power_frames(&clip);
    assert_eq!(power.len(), 98);
    let padded = stft.padded(&clip);
    // a handful of frames, including both padded edges
    for t in [0, 1, 48, 96, 97] {
        let start = t * params.hop_length;
        let reference = dft_magnitudes(&padded[start..start + params.window_length]);
        let mags: Vec<f64> = power[t].iter().map(|p| p.sqrt()).collect();
        assert!(worst_relative(&mags, &reference) < 1e-5, "frame {t}");
    }
}

#[test]
fn five_second_clip_gives_ninety_by_ninety_eight() {
    let params = FeatureParams::default();
    let ex = MelExtractor::<f32>::new(params, 10_000.0).unwrap();
    let clip: Vec<f32> = random_signal(50_000, 1).iter().map(|&v| v as f32).collect();
    let spec = ex.extract_f32(&clip, 0, 0).unwrap();
    assert_eq!((ex.bands(), ex.frames()), (90, 98));
    assert_eq!(spec.values.len(), 90 * 98);

    for z in [3, 5, 7, 9] {
        let channels = 11;
        let specs = (0..channels).map(|c| ex.extract_f32(&clip, c, 0).unwrap()).collect();
        let grid = SpectrogramGrid::from_spectrograms(1, channels, specs).unwrap();
        let cubes = stack_cubes(&grid, z).unwrap();
        assert_eq!(cubes.len(), channels - 2 * (z / 2));
        for cube in &cubes {
            assert_eq!((cube.bands, cube.frames, cube.depth), (90, 98, z));
            assert_eq!(cube.values.len(), 90 * 98 * z);
        }
    }
}
