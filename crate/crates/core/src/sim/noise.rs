use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Zero-mean Gaussian noise with amplitude response `gain(f)`, normalised to unit RMS.
///
/// The spectrum is drawn directly in the frequency domain with Hermitian
/// symmetry and inverted with a single FFT; the DC bin is left empty so the
/// mean is exactly zero. A gain that vanishes everywhere yields zeros.
pub fn shaped_noise(len: usize, sample_rate: f64, seed: u64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    if len < 2 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); len];
    let half = len / 2;
    for k in 1..=half {
        let f = k as f64 * sample_rate / len as f64;
        let g = gain(f);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if g == 0.0 {
            continue;
        }
        if len % 2 == 0 && k == half {
            spec[k] = Complex::new(g * re, 0.0);
        } else {
            spec[k] = Complex::new(g * re, g * im);
            spec[len - k] = spec[k].conj();
        }
    }
    FftPlanner::<f64>::new().plan_fft_inverse(len).process(&mut spec);
    let mut out: Vec<f64> = spec.into_iter().map(|c| c.re).collect();
    let power = out.iter().map(|v| v * v).sum::<f64>() / len as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}
