//! Channels-last layer kernels. A sample is `[h, w, d, c]` row-major; a batch
//! stacks samples contiguously.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{mix_seed, Stream};
use crate::scalar::Real;

use super::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Unfolds one sample into `(h*w*d) x (kh*kw*kd*c)` patches with zero
/// "same" padding.
pub(crate) fn im2col<T: Real>(x: &[T], dims: [usize; 3], c: usize, k: [usize; 3], col: &mut [T]) {
    let [h, w, d] = dims;
    let [kh, kw, kd] = k;
    let (ph, pw, pd) = ((kh / 2) as isize, (kw / 2) as isize, (kd / 2) as isize);
    let kk = kh * kw * kd * c;
    debug_assert_eq!(col.len(), h * w * d * kk);
    let mut row = 0;
    for oh in 0..h as isize {
        for ow in 0..w as isize {
            for od in 0..d as isize {
                let dst = &mut col[row * kk..(row + 1) * kk];
                let mut o = 0;
                for dh in 0..kh as isize {
                    let ih = oh + dh - ph;
                    if ih < 0 || ih >= h as isize {
                        dst[o..o + kw * kd * c].fill(T::zero());
                        o += kw * kd * c;
                        continue;
                    }
                    for dw in 0..kw as isize {
                        let iw = ow + dw - pw;
                        if iw < 0 || iw >= w as isize {
                            dst[o..o + kd * c].fill(T::zero());
                            o += kd * c;
                            continue;
                        }
                        let base = (ih as usize * w + iw as usize) * d;
                        let lo = od - pd;
                        if lo >= 0 && lo + kd as isize <= d as isize {
                            let s = (base + lo as usize) * c;
                            dst[o..o + kd * c].copy_from_slice(&x[s..s + kd * c]);
                            o += kd * c;
                        } else {
                            for dd in 0..kd as isize {
                                let id = lo + dd;
                                if id < 0 || id >= d as isize {
                                    dst[o..o + c].fill(T::zero());
                                } else {
                                    let s = (base + id as usize) * c;
                                    dst[o..o + c].copy_from_slice(&x[s..s + c]);
                                }
                                o += c;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back onto the sample.
pub(crate) fn col2im<T: Real>(col: &[T], dims: [usize; 3], c: usize, k: [usize; 3], dx: &mut [T]) {
    let [h, w, d] = dims;
    let [kh, kw, kd] = k;
    let (ph, pw, pd) = ((kh / 2) as isize, (kw / 2) as isize, (kd / 2) as isize);
    let kk = kh * kw * kd * c;
    let mut row = 0;
    for oh in 0..h as isize {
        for ow in 0..w as isize {
            for od in 0..d as isize {
                let src = &col[row * kk..(row + 1) * kk];
                let mut o = 0;
                for dh in 0..kh as isize {
                    let ih = oh + dh - ph;
                    if ih < 0 || ih >= h as isize {
                        o += kw * kd * c;
                        continue;
                    }
                    for dw in 0..kw as isize {
                        let iw = ow + dw - pw;
                        if iw < 0 || iw >= w as isize {
                            o += kd * c;
                            continue;
                        }
                        let base = (ih as usize * w + iw as usize) * d;
                        for dd in 0..kd as isize {
                            let id = od + dd - pd;
                            if id >= 0 && id < d as isize {
                                let s = (base + id as usize) * c;
                                for (a, &g) in dx[s..s + c].iter_mut().zip(&src[o..o + c]) {
                                    *a += g;
                                }
                            }
                            o += c;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// `out (m x n) = bias + col (m x k) * kernel (k x n)`.
pub(crate) fn conv_gemm<T: Real>(col: &[T], kernel: &[T], bias: &[T], m: usize, k: usize, out: &mut [T]) {
    let n = bias.len();
    debug_assert_eq!(kernel.len(), k * n);
    for row in out.chunks_exact_mut(n) {
        row.copy_from_slice(bias);
    }
    // SAFETY: slice lengths match the (m, k, n) shapes and `out` is a
    // distinct mutable borrow.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            col.as_ptr(),
            k as isize,
            1,
            kernel.as_ptr(),
            n as isize,
            1,
            T::one(),
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `dk (k x n) += col^T * dy`.
pub(crate) fn kernel_grad<T: Real>(col: &[T], dy: &[T], m: usize, k: usize, n: usize, dk: &mut [T]) {
    // SAFETY: as in `conv_gemm`.
    unsafe {
        T::gemm(
            k,
            m,
            n,
            T::one(),
            col.as_ptr(),
            1,
            k as isize,
            dy.as_ptr(),
            n as isize,
            1,
            T::one(),
            dk.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `dcol (m x k) = dy (m x n) * kernel^T`.
pub(crate) fn col_grad<T: Real>(dy: &[T], kernel: &[T], m: usize, k: usize, n: usize, dcol: &mut [T]) {
    // SAFETY: as in `conv_gemm`.
    unsafe {
        T::gemm(
            m,
            n,
            k,
            T::one(),
            dy.as_ptr(),
            n as isize,
            1,
            kernel.as_ptr(),
            1,
            n as isize,
            T::zero(),
            dcol.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

/// Non-overlapping max pool of one sample; `argmax` receives the flat input
/// index of every output element (first maximum wins).
pub(crate) fn maxpool<T: Real>(x: &[T], dims: [usize; 3], c: usize, win: [usize; 3], out: &mut [T], argmax: &mut [u32]) {
    let [_, w, d] = dims;
    let [oh_n, ow_n, od_n] = pooled_dims(dims, win);
    let mut o = 0;
    for oh in 0..oh_n {
        for ow in 0..ow_n {
            for od in 0..od_n {
                let best = &mut out[o * c..(o + 1) * c];
                let idx = &mut argmax[o * c..(o + 1) * c];
                best.fill(T::neg_infinity());
                for ph in 0..win[0] {
                    for pw in 0..win[1] {
                        for pd in 0..win[2] {
                            let base = (((oh * win[0] + ph) * w + ow * win[1] + pw) * d + od * win[2] + pd) * c;
                            for ch in 0..c {
                                let v = x[base + ch];
                                if v > best[ch] {
                                    best[ch] = v;
                                    idx[ch] = (base + ch) as u32;
                                }
                            }
                        }
                    }
                }
                o += 1;
            }
        }
    }
}

pub(crate) fn pooled_dims(dims: [usize; 3], win: [usize; 3]) -> [usize; 3] {
    [dims[0] / win[0], dims[1] / win[1], dims[2] / win[2]]
}

/// Per-channel mean and biased variance over every row of `x` (`rows x c`).
pub(crate) fn channel_moments<T: Real>(x: &[T], c: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = x.len() / c;
    let mut mean = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            let e = v.as_f64() - m;
            *s += e * e;
        }
    }
    var.iter_mut().for_each(|s| *s /= rows as f64);
    (mean, var)
}

// Public single-op wrappers on tensors, used by tests and tooling.

fn sample_dims(x: &Tensor<impl Real>) -> Result<(usize, [usize; 3], usize)> {
    match *x.shape() {
        [b, h, w, d, c] => Ok((b, [h, w, d], c)),
        _ => Err(Error::shape(format!("expected [batch, h, w, d, c], got {:?}", x.shape()))),
    }
}

/// Same-padded 3D convolution of `[B, H, W, D, Cin]` with a
/// `[kh, kw, kd, Cin, Cout]` kernel.
pub fn conv3d<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, dims, cin) = sample_dims(x)?;
    let (k, cout) = match *kernel.shape() {
        [kh, kw, kd, ci, co] if ci == cin && kh % 2 == 1 && kw % 2 == 1 && kd % 2 == 1 => ([kh, kw, kd], co),
        _ => {
            return Err(Error::domain(format!(
                "kernel {:?} does not fit input with {cin} channels (odd extents required)",
                kernel.shape()
            )))
        }
    };
    if bias.shape() != [cout] {
        return Err(Error::domain(format!("bias {:?} does not match {cout} output channels", bias.shape())));
    }
    let m = dims.iter().product::<usize>();
    let kk = k.iter().product::<usize>() * cin;
    let mut col = vec![T::zero(); m * kk];
    let mut out = vec![T::zero(); b * m * cout];
    for (xs, ys) in x.data().chunks_exact(m * cin).zip(out.chunks_exact_mut(m * cout)) {
        im2col(xs, dims, cin, k, &mut col);
        conv_gemm(&col, kernel.data(), bias.data(), m, kk, ys);
    }
    Tensor::new(vec![b, dims[0], dims[1], dims[2], cout], out)
}

/// Max pooling with window = stride and floor semantics. Returns the pooled
/// tensor and per-output flat argmax indices within each sample.
pub fn maxpool3d<T: Real>(x: &Tensor<T>, window: [usize; 3]) -> Result<(Tensor<T>, Vec<u32>)> {
    let (b, dims, c) = sample_dims(x)?;
    if window.contains(&0) {
        return Err(Error::domain("pool window must be positive"));
    }
    let od = pooled_dims(dims, window);
    if od.contains(&0) {
        return Err(Error::domain(format!("pooling {dims:?} by {window:?} leaves a zero-sized axis")));
    }
    let (m, mo) = (dims.iter().product::<usize>() * c, od.iter().product::<usize>() * c);
    let mut out = vec![T::zero(); b * mo];
    let mut idx = vec![0u32; b * mo];
    for ((xs, ys), is) in x.data().chunks_exact(m).zip(out.chunks_exact_mut(mo)).zip(idx.chunks_exact_mut(mo)) {
        maxpool(xs, dims, c, window, ys, is);
    }
    Ok((Tensor::new(vec![b, od[0], od[1], od[2], c], out)?, idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Batch normalisation over all axes but the last. Train mode normalises by
/// the batch moments and updates the running statistics in place.
pub fn batchnorm<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
    mode: Mode,
) -> Result<Tensor<T>> {
    let c = *x.shape().last().ok_or_else(|| Error::shape("batchnorm needs a channel axis"))?;
    if [gamma.len(), beta.len(), running_mean.len(), running_var.len()].iter().any(|&l| l != c) {
        return Err(Error::domain(format!("batchnorm parameters must have {c} entries")));
    }
    let (mean, var) = match mode {
        Mode::Train => {
            if x.shape()[0] < 2 {
                return Err(Error::domain("train-mode batch normalisation needs a batch of at least 2"));
            }
            let (mean, var) = channel_moments(x.data(), c);
            for ch in 0..c {
                running_mean[ch] = T::lit(BN_MOMENTUM * running_mean[ch].as_f64() + (1.0 - BN_MOMENTUM) * mean[ch]);
                running_var[ch] = T::lit(BN_MOMENTUM * running_var[ch].as_f64() + (1.0 - BN_MOMENTUM) * var[ch]);
            }
            (mean, var)
        }
        Mode::Eval => (
            running_mean.iter().map(|v| v.as_f64()).collect(),
            running_var.iter().map(|v| v.as_f64()).collect(),
        ),
    };
    let scale: Vec<T> = (0..c).map(|ch| gamma[ch] * T::lit(1.0 / (var[ch] + BN_EPSILON).sqrt())).collect();
    let shift: Vec<T> = (0..c).map(|ch| beta[ch] - T::lit(mean[ch]) * scale[ch]).collect();
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(c) {
        for ((v, &s), &t) in row.iter_mut().zip(&scale).zip(&shift) {
            *v = *v * s + t;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Inverted dropout: in train mode each element is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`. Returns the output and the
/// applied mask (absent when the op is the identity).
pub fn dropout<T: Real>(x: &[T], rate: f64, mode: Mode, seed: u64) -> Result<(Vec<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::domain(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.to_vec(), None));
    }
    let keep = 1.0 - rate;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Dropout, 0));
    let bern = Bernoulli::new(keep).expect("probability in range");
    let scale = T::lit(1.0 / keep);
    let mask: Vec<T> = (0..x.len()).map(|_| if bern.sample(&mut rng) { scale } else { T::zero() }).collect();
    Ok((x.iter().zip(&mask).map(|(&a, &m)| a * m).collect(), Some(mask)))
}

/// Row-wise softmax of `rows x n` logits, computed with the max subtracted.
pub fn softmax_rows<T: Real>(logits: &[T], n: usize) -> Vec<T> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// `log(sum(exp(row)))` per row.
pub(crate) fn logsumexp_rows<T: Real>(logits: &[T], n: usize) -> Vec<T> {
    logits
        .chunks_exact(n)
        .map(|row| {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop same-padded convolution.
    fn conv_oracle(x: &Tensor<f64>, k: &Tensor<f64>, bias: &[f64]) -> Vec<f64> {
        let [b, h, w, d, ci] = x.shape().try_into().unwrap();
        let [kh, kw, kd, _, co] = k.shape().try_into().unwrap();
        let mut out = vec![0.0; b * h * w * d * co];
        for n in 0..b {
            for i in 0..h {
                for j in 0..w {
                    for l in 0..d {
                        for o in 0..co {
                            let mut s = bias[o];
                            for a in 0..kh {
                                for bb in 0..kw {
                                    for cc in 0..kd {
                                        let (y, x2, z) = (
                                            i as isize + a as isize - (kh / 2) as isize,
                                            j as isize + bb as isize - (kw / 2) as isize,
                                            l as isize + cc as isize - (kd / 2) as isize,
                                        );
                                        if y < 0 || x2 < 0 || z < 0 || y >= h as isize || x2 >= w as isize || z >= d as isize {
                                            continue;
                                        }
                                        for c in 0..ci {
                                            let xv = x.data()[((((n * h) + y as usize) * w + x2 as usize) * d + z as usize) * ci + c];
                                            let kv = k.data()[(((a * kw + bb) * kd + cc) * ci + c) * co + o];
                                            s += xv * kv;
                                        }
                                    }
                                }
                            }
                            out[((((n * h) + i) * w + j) * d + l) * co + o] = s;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = random(vec![2, 5, 4, 3, 1], 1);
        let mut k = Tensor::zeros(vec![3, 3, 3, 1, 1]);
        k.data_mut()[13] = 1.0;
        let y = conv3d(&x, &k, &Tensor::zeros(vec![1])).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let x = Tensor::full(vec![1, 4, 4, 3, 1], 1.0);
        let k = Tensor::full(vec![3, 3, 3, 1, 1], 1.0);
        let y = conv3d(&x, &k, &Tensor::zeros(vec![1])).unwrap();
        // interior voxel (1, 1, 1)
        assert_eq!(y.data()[(4 + 1) * 3 + 1], 27.0);
        // corner voxel sees 2x2x2
        assert_eq!(y.data()[0], 8.0);
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        for (seed, cin, cout, k) in [(3, 1, 2, [3, 3, 3]), (4, 3, 4, [3, 3, 3]), (5, 2, 3, [3, 3, 1]), (6, 2, 2, [1, 3, 5])] {
            let x = random(vec![2, 4, 4, 3, cin], seed);
            let kern = random(vec![k[0], k[1], k[2], cin, cout], seed + 100);
            let bias = random(vec![cout], seed + 200);
            let got = conv3d(&x, &kern, &bias).unwrap();
            let want = conv_oracle(&x, &kern, bias.data());
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let dims = [4, 3, 5];
        let (c, k) = (2, [3, 3, 3]);
        let x = random(vec![4 * 3 * 5 * c], 7);
        let m = 4 * 3 * 5;
        let kk = 27 * c;
        let g = random(vec![m * kk], 8);
        let mut col = vec![0.0; m * kk];
        im2col(x.data(), dims, c, k, &mut col);
        let lhs: f64 = col.iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let mut dx = vec![0.0; x.len()];
        col2im(g.data(), dims, c, k, &mut dx);
        let rhs: f64 = dx.iter().zip(x.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn conv_shape_errors() {
        let x = random(vec![1, 4, 4, 3, 2], 1);
        assert!(conv3d(&x, &Tensor::zeros(vec![3, 3, 3, 1, 2]), &Tensor::zeros(vec![2])).is_err());
        assert!(conv3d(&x, &Tensor::zeros(vec![2, 3, 3, 2, 2]), &Tensor::zeros(vec![2])).is_err());
        assert!(conv3d(&x, &Tensor::zeros(vec![3, 3, 3, 2, 2]), &Tensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn pool_floor_arithmetic() {
        let x = Tensor::<f32>::zeros(vec![1, 90, 98, 5, 1]);
        let (y, _) = maxpool3d(&x, [2, 2, 1]).unwrap();
        assert_eq!(y.shape(), &[1, 45, 49, 5, 1]);
        let (y, _) = maxpool3d(&y, [2, 2, 2]).unwrap();
        assert_eq!(y.shape(), &[1, 22, 24, 2, 1]);
        let x = Tensor::<f32>::zeros(vec![1, 5, 6, 1, 1]);
        assert!(maxpool3d(&x, [2, 2, 2]).is_err());
    }

    #[test]
    fn pool_constant_and_argmax() {
        let x = Tensor::full(vec![1, 4, 4, 2, 3], 0.5f64);
        let (y, _) = maxpool3d(&x, [2, 2, 2]).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
        let x = random(vec![1, 4, 6, 2, 2], 9);
        let (y, idx) = maxpool3d(&x, [2, 3, 1]).unwrap();
        for (v, &i) in y.data().iter().zip(&idx) {
            assert_eq!(*v, x.data()[i as usize]);
        }
    }

    #[test]
    fn batchnorm_train_standardises_and_eval_is_affine() {
        let mut x = random(vec![8, 3, 3, 2, 3], 10);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = *v * 3.0 + (i % 3) as f64;
        }
        let (g, b) = (vec![1.0; 3], vec![0.0; 3]);
        let (mut rm, mut rv) = (vec![0.0; 3], vec![1.0; 3]);
        let y = batchnorm(&x, &g, &b, &mut rm, &mut rv, Mode::Train).unwrap();
        let (mean, var) = channel_moments(y.data(), 3);
        for ch in 0..3 {
            assert!(mean[ch].abs() < 1e-6);
            assert!((var[ch] - 1.0).abs() < 1e-5);
        }
        assert!(rm.iter().any(|&v| v != 0.0));
        let e1 = batchnorm(&x, &g, &b, &mut rm, &mut rv, Mode::Eval).unwrap();
        let e2 = batchnorm(&x, &g, &b, &mut rm, &mut rv, Mode::Eval).unwrap();
        assert_eq!(e1, e2);
        let single = random(vec![1, 2, 2, 1, 3], 11);
        assert!(matches!(batchnorm(&single, &g, &b, &mut rm, &mut rv, Mode::Train), Err(Error::Domain(_))));
    }

    #[test]
    fn running_stats_converge_to_data_moments() {
        use rand_distr::{Distribution, Normal};
        let (mu, sigma) = (2.5, 0.7);
        let normal = Normal::new(mu, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (g, b) = (vec![1.0], vec![0.0]);
        let (mut rm, mut rv) = (vec![0.0], vec![1.0]);
        for _ in 0..100 {
            let x = Tensor::new(vec![64, 1], (0..64).map(|_| normal.sample(&mut rng)).collect()).unwrap();
            batchnorm(&x, &g, &b, &mut rm, &mut rv, Mode::Train).unwrap();
        }
        let probe = Tensor::new(vec![3, 1], vec![mu, mu + sigma, mu - 2.0 * sigma]).unwrap();
        let y = batchnorm(&probe, &g, &b, &mut rm, &mut rv, Mode::Eval).unwrap();
        for (got, want) in y.data().iter().zip([0.0f64, 1.0, -2.0]) {
            assert!((got - want).abs() <= 0.05 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn dropout_modes() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01 - 3.0).collect();
        let (a, _) = dropout(&x, 0.0, Mode::Train, 5).unwrap();
        let (b, _) = dropout(&x, 0.0, Mode::Eval, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(dropout(&x, 0.3, Mode::Eval, 1).unwrap().0, dropout(&x, 0.3, Mode::Eval, 2).unwrap().0);
        let (y, mask) = dropout(&x, 0.3, Mode::Train, 5).unwrap();
        let mask = mask.unwrap();
        let dropped = mask.iter().filter(|&&m| m == 0.0).count();
        assert!((200..400).contains(&dropped));
        assert_eq!(y, dropout(&x, 0.3, Mode::Train, 5).unwrap().0);
        assert!(dropout(&x, 1.0, Mode::Train, 5).is_err());
    }

    proptest! {
        #[test]
        fn softmax_rows_normalise(logits in prop::collection::vec(-1e4f64..1e4, 2..40)) {
            let n = 2;
            let rows = logits.len() / n;
            let p = softmax_rows(&logits[..rows * n], n);
            for row in p.chunks_exact(n) {
                prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn softmax_rows_normalise_f32(a in -1e30f32..1e30, b in -1e30f32..1e30) {
            let p = softmax_rows(&[a, b], 2);
            prop_assert!(p.iter().all(|v| v.is_finite()));
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }
}
