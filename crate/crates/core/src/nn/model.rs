use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    channel_moments, col2im, col_grad, conv_gemm, dropout, im2col, kernel_grad, logsumexp_rows, maxpool, pooled_dims,
    softmax_rows, Mode, BN_EPSILON, BN_MOMENTUM,
};
use super::spec::{ArchitectureSpec, Variant};
use super::tensor::{check_finite, Tensor};
use crate::error::{Error, Result};
use crate::features::FeatureCube;
use crate::rng::{mix_seed, Stream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvKernel,
    ConvBias,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
    DenseWeight,
    DenseBias,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::BnRunningMean | ParamKind::BnRunningVar)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
}

/// Parameters are stored block by block (kernel, bias, gamma, beta, running
/// mean, running variance), then dense layer by dense layer (weight, bias).
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub spec: ArchitectureSpec,
    pub seed: u64,
    params: Vec<Param<T>>,
}

const PER_BLOCK: usize = 6;

/// The output layer is Glorot-uniform shrunk by this factor so that an
/// untrained model predicts close to 0.5.
const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Classifier output for one cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub margin: f64,
    pub probability: f64,
}

impl Score {
    pub fn from_margin(margin: f64) -> Self {
        Score { margin, probability: 1.0 / (1.0 + (-margin).exp()) }
    }
}

/// Expected name, kind and shape of every parameter of `spec`.
pub fn parameter_layout(spec: &ArchitectureSpec) -> Vec<(String, ParamKind, Vec<usize>)> {
    let mut out = Vec::new();
    let mut cin = 1;
    for (i, b) in spec.blocks.iter().enumerate() {
        let p = format!("block{}", i + 1);
        let c = b.channels;
        out.push((format!("{p}.conv.kernel"), ParamKind::ConvKernel, vec![b.kernel[0], b.kernel[1], b.kernel[2], cin, c]));
        out.push((format!("{p}.conv.bias"), ParamKind::ConvBias, vec![c]));
        out.push((format!("{p}.bn.gamma"), ParamKind::BnGamma, vec![c]));
        out.push((format!("{p}.bn.beta"), ParamKind::BnBeta, vec![c]));
        out.push((format!("{p}.bn.running_mean"), ParamKind::BnRunningMean, vec![c]));
        out.push((format!("{p}.bn.running_var"), ParamKind::BnRunningVar, vec![c]));
        cin = c;
    }
    for (j, (i, o)) in spec.dense_dims().into_iter().enumerate() {
        out.push((format!("fc{}.weight", j + 1), ParamKind::DenseWeight, vec![i, o]));
        out.push((format!("fc{}.bias", j + 1), ParamKind::DenseBias, vec![o]));
    }
    out
}

impl<T: Real> Model<T> {
    /// He-uniform kernels and hidden dense weights, zero biases, unit BN scale.
    pub fn new(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = parameter_layout(&spec);
        let n_dense = spec.fc.len();
        let mut params = Vec::with_capacity(layout.len());
        for (idx, (name, kind, shape)) in layout.into_iter().enumerate() {
            let n: usize = shape.iter().product();
            let value = match kind {
                ParamKind::ConvKernel | ParamKind::DenseWeight => {
                    let fan_in: usize = shape[..shape.len() - 1].iter().product();
                    let fan_out = shape[shape.len() - 1];
                    let last = kind == ParamKind::DenseWeight && name == format!("fc{n_dense}.weight");
                    let limit = if last {
                        OUTPUT_INIT_SCALE * (6.0 / (fan_in + fan_out) as f64).sqrt()
                    } else {
                        (6.0 / fan_in as f64).sqrt()
                    };
                    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limits");
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, Stream::Init, idx as u64));
                    Tensor::new(shape, (0..n).map(|_| T::lit(dist.sample(&mut rng))).collect())?
                }
                ParamKind::BnGamma | ParamKind::BnRunningVar => Tensor::full(shape, T::one()),
                _ => Tensor::zeros(shape),
            };
            params.push(Param { name, kind, value });
        }
        Ok(Model { spec, seed, params })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(spec: ArchitectureSpec, seed: u64, params: Vec<(String, Tensor<T>)>) -> Result<Self> {
        spec.validate()?;
        let layout = parameter_layout(&spec);
        if layout.len() != params.len() {
            return Err(Error::shape(format!("expected {} parameter tensors, got {}", layout.len(), params.len())));
        }
        let params = layout
            .into_iter()
            .zip(params)
            .map(|((name, kind, shape), (got_name, value))| {
                if name != got_name || value.shape() != shape.as_slice() {
                    return Err(Error::shape(format!(
                        "parameter {got_name} {:?} does not match {name} {shape:?}",
                        value.shape()
                    )));
                }
                Ok(Param { name, kind, value })
            })
            .collect::<Result<_>>()?;
        Ok(Model { spec, seed, params })
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.kind.trainable()).map(|p| p.value.len()).sum()
    }

    pub fn conv_kernel_norm2(&self) -> f64 {
        self.params.iter().filter(|p| p.kind == ParamKind::ConvKernel).map(|p| p.value.sum_squares().as_f64()).sum()
    }

    fn p(&self, idx: usize) -> &[T] {
        self.params[idx].value.data()
    }

    fn dense_base(&self) -> usize {
        PER_BLOCK * self.spec.blocks.len()
    }

    /// Packs cubes into a network input batch; the 2D variant takes the
    /// centre channel of every cube.
    pub fn batch(&self, cubes: &[&FeatureCube<T>]) -> Result<Tensor<T>> {
        let [h, w, d] = self.spec.input;
        let mut data = Vec::with_capacity(cubes.len() * h * w * d);
        for c in cubes {
            if c.bands != h || c.frames != w || c.depth != self.spec.z {
                return Err(Error::shape(format!(
                    "cube {}x{}x{} does not fit a {} model for {h}x{w}x{}",
                    c.bands,
                    c.frames,
                    c.depth,
                    self.spec.variant.name(),
                    self.spec.z
                )));
            }
            match self.spec.variant {
                Variant::Cnn3d => data.extend_from_slice(&c.values),
                Variant::Cnn2d => data.extend(c.values.iter().skip(c.depth / 2).step_by(c.depth).copied()),
            }
        }
        Tensor::new(vec![cubes.len(), h, w, d, 1], data)
    }

    /// Class probabilities `B x 2` (column 1 is the leak class).
    pub fn forward(&self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let pass = self.run(input, Pass::new(mode, None, false))?;
        Tensor::new(vec![pass.batch, 2], softmax_rows(&pass.logits, 2))
    }

    /// Leak probability of every cube, evaluated in batches of `batch`.
    pub fn predict(&self, cubes: &[FeatureCube<T>], batch: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(cubes.len());
        for chunk in cubes.chunks(batch.max(1)) {
            let refs: Vec<&FeatureCube<T>> = chunk.iter().collect();
            let x = self.batch(&refs)?;
            let p = self.forward(&x, Mode::Eval)?;
            out.extend(p.data().chunks_exact(2).map(|r| r[1].as_f64()));
        }
        Ok(out)
    }

    /// Leak-minus-non-leak logit margin and the matching leak probability
    /// (computed in f64 so it does not saturate as early as `T`).
    pub fn score(&self, cubes: &[&FeatureCube<T>], batch: usize) -> Result<Vec<Score>> {
        let mut out = Vec::with_capacity(cubes.len());
        for chunk in cubes.chunks(batch.max(1)) {
            let logits = self.logits(&self.batch(chunk)?)?;
            out.extend(logits.chunks_exact(2).map(|r| Score::from_margin(r[1].as_f64() - r[0].as_f64())));
        }
        Ok(out)
    }

    pub(crate) fn logits(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.run(input, Pass::new(Mode::Eval, None, false))?.logits)
    }

    /// Mean cross-entropy (plus L2 on conv kernels) and gradients of every
    /// parameter. Gradients of running statistics are zero.
    pub fn loss_and_grads(
        &self,
        input: &Tensor<T>,
        labels: &[usize],
        l2_penalty: f64,
        mode: Mode,
        dropout_seed: Option<u64>,
    ) -> Result<LossGrads<T>> {
        if labels.len() != input.shape().first().copied().unwrap_or(0) {
            return Err(Error::shape(format!("{} labels for a batch of {:?}", labels.len(), input.shape())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::domain(format!("label {l} is not a class index")));
        }
        let pass = self.run(input, Pass::new(mode, dropout_seed, true))?;
        let b = pass.batch;
        let lse = logsumexp_rows(&pass.logits, 2);
        let data_loss: f64 =
            labels.iter().enumerate().map(|(i, &y)| (lse[i] - pass.logits[i * 2 + y]).as_f64()).sum::<f64>() / b as f64;
        let loss = data_loss + l2_penalty * self.conv_kernel_norm2();
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss is {loss}")));
        }
        let probs = softmax_rows(&pass.logits, 2);
        let inv_b = T::lit(1.0 / b as f64);
        let mut dlogits: Vec<T> = probs.clone();
        for (i, &y) in labels.iter().enumerate() {
            dlogits[i * 2 + y] -= T::one();
        }
        dlogits.iter_mut().for_each(|v| *v *= inv_b);
        let grads = self.backward(&pass, dlogits, l2_penalty)?;
        Ok(LossGrads { loss, data_loss, probs, grads, batch_moments: pass.moments })
    }

    /// Folds train-mode batch moments into the running statistics.
    pub fn update_running_stats(&mut self, moments: &[(Vec<f64>, Vec<f64>)]) {
        for (i, (mean, var)) in moments.iter().enumerate() {
            for (idx, src) in [(PER_BLOCK * i + 4, mean), (PER_BLOCK * i + 5, var)] {
                for (r, &m) in self.params[idx].value.data_mut().iter_mut().zip(src) {
                    *r = T::lit(BN_MOMENTUM * r.as_f64() + (1.0 - BN_MOMENTUM) * m);
                }
            }
        }
    }

    fn run(&self, input: &Tensor<T>, mut pass: Pass<T>) -> Result<Pass<T>> {
        let [h, w, d] = self.spec.input;
        match *input.shape() {
            [_, ih, iw, id, 1] if [ih, iw, id] == [h, w, d] => {}
            _ => {
                return Err(Error::shape(format!(
                    "input {:?} does not match [batch, {h}, {w}, {d}, 1]",
                    input.shape()
                )))
            }
        }
        let b = input.shape()[0];
        if b == 0 {
            return Err(Error::shape("empty batch"));
        }
        pass.batch = b;
        let mut dims = self.spec.input;
        let mut cin = 1;
        let mut act = input.data().to_vec();
        for (i, blk) in self.spec.blocks.iter().enumerate() {
            let cout = blk.channels;
            let m: usize = dims.iter().product();
            let kk = blk.kernel.iter().product::<usize>() * cin;
            let od = pooled_dims(dims, blk.pool);
            let mo: usize = od.iter().product::<usize>() * cout;
            let mut col = vec![T::zero(); m * kk];
            let mut conv = vec![T::zero(); m * cout];
            let mut pooled = vec![T::zero(); b * mo];
            let mut argmax = vec![0u32; if pass.keep { b * mo } else { mo }];
            for s in 0..b {
                im2col(&act[s * m * cin..(s + 1) * m * cin], dims, cin, blk.kernel, &mut col);
                conv_gemm(&col, self.p(PER_BLOCK * i), self.p(PER_BLOCK * i + 1), m, kk, &mut conv);
                let am = if pass.keep { &mut argmax[s * mo..(s + 1) * mo] } else { &mut argmax[..] };
                maxpool(&conv, dims, cout, blk.pool, &mut pooled[s * mo..(s + 1) * mo], am);
            }
            let site = format!("block {} convolution", i + 1);
            check_finite(&pooled, &site)?;
            let (mean, var) = match pass.mode {
                Mode::Train => {
                    if b < 2 {
                        return Err(Error::domain("train-mode batch normalisation needs a batch of at least 2"));
                    }
                    channel_moments(&pooled, cout)
                }
                Mode::Eval => (
                    self.p(PER_BLOCK * i + 4).iter().map(|v| v.as_f64()).collect(),
                    self.p(PER_BLOCK * i + 5).iter().map(|v| v.as_f64()).collect(),
                ),
            };
            let inv_std: Vec<T> = var.iter().map(|&v| T::lit(1.0 / (v + BN_EPSILON).sqrt())).collect();
            let mean_t: Vec<T> = mean.iter().map(|&v| T::lit(v)).collect();
            let (gamma, beta) = (self.p(PER_BLOCK * i + 2), self.p(PER_BLOCK * i + 3));
            let mut out = pooled;
            for row in out.chunks_exact_mut(cout) {
                for ch in 0..cout {
                    let xhat = (row[ch] - mean_t[ch]) * inv_std[ch];
                    row[ch] = xhat;
                }
            }
            let xhat = if pass.keep { Some(out.clone()) } else { None };
            for row in out.chunks_exact_mut(cout) {
                for ch in 0..cout {
                    let y = gamma[ch] * row[ch] + beta[ch];
                    row[ch] = if y > T::zero() { y } else { T::zero() };
                }
            }
            check_finite(&out, &format!("block {} normalisation", i + 1))?;
            if pass.mode == Mode::Train {
                pass.moments.push((mean, var));
            }
            if pass.keep {
                pass.blocks.push(BlockCache {
                    input: std::mem::replace(&mut act, out),
                    argmax,
                    xhat: xhat.expect("kept"),
                    inv_std,
                });
            } else {
                act = out;
            }
            dims = od;
            cin = cout;
        }

        // dropout, then global average pooling
        let spatial: usize = dims.iter().product();
        let (act, mask) = dropout(&act, self.spec.dropout, pass.mode, pass.dropout_seed.unwrap_or(self.seed))?;
        pass.dropout_mask = mask;
        let inv = T::lit(1.0 / spatial as f64);
        let mut feat = vec![T::zero(); b * cin];
        for s in 0..b {
            let f = &mut feat[s * cin..(s + 1) * cin];
            for row in act[s * spatial * cin..(s + 1) * spatial * cin].chunks_exact(cin) {
                f.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
            }
            f.iter_mut().for_each(|a| *a *= inv);
        }
        pass.spatial = spatial;
        if pass.keep {
            pass.final_act = act;
        }

        let base = self.dense_base();
        let dims_fc = self.spec.dense_dims();
        let mut x = feat;
        for (j, &(fi, fo)) in dims_fc.iter().enumerate() {
            let (wt, bias) = (self.p(base + 2 * j), self.p(base + 2 * j + 1));
            let mut y = vec![T::zero(); b * fo];
            for row in y.chunks_exact_mut(fo) {
                row.copy_from_slice(bias);
            }
            // SAFETY: x is b x fi, wt is fi x fo, y is b x fo.
            unsafe {
                T::gemm(b, fi, fo, T::one(), x.as_ptr(), fi as isize, 1, wt.as_ptr(), fo as isize, 1, T::one(), y.as_mut_ptr(), fo as isize, 1);
            }
            if j + 1 < dims_fc.len() {
                y.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            check_finite(&y, &format!("dense layer {}", j + 1))?;
            let prev = std::mem::replace(&mut x, y);
            if pass.keep {
                pass.dense_inputs.push(prev);
            }
        }
        pass.logits = x;
        Ok(pass)
    }

    fn backward(&self, pass: &Pass<T>, dlogits: Vec<T>, l2_penalty: f64) -> Result<Vec<Tensor<T>>> {
        let b = pass.batch;
        let mut grads: Vec<Tensor<T>> = self.params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        let base = self.dense_base();
        let dims_fc = self.spec.dense_dims();
        let mut d = dlogits;
        for (j, &(fi, fo)) in dims_fc.iter().enumerate().rev() {
            let x = &pass.dense_inputs[j];
            {
                let gw = grads[base + 2 * j].data_mut();
                // SAFETY: x^T is fi x b, d is b x fo, gw is fi x fo.
                unsafe {
                    T::gemm(fi, b, fo, T::one(), x.as_ptr(), 1, fi as isize, d.as_ptr(), fo as isize, 1, T::zero(), gw.as_mut_ptr(), fo as isize, 1);
                }
            }
            {
                let gb = grads[base + 2 * j + 1].data_mut();
                for row in d.chunks_exact(fo) {
                    gb.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                }
            }
            let wt = self.p(base + 2 * j);
            let mut dx = vec![T::zero(); b * fi];
            // SAFETY: d is b x fo, wt^T is fo x fi, dx is b x fi.
            unsafe {
                T::gemm(b, fo, fi, T::one(), d.as_ptr(), fo as isize, 1, wt.as_ptr(), 1, fo as isize, T::zero(), dx.as_mut_ptr(), fi as isize, 1);
            }
            if j > 0 {
                dx.iter_mut().zip(x).for_each(|(g, &v)| {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            d = dx;
        }

        // through global average pooling and dropout
        let c = self.spec.feature_width();
        let spatial = pass.spatial;
        let inv = T::lit(1.0 / spatial as f64);
        let mut dact = vec![T::zero(); b * spatial * c];
        for s in 0..b {
            let g = &d[s * c..(s + 1) * c];
            for row in dact[s * spatial * c..(s + 1) * spatial * c].chunks_exact_mut(c) {
                row.iter_mut().zip(g).for_each(|(a, &v)| *a = v * inv);
            }
        }
        if let Some(mask) = &pass.dropout_mask {
            dact.iter_mut().zip(mask).for_each(|(a, &m)| *a *= m);
        }

        let mut dims_in = Vec::with_capacity(self.spec.blocks.len());
        let mut dims = self.spec.input;
        for blk in &self.spec.blocks {
            dims_in.push(dims);
            dims = pooled_dims(dims, blk.pool);
        }
        for (i, blk) in self.spec.blocks.iter().enumerate().rev() {
            let cache = &pass.blocks[i];
            let cout = blk.channels;
            let cin = if i == 0 { 1 } else { self.spec.blocks[i - 1].channels };
            let out_act: &[T] = if i + 1 == self.spec.blocks.len() { &pass.final_act } else { &pass.blocks[i + 1].input };
            let gamma = self.p(PER_BLOCK * i + 2);
            // ReLU, then batch-norm backward
            let rows = dact.len() / cout;
            let mut sum_dy = vec![0.0f64; cout];
            let mut sum_dy_xhat = vec![0.0f64; cout];
            for ((g, &a), (&xh, ch)) in
                dact.iter_mut().zip(out_act.iter()).zip(cache.xhat.iter().zip((0..cout).cycle()))
            {
                if a <= T::zero() {
                    *g = T::zero();
                }
                sum_dy[ch] += g.as_f64();
                sum_dy_xhat[ch] += (*g * xh).as_f64();
            }
            {
                let gg = grads[PER_BLOCK * i + 2].data_mut();
                for ch in 0..cout {
                    gg[ch] = T::lit(sum_dy_xhat[ch]);
                }
            }
            {
                let gb = grads[PER_BLOCK * i + 3].data_mut();
                for ch in 0..cout {
                    gb[ch] = T::lit(sum_dy[ch]);
                }
            }
            let mean_dy: Vec<T> = sum_dy.iter().map(|&v| T::lit(v / rows as f64)).collect();
            let mean_dy_xhat: Vec<T> = sum_dy_xhat.iter().map(|&v| T::lit(v / rows as f64)).collect();
            let mut dpooled = dact;
            match pass.mode {
                Mode::Train => {
                    for (row, xrow) in dpooled.chunks_exact_mut(cout).zip(cache.xhat.chunks_exact(cout)) {
                        for ch in 0..cout {
                            let g = gamma[ch] * cache.inv_std[ch];
                            row[ch] = g * (row[ch] - mean_dy[ch] - xrow[ch] * mean_dy_xhat[ch]);
                        }
                    }
                }
                Mode::Eval => {
                    for row in dpooled.chunks_exact_mut(cout) {
                        for ch in 0..cout {
                            row[ch] *= gamma[ch] * cache.inv_std[ch];
                        }
                    }
                }
            }

            // max-pool scatter, then convolution backward per sample
            let din = dims_in[i];
            let m: usize = din.iter().product();
            let kk = blk.kernel.iter().product::<usize>() * cin;
            let mo = dpooled.len() / b;
            let mut dconv = vec![T::zero(); m * cout];
            let mut col = vec![T::zero(); m * kk];
            let mut dcol = if i > 0 { vec![T::zero(); m * kk] } else { Vec::new() };
            let mut dprev = if i > 0 { vec![T::zero(); b * m * cin] } else { Vec::new() };
            let mut dk = vec![T::zero(); kk * cout];
            let mut dbias = vec![T::zero(); cout];
            for s in 0..b {
                dconv.fill(T::zero());
                for (&g, &idx) in dpooled[s * mo..(s + 1) * mo].iter().zip(&cache.argmax[s * mo..(s + 1) * mo]) {
                    dconv[idx as usize] += g;
                }
                for row in dconv.chunks_exact(cout) {
                    dbias.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                }
                im2col(&cache.input[s * m * cin..(s + 1) * m * cin], din, cin, blk.kernel, &mut col);
                kernel_grad(&col, &dconv, m, kk, cout, &mut dk);
                if i > 0 {
                    col_grad(&dconv, self.p(PER_BLOCK * i), m, kk, cout, &mut dcol);
                    col2im(&dcol, din, cin, blk.kernel, &mut dprev[s * m * cin..(s + 1) * m * cin]);
                }
            }
            let l2 = T::lit(2.0 * l2_penalty);
            for ((g, &v), &k) in grads[PER_BLOCK * i].data_mut().iter_mut().zip(&dk).zip(self.p(PER_BLOCK * i)) {
                *g = v + l2 * k;
            }
            grads[PER_BLOCK * i + 1].data_mut().copy_from_slice(&dbias);
            dact = dprev;
        }
        for (g, p) in grads.iter().zip(&self.params) {
            g.check_finite(&format!("gradient of {}", p.name))?;
        }
        Ok(grads)
    }
}

pub struct LossGrads<T> {
    /// Data loss plus the L2 term.
    pub loss: f64,
    pub data_loss: f64,
    /// Softmax output, `B x 2`.
    pub probs: Vec<T>,
    /// One tensor per parameter, in model order.
    pub grads: Vec<Tensor<T>>,
    /// Train-mode batch moments per block, for the running statistics.
    pub batch_moments: Vec<(Vec<f64>, Vec<f64>)>,
}

struct BlockCache<T> {
    input: Vec<T>,
    argmax: Vec<u32>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

struct Pass<T> {
    mode: Mode,
    dropout_seed: Option<u64>,
    keep: bool,
    batch: usize,
    blocks: Vec<BlockCache<T>>,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
    final_act: Vec<T>,
    dropout_mask: Option<Vec<T>>,
    spatial: usize,
    dense_inputs: Vec<Vec<T>>,
    logits: Vec<T>,
}

impl<T> Pass<T> {
    fn new(mode: Mode, dropout_seed: Option<u64>, keep: bool) -> Self {
        Pass {
            mode,
            dropout_seed,
            keep,
            batch: 0,
            blocks: Vec::new(),
            moments: Vec::new(),
            final_act: Vec::new(),
            dropout_mask: None,
            spatial: 0,
            dense_inputs: Vec::new(),
            logits: Vec::new(),
        }
    }
}
