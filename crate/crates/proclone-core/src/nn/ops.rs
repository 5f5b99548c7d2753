//! Layers and losses. Every layer is `forward(x) -> y` plus
//! `backward(x or cache, dy) -> dx`, with parameter gradients accumulated in
//! place. Convolutions are 3x3, stride 1, SAME zero padding, lowered to
//! GEMM via im2col.

use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::{Parameter, Tensor};

pub const KERNEL: usize = 3;

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

pub struct Conv2d {
    pub weight: Parameter, // (C_out, C_in, 3, 3)
    pub bias: Parameter,   // (C_out)
}

impl Conv2d {
    pub fn output_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn input_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    /// x: (B, C_in, H, W) -> (B, C_out, H, W).
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (b, cin, h, w) = shape4(x);
        assert_eq!(cin, self.input_channels(), "conv input channel mismatch");
        let cout = self.output_channels();
        let p = h * w;
        let k = cin * KERNEL * KERNEL;
        let mut y = Tensor::zeros(&[b, cout, h, w]);
        let mut cols = vec![0.0f32; k * p];
        for bi in 0..b {
            im2col(&x.data()[bi * cin * p..(bi + 1) * cin * p], &mut cols, cin, h, w);
            let yb = &mut y.data_mut()[bi * cout * p..(bi + 1) * cout * p];
            for co in 0..cout {
                let bias = self.bias.value.data()[co];
                yb[co * p..(co + 1) * p].iter_mut().for_each(|v| *v = bias);
            }
            gemm_nn(yb, self.weight.value.data(), &cols, cout, k, p);
        }
        y
    }

    /// Accumulates weight/bias gradients and returns dx.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        let (b, cin, h, w) = shape4(x);
        let cout = self.output_channels();
        let p = h * w;
        let k = cin * KERNEL * KERNEL;
        let mut dx = Tensor::zeros(&[b, cin, h, w]);
        let mut cols = vec![0.0f32; k * p];
        let mut dcols = vec![0.0f32; k * p];
        for bi in 0..b {
            let dyb = &dy.data()[bi * cout * p..(bi + 1) * cout * p];
            im2col(&x.data()[bi * cin * p..(bi + 1) * cin * p], &mut cols, cin, h, w);
            // dW += dY * cols^T, db += row sums of dY.
            gemm_nt(self.weight.grad.data_mut(), dyb, &cols, cout, p, k);
            for co in 0..cout {
                let s: f32 = dyb[co * p..(co + 1) * p].iter().sum();
                self.bias.grad.data_mut()[co] += s;
            }
            // dx = fold(W^T * dY).
            dcols.iter_mut().for_each(|v| *v = 0.0);
            gemm_tn(&mut dcols, self.weight.value.data(), dyb, cout, k, p);
            col2im_add(
                &dcols,
                &mut dx.data_mut()[bi * cin * p..(bi + 1) * cin * p],
                cin,
                h,
                w,
            );
        }
        dx
    }
}

fn shape4(x: &Tensor) -> (usize, usize, usize, usize) {
    let s = x.shape();
    assert_eq!(s.len(), 4, "expected a (B, C, H, W) tensor");
    (s[0], s[1], s[2], s[3])
}

/// Unfold one (C, H, W) sample into a (C*9, H*W) patch matrix.
fn im2col(x: &[f32], cols: &mut [f32], c: usize, h: usize, w: usize) {
    let p = h * w;
    for ci in 0..c {
        let plane = &x[ci * p..(ci + 1) * p];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * p..(ci * 9 + ky * 3 + kx + 1) * p];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as i32 + ky as i32 - 1;
                    if sy < 0 || sy >= h as i32 {
                        dst.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add the patch-matrix gradient back onto the input plane.
fn col2im_add(dcols: &[f32], dx: &mut [f32], c: usize, h: usize, w: usize) {
    let p = h * w;
    for ci in 0..c {
        let plane = &mut dx[ci * p..(ci + 1) * p];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &dcols[(ci * 9 + ky * 3 + kx) * p..(ci * 9 + ky * 3 + kx + 1) * p];
                for y in 0..h {
                    let sy = y as i32 + ky as i32 - 1;
                    if sy < 0 || sy >= h as i32 {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for i in 1..w {
                                dst[i - 1] += src[i];
                            }
                        }
                        1 => {
                            for i in 0..w {
                                dst[i] += src[i];
                            }
                        }
                        _ => {
                            for i in 0..w - 1 {
                                dst[i + 1] += src[i];
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dense / ReLU
// ---------------------------------------------------------------------------

pub struct Dense {
    pub weight: Parameter, // (Out, In)
    pub bias: Parameter,   // (Out)
}

impl Dense {
    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    /// x: (B, In) -> (B, Out).
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (b, input) = shape2(x);
        assert_eq!(input, self.input_dim(), "dense input dim mismatch");
        let out = self.output_dim();
        let mut y = Tensor::zeros(&[b, out]);
        for bi in 0..b {
            y.data_mut()[bi * out..(bi + 1) * out].copy_from_slice(self.bias.value.data());
        }
        gemm_nt(y.data_mut(), x.data(), self.weight.value.data(), b, input, out);
        y
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        let (b, input) = shape2(x);
        let out = self.output_dim();
        let mut dx = Tensor::zeros(&[b, input]);
        gemm_nn(dx.data_mut(), dy.data(), self.weight.value.data(), b, out, input);
        gemm_tn(self.weight.grad.data_mut(), dy.data(), x.data(), b, out, input);
        for bi in 0..b {
            for o in 0..out {
                self.bias.grad.data_mut()[o] += dy.data()[bi * out + o];
            }
        }
        dx
    }
}

fn shape2(x: &Tensor) -> (usize, usize) {
    let s = x.shape();
    assert_eq!(s.len(), 2, "expected a (B, F) tensor");
    (s[0], s[1])
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    });
    y
}

/// dx from the upstream gradient and the forward *output*.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &out) in dx.data_mut().iter_mut().zip(y.data()) {
        if out <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Layer norm
// ---------------------------------------------------------------------------

pub const LAYER_NORM_EPS: f32 = 1e-5;

pub struct LayerNorm {
    pub gamma: Parameter, // (D)
    pub beta: Parameter,  // (D)
}

pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f32>,
}

impl LayerNorm {
    pub fn dim(&self) -> usize {
        self.gamma.value.len()
    }

    /// Normalizes the last dimension of a (T, D) tensor to zero mean, unit
    /// variance, then applies the learned scale and shift.
    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let (t, d) = shape2(x);
        assert_eq!(d, self.dim());
        let mut y = Tensor::zeros(&[t, d]);
        let mut xhat = Tensor::zeros(&[t, d]);
        let mut inv_std = vec![0.0f32; t];
        let g = self.gamma.value.data();
        let bta = self.beta.value.data();
        for ti in 0..t {
            let row = &x.data()[ti * d..(ti + 1) * d];
            let mean = row.iter().sum::<f32>() / d as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let inv = 1.0 / libm::sqrtf(var + LAYER_NORM_EPS);
            inv_std[ti] = inv;
            for i in 0..d {
                let xh = (row[i] - mean) * inv;
                xhat.data_mut()[ti * d + i] = xh;
                y.data_mut()[ti * d + i] = xh * g[i] + bta[i];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Tensor) -> Tensor {
        let (t, d) = shape2(dy);
        let mut dx = Tensor::zeros(&[t, d]);
        let g = self.gamma.value.data();
        for ti in 0..t {
            let dyr = &dy.data()[ti * d..(ti + 1) * d];
            let xh = &cache.xhat.data()[ti * d..(ti + 1) * d];
            let mut mean_dxhat = 0.0f32;
            let mut mean_dxhat_xhat = 0.0f32;
            for i in 0..d {
                let dxh = dyr[i] * g[i];
                mean_dxhat += dxh;
                mean_dxhat_xhat += dxh * xh[i];
            }
            mean_dxhat /= d as f32;
            mean_dxhat_xhat /= d as f32;
            let inv = cache.inv_std[ti];
            for i in 0..d {
                let dxh = dyr[i] * g[i];
                dx.data_mut()[ti * d + i] = inv * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
                self.gamma.grad.data_mut()[i] += dyr[i] * xh[i];
                self.beta.grad.data_mut()[i] += dyr[i];
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

pub struct Embedding {
    pub table: Parameter, // (V, D)
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.table.value.shape()[1]
    }

    pub fn vocab(&self) -> usize {
        self.table.value.shape()[0]
    }

    /// Gather rows: indices -> (T, D).
    pub fn forward(&self, indices: &[usize]) -> Tensor {
        let d = self.dim();
        let mut y = Tensor::zeros(&[indices.len(), d]);
        for (t, &idx) in indices.iter().enumerate() {
            assert!(idx < self.vocab(), "embedding index out of range");
            y.data_mut()[t * d..(t + 1) * d]
                .copy_from_slice(&self.table.value.data()[idx * d..(idx + 1) * d]);
        }
        y
    }

    pub fn backward(&mut self, indices: &[usize], dy: &Tensor) {
        let d = self.dim();
        for (t, &idx) in indices.iter().enumerate() {
            let src = &dy.data()[t * d..(t + 1) * d];
            let dst = &mut self.table.grad.data_mut()[idx * d..(idx + 1) * d];
            for i in 0..d {
                dst[i] += src[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Causal self-attention
// ---------------------------------------------------------------------------

pub struct CausalSelfAttention {
    pub wq: Parameter, // (D, D)
    pub wk: Parameter,
    pub wv: Parameter,
    pub wo: Parameter,
    pub heads: usize,
}

pub struct AttentionCache {
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Row-softmaxed scores, (heads, T, T), zero above the diagonal.
    att: Vec<f32>,
    ctx: Tensor,
}

impl CausalSelfAttention {
    pub fn dim(&self) -> usize {
        self.wq.value.shape()[0]
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.heads
    }

    /// x: (T, D) -> (T, D). Position t attends to positions <= t only.
    pub fn forward(&self, x: &Tensor) -> (Tensor, AttentionCache) {
        let (t, d) = shape2(x);
        assert_eq!(d, self.dim(), "attention width mismatch");
        assert_eq!(d % self.heads, 0, "width must divide evenly into heads");
        let dh = self.head_dim();
        let scale = 1.0 / libm::sqrtf(dh as f32);

        let project = |w: &Parameter| -> Tensor {
            let mut out = Tensor::zeros(&[t, d]);
            gemm_nt(out.data_mut(), x.data(), w.value.data(), t, d, d);
            out
        };
        let q = project(&self.wq);
        let k = project(&self.wk);
        let v = project(&self.wv);

        let mut att = vec![0.0f32; self.heads * t * t];
        let mut ctx = Tensor::zeros(&[t, d]);
        for h in 0..self.heads {
            let off = h * dh;
            for i in 0..t {
                let qrow = &q.data()[i * d + off..i * d + off + dh];
                let arow = &mut att[h * t * t + i * t..h * t * t + (i + 1) * t];
                let mut max = f32::NEG_INFINITY;
                for j in 0..=i {
                    let krow = &k.data()[j * d + off..j * d + off + dh];
                    let mut s = 0.0f32;
                    for c in 0..dh {
                        s += qrow[c] * krow[c];
                    }
                    arow[j] = s * scale;
                    max = max.max(arow[j]);
                }
                let mut sum = 0.0f32;
                for j in 0..=i {
                    arow[j] = libm::expf(arow[j] - max);
                    sum += arow[j];
                }
                for j in 0..=i {
                    arow[j] /= sum;
                }
                let crow = &mut ctx.data_mut()[i * d + off..i * d + off + dh];
                for j in 0..=i {
                    let vrow = &v.data()[j * d + off..j * d + off + dh];
                    let a = arow[j];
                    for c in 0..dh {
                        crow[c] += a * vrow[c];
                    }
                }
            }
        }

        let mut y = Tensor::zeros(&[t, d]);
        gemm_nt(y.data_mut(), ctx.data(), self.wo.value.data(), t, d, d);
        (y, AttentionCache { q, k, v, att, ctx })
    }

    pub fn backward(&mut self, x: &Tensor, cache: &AttentionCache, dy: &Tensor) -> Tensor {
        let (t, d) = shape2(x);
        let dh = self.head_dim();
        let scale = 1.0 / libm::sqrtf(dh as f32);

        // Output projection.
        let mut dctx = Tensor::zeros(&[t, d]);
        gemm_nn(dctx.data_mut(), dy.data(), self.wo.value.data(), t, d, d);
        gemm_tn(self.wo.grad.data_mut(), dy.data(), cache.ctx.data(), t, d, d);

        let mut dq = Tensor::zeros(&[t, d]);
        let mut dk = Tensor::zeros(&[t, d]);
        let mut dv = Tensor::zeros(&[t, d]);
        let mut datt = vec![0.0f32; t];
        for h in 0..self.heads {
            let off = h * dh;
            for i in 0..t {
                let arow = &cache.att[h * t * t + i * t..h * t * t + (i + 1) * t];
                let dctx_row = &dctx.data()[i * d + off..i * d + off + dh];
                // datt and dv.
                let mut dot = 0.0f32;
                for j in 0..=i {
                    let vrow = &cache.v.data()[j * d + off..j * d + off + dh];
                    let mut s = 0.0f32;
                    for c in 0..dh {
                        s += dctx_row[c] * vrow[c];
                    }
                    datt[j] = s;
                    dot += arow[j] * s;
                    let dvrow = &mut dv.data_mut()[j * d + off..j * d + off + dh];
                    let a = arow[j];
                    for c in 0..dh {
                        dvrow[c] += a * dctx_row[c];
                    }
                }
                // Softmax backward, then scores -> q, k.
                for j in 0..=i {
                    let ds = arow[j] * (datt[j] - dot) * scale;
                    let krow = &cache.k.data()[j * d + off..j * d + off + dh];
                    let qrow = &cache.q.data()[i * d + off..i * d + off + dh];
                    let dqrow = &mut dq.data_mut()[i * d + off..i * d + off + dh];
                    for c in 0..dh {
                        dqrow[c] += ds * krow[c];
                    }
                    let dkrow = &mut dk.data_mut()[j * d + off..j * d + off + dh];
                    for c in 0..dh {
                        dkrow[c] += ds * qrow[c];
                    }
                }
            }
        }

        let mut dx = Tensor::zeros(&[t, d]);
        gemm_nn(dx.data_mut(), dq.data(), self.wq.value.data(), t, d, d);
        gemm_nn(dx.data_mut(), dk.data(), self.wk.value.data(), t, d, d);
        gemm_nn(dx.data_mut(), dv.data(), self.wv.value.data(), t, d, d);
        gemm_tn(self.wq.grad.data_mut(), dq.data(), x.data(), t, d, d);
        gemm_tn(self.wk.grad.data_mut(), dk.data(), x.data(), t, d, d);
        gemm_tn(self.wv.grad.data_mut(), dv.data(), x.data(), t, d, d);
        dx
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Numerically stable softmax of a vector.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out: Vec<f32> = logits.iter().map(|&z| libm::expf(z - max)).collect();
    let sum: f32 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Mean softmax cross-entropy over a (B, K) batch of logits.
/// Returns (loss, dlogits, correct-prediction count).
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> (f32, Tensor, usize) {
    let (b, k) = shape2(logits);
    assert_eq!(labels.len(), b);
    let mut dlogits = Tensor::zeros(&[b, k]);
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    let scale = 1.0 / b as f32;
    for bi in 0..b {
        let row = &logits.data()[bi * k..(bi + 1) * k];
        let label = labels[bi];
        assert!(label < k, "label out of range");
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for &z in row {
            sum += libm::expf(z - max);
        }
        let lse = max + libm::logf(sum);
        loss += (lse - row[label]) as f64;
        let drow = &mut dlogits.data_mut()[bi * k..(bi + 1) * k];
        for i in 0..k {
            let p = libm::expf(row[i] - max) / sum;
            drow[i] = (p - if i == label { 1.0 } else { 0.0 }) * scale;
        }
        let mut best = 0;
        for i in 1..k {
            if row[i] > row[best] {
                best = i;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    ((loss / b as f64) as f32, dlogits, correct)
}

/// [`cross_entropy`] over selected rows only: masked-out rows contribute
/// neither loss nor gradient. The mean runs over counted rows.
pub fn cross_entropy_masked(
    logits: &Tensor,
    labels: &[usize],
    keep: &[bool],
) -> (f32, Tensor, (usize, usize)) {
    let (n, k) = shape2(logits);
    assert_eq!(labels.len(), n);
    assert_eq!(keep.len(), n);
    let counted = keep.iter().filter(|&&m| m).count();
    assert!(counted > 0, "loss needs at least one unmasked row");
    let scale = 1.0 / counted as f32;
    let mut dlogits = Tensor::zeros(&[n, k]);
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    for i in 0..n {
        if !keep[i] {
            continue;
        }
        let row = &logits.data()[i * k..(i + 1) * k];
        let label = labels[i];
        assert!(label < k, "label out of range");
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for &z in row {
            sum += libm::expf(z - max);
        }
        loss += (max + libm::logf(sum) - row[label]) as f64;
        let drow = &mut dlogits.data_mut()[i * k..(i + 1) * k];
        for j in 0..k {
            let p = libm::expf(row[j] - max) / sum;
            drow[j] = (p - if j == label { 1.0 } else { 0.0 }) * scale;
        }
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    ((loss / counted as f64) as f32, dlogits, (correct, counted))
}

/// Per-cell softmax cross-entropy over (B, C, H, W) logits with u8 class
/// targets of shape (B, H, W). Masked-out cells contribute neither loss nor
/// gradient. Returns (mean loss, dlogits, (correct, counted)).
pub fn spatial_cross_entropy(
    logits: &Tensor,
    targets: &[u8],
    mask: Option<&[bool]>,
) -> (f32, Tensor, (usize, usize)) {
    let s = logits.shape();
    assert_eq!(s.len(), 4);
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let p = h * w;
    assert_eq!(targets.len(), b * p);
    if let Some(m) = mask {
        assert_eq!(m.len(), b * p);
    }
    let counted = mask.map_or(b * p, |m| m.iter().filter(|&&keep| keep).count());
    assert!(counted > 0, "loss needs at least one unmasked cell");
    let scale = 1.0 / counted as f32;

    let mut dlogits = Tensor::zeros(&[b, c, h, w]);
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    let mut probs = vec![0.0f32; c];
    for bi in 0..b {
        for cell in 0..p {
            if let Some(m) = mask {
                if !m[bi * p + cell] {
                    continue;
                }
            }
            let base = bi * c * p + cell;
            let label = targets[bi * p + cell] as usize;
            assert!(label < c, "target class out of range");
            let mut max = f32::NEG_INFINITY;
            for ch in 0..c {
                max = max.max(logits.data()[base + ch * p]);
            }
            let mut sum = 0.0f32;
            for ch in 0..c {
                let e = libm::expf(logits.data()[base + ch * p] - max);
                probs[ch] = e;
                sum += e;
            }
            let lse = max + libm::logf(sum);
            loss += (lse - logits.data()[base + label * p]) as f64;
            let mut best = 0;
            for ch in 1..c {
                if probs[ch] > probs[best] {
                    best = ch;
                }
            }
            if best == label {
                correct += 1;
            }
            for ch in 0..c {
                let p_ch = probs[ch] / sum;
                dlogits.data_mut()[base + ch * p] =
                    (p_ch - if ch == label { 1.0 } else { 0.0 }) * scale;
            }
        }
    }
    (
        (loss / counted as f64) as f32,
        dlogits,
        (correct, counted),
    )
}

/// Mean element-wise binary cross-entropy on logits (log-sum-exp form).
pub fn sigmoid_bce(logits: &Tensor, targets: &[f32]) -> (f32, Tensor) {
    assert_eq!(logits.len(), targets.len());
    let n = logits.len();
    let scale = 1.0 / n as f32;
    let mut dlogits = Tensor::zeros(logits.shape());
    let mut loss = 0.0f64;
    for i in 0..n {
        let z = logits.data()[i];
        let t = targets[i];
        let abs = if z < 0.0 { -z } else { z };
        loss += (z.max(0.0) - z * t + libm::logf(1.0 + libm::expf(-abs))) as f64;
        let sig = 1.0 / (1.0 + libm::expf(-z));
        dlogits.data_mut()[i] = (sig - t) * scale;
    }
    ((loss / n as f64) as f32, dlogits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init;
    use crate::rng::Rng;

    #[test]
    fn relu_definition() {
        let x = Tensor::from_vec(&[1, 3], vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        // Single channel, center tap 1: output == input.
        let mut w = Tensor::zeros(&[1, 1, 3, 3]);
        w.data_mut()[4] = 1.0;
        let conv = Conv2d {
            weight: Parameter::new("w", w),
            bias: Parameter::new("b", Tensor::zeros(&[1])),
        };
        let mut rng = Rng::new(4);
        let data: Vec<f32> = (0..25).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let x = Tensor::from_vec(&[1, 1, 5, 5], data.clone());
        let y = conv.forward(&x);
        for (a, b) in y.data().iter().zip(&data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn conv_all_ones_counts_neighbors() {
        let conv = Conv2d {
            weight: Parameter::new("w", Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9])),
            bias: Parameter::new("b", Tensor::zeros(&[1])),
        };
        let x = Tensor::from_vec(&[1, 1, 5, 5], vec![1.0; 25]);
        let y = conv.forward(&x);
        // Interior cells see the full 3x3 window, corners only 2x2.
        assert_eq!(y.data()[2 * 5 + 2], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[4], 4.0);
        assert_eq!(y.data()[1], 6.0);
    }

    #[test]
    fn dense_identity_maps_input() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let dense = Dense {
            weight: Parameter::new("w", w),
            bias: Parameter::new("b", Tensor::zeros(&[3])),
        };
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.5]);
        let y = dense.forward(&x);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = Rng::new(7);
        for _ in 0..50 {
            let logits: Vec<f32> = (0..9).map(|_| rng.uniform(-8.0, 8.0)).collect();
            let p = softmax(&logits);
            assert!(p.iter().all(|&v| v >= 0.0));
            let sum: f32 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_uniform_and_peaked() {
        let logits = Tensor::from_vec(&[1, 4], vec![0.0; 4]);
        let (loss, dl, _) = cross_entropy(&logits, &[1]);
        assert!((loss - libm::logf(4.0)).abs() < 1e-6);
        // Gradient sums to zero over classes.
        let s: f32 = dl.data().iter().sum();
        assert!(s.abs() < 1e-6);

        let peaked = Tensor::from_vec(&[1, 4], vec![10.0, 0.0, 0.0, 0.0]);
        let (loss, _, correct) = cross_entropy(&peaked, &[0]);
        assert!((loss - 1.36e-4).abs() < 1e-5, "loss {loss}");
        assert_eq!(correct, 1);
    }

    #[test]
    fn attention_single_token_is_self_only() {
        let mut rng = Rng::new(3);
        let d = 8;
        let attn = CausalSelfAttention {
            wq: Parameter::new("q", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wk: Parameter::new("k", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wv: Parameter::new("v", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wo: Parameter::new("o", init::kaiming_uniform(&mut rng, &[d, d], d)),
            heads: 2,
        };
        let x = Tensor::from_vec(&[1, d], (0..d).map(|i| i as f32 * 0.1).collect());
        let (y, cache) = attn.forward(&x);
        assert_eq!(y.shape(), &[1, d]);
        // With one token the attention weights are exactly 1.
        assert!(cache.att.iter().take(1).all(|&a| (a - 1.0).abs() < 1e-6));
    }

    #[test]
    fn attention_is_causal() {
        let mut rng = Rng::new(9);
        let (t, d) = (6, 16);
        let attn = CausalSelfAttention {
            wq: Parameter::new("q", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wk: Parameter::new("k", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wv: Parameter::new("v", init::kaiming_uniform(&mut rng, &[d, d], d)),
            wo: Parameter::new("o", init::kaiming_uniform(&mut rng, &[d, d], d)),
            heads: 4,
        };
        let data: Vec<f32> = (0..t * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let x = Tensor::from_vec(&[t, d], data.clone());
        let (y, _) = attn.forward(&x);
        // Perturb the final token; earlier outputs must be bit-identical.
        let mut data2 = data;
        for v in &mut data2[(t - 1) * d..] {
            *v += 0.5;
        }
        let x2 = Tensor::from_vec(&[t, d], data2);
        let (y2, _) = attn.forward(&x2);
        assert_eq!(
            &y.data()[..(t - 1) * d],
            &y2.data()[..(t - 1) * d],
            "future tokens leaked into the past"
        );
        assert_ne!(&y.data()[(t - 1) * d..], &y2.data()[(t - 1) * d..]);
    }

    #[test]
    fn spatial_ce_masks_cells_out() {
        let mut rng = Rng::new(5);
        let logits = Tensor::from_vec(
            &[1, 3, 2, 2],
            (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let targets = [0u8, 1, 2, 0];
        let mask = [true, false, true, true];
        let (_, dl, (.., counted)) = spatial_cross_entropy(&logits, &targets, Some(&mask));
        assert_eq!(counted, 3);
        // Masked cell gets zero gradient in every channel.
        for ch in 0..3 {
            assert_eq!(dl.data()[ch * 4 + 1], 0.0);
        }
    }

    #[test]
    fn bce_matches_closed_form_at_zero() {
        let logits = Tensor::from_vec(&[4], vec![0.0; 4]);
        let (loss, dl) = sigmoid_bce(&logits, &[0.0, 1.0, 0.0, 1.0]);
        assert!((loss - libm::logf(2.0)).abs() < 1e-6);
        assert!((dl.data()[0] - 0.125).abs() < 1e-6);
        assert!((dl.data()[1] + 0.125).abs() < 1e-6);
    }
}
