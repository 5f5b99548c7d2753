//! Finite-difference validation of every differentiable op.
//!
//! Each check rebuilds the op's forward pass as a naive f64 reference,
//! entirely separate from the optimized f32 kernels, and then
//!
//! 1. asserts the f32 forward agrees with the reference, and
//! 2. compares the f32 backward against central finite differences of the
//!    reference (h = 1e-3 by default).
//!
//! Running the differences in f64 keeps the quotient noise around 1e-6, so
//! the 1e-3 tolerance genuinely measures the backward implementation.
//! Relative error uses an absolute floor: |fd - an| / max(|fd|, |an|, 1e-2).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ops::{
    cross_entropy, sigmoid_bce, spatial_cross_entropy, CausalSelfAttention, Conv2d, Dense,
    Embedding, LayerNorm,
};
use super::{Parameter, Tensor};
use crate::rng::Rng;

pub const DEFAULT_H: f64 = 1e-3;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct OpReport {
    pub name: &'static str,
    pub seeds: usize,
    /// Worst relative error between analytic and finite-difference grads.
    pub max_rel_err: f64,
    /// Worst forward gap between the f32 op and the f64 reference.
    pub forward_gap: f64,
}

impl OpReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance && self.forward_gap < tolerance
    }

    pub fn summary(&self) -> String {
        format!(
            "{:<24} rel_err {:.3e}  fwd_gap {:.3e}",
            self.name, self.max_rel_err, self.forward_gap
        )
    }
}

/// Central finite differences of `eval` at `x0` against `analytic`.
fn fd_max_rel_err(eval: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], analytic: &[f32], h: f64) -> f64 {
    assert_eq!(x0.len(), analytic.len());
    let mut xs = x0.to_vec();
    let mut worst = 0.0f64;
    for i in 0..xs.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = eval(&xs);
        xs[i] = orig - h;
        let fm = eval(&xs);
        xs[i] = orig;
        let fd = (fp - fm) / (2.0 * h);
        let an = analytic[i] as f64;
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-2);
        worst = worst.max(err);
    }
    worst
}

fn rand_vec(rng: &mut Rng, len: usize, scale: f32) -> Vec<f32> {
    (0..len).map(|_| rng.uniform(-scale, scale)).collect()
}

fn to_f64(xs: &[f32]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

fn weighted_sum(y: &[f32], w: &[f32]) -> f64 {
    y.iter().zip(w).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn max_gap(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| ((x as f64) - y).abs())
        .fold(0.0, f64::max)
}

// --- f64 reference forwards ------------------------------------------------

fn conv_ref(x: &[f64], w: &[f64], b: &[f64], cin: usize, cout: usize, h: usize, wd: usize) -> Vec<f64> {
    let mut y = vec![0.0f64; cout * h * wd];
    for co in 0..cout {
        for yy in 0..h {
            for xx in 0..wd {
                let mut sum = b[co];
                for ci in 0..cin {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let sy = yy as i32 + ky as i32 - 1;
                            let sx = xx as i32 + kx as i32 - 1;
                            if sy < 0 || sx < 0 || sy >= h as i32 || sx >= wd as i32 {
                                continue;
                            }
                            sum += x[ci * h * wd + sy as usize * wd + sx as usize]
                                * w[((co * cin + ci) * 3 + ky) * 3 + kx];
                        }
                    }
                }
                y[co * h * wd + yy * wd + xx] = sum;
            }
        }
    }
    y
}

fn dense_ref(x: &[f64], w: &[f64], b: &[f64], batch: usize, input: usize, out: usize) -> Vec<f64> {
    let mut y = vec![0.0f64; batch * out];
    for bi in 0..batch {
        for o in 0..out {
            let mut sum = b[o];
            for i in 0..input {
                sum += x[bi * input + i] * w[o * input + i];
            }
            y[bi * out + o] = sum;
        }
    }
    y
}

fn layer_norm_ref(x: &[f64], gamma: &[f64], beta: &[f64], t: usize, d: usize) -> Vec<f64> {
    let mut y = vec![0.0f64; t * d];
    for ti in 0..t {
        let row = &x[ti * d..(ti + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + super::ops::LAYER_NORM_EPS as f64).sqrt();
        for i in 0..d {
            y[ti * d + i] = (row[i] - mean) * inv * gamma[i] + beta[i];
        }
    }
    y
}

fn attention_ref(
    x: &[f64],
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
    t: usize,
    d: usize,
    heads: usize,
) -> Vec<f64> {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let project = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0f64; t * d];
        for ti in 0..t {
            for o in 0..d {
                let mut sum = 0.0;
                for i in 0..d {
                    sum += x[ti * d + i] * w[o * d + i];
                }
                out[ti * d + o] = sum;
            }
        }
        out
    };
    let (q, k, v) = (project(wq), project(wk), project(wv));
    let mut ctx = vec![0.0f64; t * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..t {
            let mut scores = vec![0.0f64; i + 1];
            let mut max = f64::NEG_INFINITY;
            for (j, s) in scores.iter_mut().enumerate() {
                let mut dot = 0.0;
                for c in 0..dh {
                    dot += q[i * d + off + c] * k[j * d + off + c];
                }
                *s = dot * scale;
                max = max.max(*s);
            }
            let mut sum = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for (j, s) in scores.iter().enumerate() {
                let a = s / sum;
                for c in 0..dh {
                    ctx[i * d + off + c] += a * v[j * d + off + c];
                }
            }
        }
    }
    let mut y = vec![0.0f64; t * d];
    for ti in 0..t {
        for o in 0..d {
            let mut sum = 0.0;
            for i in 0..d {
                sum += ctx[ti * d + i] * wo[o * d + i];
            }
            y[ti * d + o] = sum;
        }
    }
    y
}

fn cross_entropy_ref(logits: &[f64], labels: &[usize], k: usize) -> f64 {
    let b = labels.len();
    let mut loss = 0.0;
    for bi in 0..b {
        let row = &logits[bi * k..(bi + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[labels[bi]];
    }
    loss / b as f64
}

// --- per-op checks ----------------------------------------------------------

fn check_conv(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (cin, cout, hh, ww) = (2usize, 3usize, 4usize, 4usize);
    let x = rand_vec(rng, cin * hh * ww, 1.0);
    let w = rand_vec(rng, cout * cin * 9, 0.5);
    let b = rand_vec(rng, cout, 0.5);
    let up = rand_vec(rng, cout * hh * ww, 1.0);

    let mut conv = Conv2d {
        weight: Parameter::new("w", Tensor::from_vec(&[cout, cin, 3, 3], w.clone())),
        bias: Parameter::new("b", Tensor::from_vec(&[cout], b.clone())),
    };
    let xt = Tensor::from_vec(&[1, cin, hh, ww], x.clone());
    let y = conv.forward(&xt);
    let dx = conv.backward(&xt, &Tensor::from_vec(&[1, cout, hh, ww], up.clone()));

    let gap = max_gap(y.data(), &conv_ref(&to_f64(&x), &to_f64(&w), &to_f64(&b), cin, cout, hh, ww));

    // Analytic gradient of sum(up * y) for all three input groups at once.
    let analytic: Vec<f32> = dx
        .data()
        .iter()
        .chain(conv.weight.grad.data())
        .chain(conv.bias.grad.data())
        .copied()
        .collect();
    let x0: Vec<f64> = to_f64(&x)
        .into_iter()
        .chain(to_f64(&w))
        .chain(to_f64(&b))
        .collect();
    let (nx, nw) = (x.len(), w.len());
    let mut eval = |vars: &[f64]| {
        let y = conv_ref(&vars[..nx], &vars[nx..nx + nw], &vars[nx + nw..], cin, cout, hh, ww);
        y.iter().zip(&up).map(|(&a, &b)| a * b as f64).sum()
    };
    (fd_max_rel_err(&mut eval, &x0, &analytic, h), gap)
}

fn check_dense(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (batch, input, out) = (3usize, 5usize, 4usize);
    let x = rand_vec(rng, batch * input, 1.0);
    let w = rand_vec(rng, out * input, 0.7);
    let b = rand_vec(rng, out, 0.5);
    let up = rand_vec(rng, batch * out, 1.0);

    let mut dense = Dense {
        weight: Parameter::new("w", Tensor::from_vec(&[out, input], w.clone())),
        bias: Parameter::new("b", Tensor::from_vec(&[out], b.clone())),
    };
    let xt = Tensor::from_vec(&[batch, input], x.clone());
    let y = dense.forward(&xt);
    let dx = dense.backward(&xt, &Tensor::from_vec(&[batch, out], up.clone()));

    let gap = max_gap(y.data(), &dense_ref(&to_f64(&x), &to_f64(&w), &to_f64(&b), batch, input, out));
    let analytic: Vec<f32> = dx
        .data()
        .iter()
        .chain(dense.weight.grad.data())
        .chain(dense.bias.grad.data())
        .copied()
        .collect();
    let x0: Vec<f64> = to_f64(&x)
        .into_iter()
        .chain(to_f64(&w))
        .chain(to_f64(&b))
        .collect();
    let (nx, nw) = (x.len(), w.len());
    let mut eval = |vars: &[f64]| {
        let y = dense_ref(&vars[..nx], &vars[nx..nx + nw], &vars[nx + nw..], batch, input, out);
        y.iter().zip(&up).map(|(&a, &b)| a * b as f64).sum()
    };
    (fd_max_rel_err(&mut eval, &x0, &analytic, h), gap)
}

fn check_relu(rng: &mut Rng, h: f64) -> (f64, f64) {
    // Keep inputs away from the kink at zero.
    let x: Vec<f32> = (0..12)
        .map(|_| {
            let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            sign * rng.uniform(0.1, 1.0)
        })
        .collect();
    let up = rand_vec(rng, 12, 1.0);
    let xt = Tensor::from_vec(&[1, 12], x.clone());
    let y = super::ops::relu(&xt);
    let dx = super::ops::relu_backward(&y, &Tensor::from_vec(&[1, 12], up.clone()));
    let reference: Vec<f64> = x.iter().map(|&v| (v as f64).max(0.0)).collect();
    let gap = max_gap(y.data(), &reference);
    let mut eval = |vars: &[f64]| -> f64 {
        vars.iter()
            .zip(&up)
            .map(|(&v, &w)| v.max(0.0) * w as f64)
            .sum()
    };
    (fd_max_rel_err(&mut eval, &to_f64(&x), dx.data(), h), gap)
}

fn check_layer_norm(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (t, d) = (3usize, 6usize);
    let x = rand_vec(rng, t * d, 1.0);
    let gamma = rand_vec(rng, d, 1.0);
    let beta = rand_vec(rng, d, 0.5);
    let up = rand_vec(rng, t * d, 1.0);

    let mut ln = LayerNorm {
        gamma: Parameter::new("g", Tensor::from_vec(&[d], gamma.clone())),
        beta: Parameter::new("b", Tensor::from_vec(&[d], beta.clone())),
    };
    let xt = Tensor::from_vec(&[t, d], x.clone());
    let (y, cache) = ln.forward(&xt);
    let dx = ln.backward(&cache, &Tensor::from_vec(&[t, d], up.clone()));

    let gap = max_gap(y.data(), &layer_norm_ref(&to_f64(&x), &to_f64(&gamma), &to_f64(&beta), t, d));
    let analytic: Vec<f32> = dx
        .data()
        .iter()
        .chain(ln.gamma.grad.data())
        .chain(ln.beta.grad.data())
        .copied()
        .collect();
    let x0: Vec<f64> = to_f64(&x)
        .into_iter()
        .chain(to_f64(&gamma))
        .chain(to_f64(&beta))
        .collect();
    let nx = x.len();
    let mut eval = |vars: &[f64]| {
        let y = layer_norm_ref(&vars[..nx], &vars[nx..nx + d], &vars[nx + d..], t, d);
        y.iter().zip(&up).map(|(&a, &b)| a * b as f64).sum()
    };
    (fd_max_rel_err(&mut eval, &x0, &analytic, h), gap)
}

fn check_embedding(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (vocab, d) = (5usize, 4usize);
    let table = rand_vec(rng, vocab * d, 1.0);
    let indices = [0usize, 2, 2, 4, 1];
    let up = rand_vec(rng, indices.len() * d, 1.0);

    let mut emb = Embedding {
        table: Parameter::new("e", Tensor::from_vec(&[vocab, d], table.clone())),
    };
    let y = emb.forward(&indices);
    emb.backward(&indices, &Tensor::from_vec(&[indices.len(), d], up.clone()));

    let reference: Vec<f64> = indices
        .iter()
        .flat_map(|&i| table[i * d..(i + 1) * d].iter().map(|&v| v as f64))
        .collect();
    let gap = max_gap(y.data(), &reference);
    let mut eval = |vars: &[f64]| -> f64 {
        let mut sum = 0.0;
        for (t, &i) in indices.iter().enumerate() {
            for c in 0..d {
                sum += vars[i * d + c] * up[t * d + c] as f64;
            }
        }
        sum
    };
    (
        fd_max_rel_err(&mut eval, &to_f64(&table), emb.table.grad.data(), h),
        gap,
    )
}

fn check_attention(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (t, d, heads) = (4usize, 8usize, 2usize);
    let x = rand_vec(rng, t * d, 1.0);
    let wq = rand_vec(rng, d * d, 0.4);
    let wk = rand_vec(rng, d * d, 0.4);
    let wv = rand_vec(rng, d * d, 0.4);
    let wo = rand_vec(rng, d * d, 0.4);
    let up = rand_vec(rng, t * d, 1.0);

    let mut attn = CausalSelfAttention {
        wq: Parameter::new("q", Tensor::from_vec(&[d, d], wq.clone())),
        wk: Parameter::new("k", Tensor::from_vec(&[d, d], wk.clone())),
        wv: Parameter::new("v", Tensor::from_vec(&[d, d], wv.clone())),
        wo: Parameter::new("o", Tensor::from_vec(&[d, d], wo.clone())),
        heads,
    };
    let xt = Tensor::from_vec(&[t, d], x.clone());
    let (y, cache) = attn.forward(&xt);
    let dx = attn.backward(&xt, &cache, &Tensor::from_vec(&[t, d], up.clone()));

    let gap = max_gap(
        y.data(),
        &attention_ref(&to_f64(&x), &to_f64(&wq), &to_f64(&wk), &to_f64(&wv), &to_f64(&wo), t, d, heads),
    );
    let analytic: Vec<f32> = dx
        .data()
        .iter()
        .chain(attn.wq.grad.data())
        .chain(attn.wk.grad.data())
        .chain(attn.wv.grad.data())
        .chain(attn.wo.grad.data())
        .copied()
        .collect();
    let x0: Vec<f64> = [&x[..], &wq, &wk, &wv, &wo]
        .iter()
        .flat_map(|s| s.iter().map(|&v| v as f64))
        .collect();
    let (nx, nw) = (t * d, d * d);
    let mut eval = |vars: &[f64]| {
        let y = attention_ref(
            &vars[..nx],
            &vars[nx..nx + nw],
            &vars[nx + nw..nx + 2 * nw],
            &vars[nx + 2 * nw..nx + 3 * nw],
            &vars[nx + 3 * nw..],
            t,
            d,
            heads,
        );
        y.iter().zip(&up).map(|(&a, &b)| a * b as f64).sum()
    };
    (fd_max_rel_err(&mut eval, &x0, &analytic, h), gap)
}

fn check_cross_entropy(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (b, k) = (4usize, 5usize);
    let logits = rand_vec(rng, b * k, 2.0);
    let labels: Vec<usize> = (0..b).map(|_| rng.index(k)).collect();
    let lt = Tensor::from_vec(&[b, k], logits.clone());
    let (loss, dlogits, _) = cross_entropy(&lt, &labels);
    let gap = (loss as f64 - cross_entropy_ref(&to_f64(&logits), &labels, k)).abs();
    let mut eval = |vars: &[f64]| cross_entropy_ref(vars, &labels, k);
    (
        fd_max_rel_err(&mut eval, &to_f64(&logits), dlogits.data(), h),
        gap,
    )
}

fn check_spatial_cross_entropy(rng: &mut Rng, h: f64) -> (f64, f64) {
    let (b, c, hh, ww) = (2usize, 4usize, 3usize, 3usize);
    let logits = rand_vec(rng, b * c * hh * ww, 2.0);
    let p = hh * ww;
    let targets: Vec<u8> = (0..b * p).map(|_| rng.index(c) as u8).collect();
    let mask: Vec<bool> = (0..b * p).map(|_| rng.bernoulli(0.8)).collect();
    let mask = if mask.iter().any(|&m| m) {
        mask
    } else {
        vec![true; b * p]
    };
    let lt = Tensor::from_vec(&[b, c, hh, ww], logits.clone());
    let (loss, dlogits, _) = spatial_cross_entropy(&lt, &targets, Some(&mask));

    let reference = |vars: &[f64]| -> f64 {
        let mut total = 0.0;
        let mut counted = 0usize;
        for bi in 0..b {
            for cell in 0..p {
                if !mask[bi * p + cell] {
                    continue;
                }
                counted += 1;
                let base = bi * c * p + cell;
                let row: Vec<f64> = (0..c).map(|ch| vars[base + ch * p]).collect();
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                total += lse - row[targets[bi * p + cell] as usize];
            }
        }
        total / counted as f64
    };
    let gap = (loss as f64 - reference(&to_f64(&logits))).abs();
    let mut eval = |vars: &[f64]| reference(vars);
    (
        fd_max_rel_err(&mut eval, &to_f64(&logits), dlogits.data(), h),
        gap,
    )
}

fn check_sigmoid_bce(rng: &mut Rng, h: f64) -> (f64, f64) {
    let n = 10usize;
    let logits = rand_vec(rng, n, 2.0);
    let targets: Vec<f32> = (0..n).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
    let lt = Tensor::from_vec(&[n], logits.clone());
    let (loss, dlogits) = sigmoid_bce(&lt, &targets);
    let reference = |vars: &[f64]| -> f64 {
        vars.iter()
            .zip(&targets)
            .map(|(&z, &t)| z.max(0.0) - z * t as f64 + (1.0 + (-z.abs()).exp()).ln())
            .sum::<f64>()
            / n as f64
    };
    let gap = (loss as f64 - reference(&to_f64(&logits))).abs();
    let mut eval = |vars: &[f64]| reference(vars);
    (
        fd_max_rel_err(&mut eval, &to_f64(&logits), dlogits.data(), h),
        gap,
    )
}

/// Run every op check over `seeds` random instances each.
pub fn run_all(seeds: usize, h: f64) -> Vec<OpReport> {
    type CheckFn = fn(&mut Rng, f64) -> (f64, f64);
    let checks: [(&'static str, CheckFn); 9] = [
        ("conv2d", check_conv),
        ("dense", check_dense),
        ("relu", check_relu),
        ("layer_norm", check_layer_norm),
        ("embedding", check_embedding),
        ("causal_self_attention", check_attention),
        ("softmax_cross_entropy", check_cross_entropy),
        ("spatial_cross_entropy", check_spatial_cross_entropy),
        ("sigmoid_bce", check_sigmoid_bce),
    ];
    checks
        .iter()
        .map(|&(name, check)| {
            let mut max_rel_err = 0.0f64;
            let mut forward_gap = 0.0f64;
            for seed in 0..seeds {
                let mut rng = Rng::new(seed as u64).derive(0x47524144); // "GRAD"
                let (err, gap) = check(&mut rng, h);
                max_rel_err = max_rel_err.max(err);
                forward_gap = forward_gap.max(gap);
            }
            OpReport {
                name,
                seeds,
                max_rel_err,
                forward_gap,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ops_pass_fd_checks() {
        for report in run_all(20, DEFAULT_H) {
            assert!(
                report.passes(DEFAULT_TOLERANCE),
                "{} failed: {}",
                report.name,
                report.summary()
            );
        }
    }
}
