//! Model families for the imitation learners.
//!
//! - [`BcPolicy`]: conv trunk + MLP head over action logits (vanilla and
//!   augmented behavioral cloning).
//! - [`AuxBcPolicy`]: shared trunk with an action head plus a per-cell
//!   token head predicting the expert's final search grid.
//! - [`PcCiModel`]: one conv network serving every step of the
//!   conditionally independent procedure factorization; input is the state
//!   image concatenated with the previous snapshot's token planes, output
//!   is per-cell token logits.
//! - [`PcArModel`]: conv encoder, goal-image decoder, and a small causal
//!   transformer that emits the reversed expert action sequence, executed
//!   action last.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bfs::TOKEN_COUNT;
use crate::nn::init;
use crate::nn::ops::{
    relu, relu_backward, AttentionCache, CausalSelfAttention, Conv2d, Dense, Embedding, LayerNorm,
    LayerNormCache,
};
use crate::nn::{Parameter, Tensor};
use crate::rng::Rng;

fn conv_layer(rng: &mut Rng, name: String, cin: usize, cout: usize) -> Conv2d {
    Conv2d {
        weight: Parameter::new(
            format!("{name}.weight"),
            init::kaiming_uniform(rng, &[cout, cin, 3, 3], cin * 9),
        ),
        bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[cout])),
    }
}

fn dense_layer(rng: &mut Rng, name: String, input: usize, out: usize) -> Dense {
    Dense {
        weight: Parameter::new(
            format!("{name}.weight"),
            init::kaiming_uniform(rng, &[out, input], input),
        ),
        bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[out])),
    }
}

fn layer_norm(name: String, dim: usize) -> LayerNorm {
    LayerNorm {
        gamma: Parameter::new(format!("{name}.gamma"), Tensor::from_vec(&[dim], vec![1.0; dim])),
        beta: Parameter::new(format!("{name}.beta"), Tensor::zeros(&[dim])),
    }
}

fn reshape(t: &Tensor, shape: &[usize]) -> Tensor {
    Tensor::from_vec(shape, t.data().to_vec())
}

// ---------------------------------------------------------------------------
// Conv trunk and MLP building blocks
// ---------------------------------------------------------------------------

/// Stack of 3x3 SAME convolutions, each followed by ReLU.
pub struct ConvTrunk {
    pub layers: Vec<Conv2d>,
}

pub struct TrunkCache {
    /// acts[0] is the input; acts[i] the ReLU output of layer i-1.
    acts: Vec<Tensor>,
}

impl TrunkCache {
    pub fn output(&self) -> &Tensor {
        self.acts.last().unwrap()
    }
}

impl ConvTrunk {
    pub fn new(rng: &mut Rng, prefix: &str, in_channels: usize, widths: &[usize]) -> ConvTrunk {
        assert!(!widths.is_empty());
        let mut layers = Vec::with_capacity(widths.len());
        let mut cin = in_channels;
        for (i, &cout) in widths.iter().enumerate() {
            layers.push(conv_layer(rng, format!("{prefix}.conv{i}"), cin, cout));
            cin = cout;
        }
        ConvTrunk { layers }
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().unwrap().output_channels()
    }

    pub fn forward(&self, x: &Tensor) -> TrunkCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let z = layer.forward(acts.last().unwrap());
            acts.push(relu(&z));
        }
        TrunkCache { acts }
    }

    pub fn backward(&mut self, cache: &TrunkCache, dy: Tensor) -> Tensor {
        let mut grad = dy;
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let dz = relu_backward(&cache.acts[i + 1], &grad);
            grad = layer.backward(&cache.acts[i], &dz);
        }
        grad
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// Dense stack with ReLU between layers (none after the last).
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub struct MlpCache {
    /// Inputs to each layer (element i feeds layer i).
    xs: Vec<Tensor>,
}

impl Mlp {
    pub fn new(rng: &mut Rng, prefix: &str, input: usize, hidden: &[usize], out: usize) -> Mlp {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(out);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| dense_layer(rng, format!("{prefix}.fc{i}"), pair[0], pair[1]))
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, MlpCache) {
        let mut xs = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(xs.last().unwrap());
            if i < last {
                xs.push(relu(&z));
            } else {
                return (z, MlpCache { xs });
            }
        }
        unreachable!()
    }

    pub fn backward(&mut self, cache: &MlpCache, dlogits: &Tensor) -> Tensor {
        let last = self.layers.len() - 1;
        let mut grad = dlogits.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            if i < last {
                grad = relu_backward(&cache.xs[i + 1], &grad);
            }
            grad = layer.backward(&cache.xs[i], &grad);
        }
        grad
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

// ---------------------------------------------------------------------------
// BC policy
// ---------------------------------------------------------------------------

pub struct BcPolicy {
    pub trunk: ConvTrunk,
    pub head: Mlp,
    channels: usize,
    height: usize,
    width: usize,
}

pub struct BcCache {
    trunk: TrunkCache,
    head: MlpCache,
}

impl BcPolicy {
    pub fn new(
        rng: &mut Rng,
        channels: usize,
        height: usize,
        width: usize,
        actions: usize,
        conv_widths: &[usize],
        mlp_hidden: &[usize],
    ) -> BcPolicy {
        let trunk = ConvTrunk::new(rng, "trunk", channels, conv_widths);
        let head = Mlp::new(
            rng,
            "head",
            trunk.out_channels() * height * width,
            mlp_hidden,
            actions,
        );
        BcPolicy {
            trunk,
            head,
            channels,
            height,
            width,
        }
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// states: (B, C, H, W) -> action logits (B, A).
    pub fn forward(&self, states: &Tensor) -> (Tensor, BcCache) {
        let trunk = self.trunk.forward(states);
        let b = states.shape()[0];
        let feat = reshape(
            trunk.output(),
            &[b, self.trunk.out_channels() * self.height * self.width],
        );
        let (logits, head) = self.head.forward(&feat);
        (logits, BcCache { trunk, head })
    }

    pub fn backward(&mut self, cache: &BcCache, dlogits: &Tensor) {
        let dfeat = self.head.backward(&cache.head, dlogits);
        let b = dfeat.shape()[0];
        let dfeat = reshape(
            &dfeat,
            &[b, self.trunk.out_channels(), self.height, self.width],
        );
        self.trunk.backward(&cache.trunk, dfeat);
    }

    /// Greedy action for one state image.
    pub fn act(&self, state: &[f32]) -> usize {
        let x = Tensor::from_vec(&[1, self.channels, self.height, self.width], state.to_vec());
        let (logits, _) = self.forward(&x);
        logits.argmax()
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut p = self.trunk.params();
        p.extend(self.head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.trunk.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

// ---------------------------------------------------------------------------
// Aux-BC policy
// ---------------------------------------------------------------------------

pub struct AuxBcPolicy {
    pub trunk: ConvTrunk,
    pub action_head: Mlp,
    pub aux_head: Conv2d,
    channels: usize,
    height: usize,
    width: usize,
}

pub struct AuxBcCache {
    trunk: TrunkCache,
    head: MlpCache,
}

impl AuxBcPolicy {
    /// Construction draws the shared trunk and action head from the stream
    /// in the same order as [`BcPolicy::new`], then the auxiliary head, so
    /// the shared parameters start from identical values.
    pub fn new(
        rng: &mut Rng,
        channels: usize,
        height: usize,
        width: usize,
        actions: usize,
        conv_widths: &[usize],
        mlp_hidden: &[usize],
    ) -> AuxBcPolicy {
        let trunk = ConvTrunk::new(rng, "trunk", channels, conv_widths);
        let action_head = Mlp::new(
            rng,
            "head",
            trunk.out_channels() * height * width,
            mlp_hidden,
            actions,
        );
        let aux_head = conv_layer(rng, String::from("aux"), trunk.out_channels(), TOKEN_COUNT);
        AuxBcPolicy {
            trunk,
            action_head,
            aux_head,
            channels,
            height,
            width,
        }
    }

    /// states: (B, C, H, W) -> (action logits (B, A), token logits
    /// (B, 9, H, W)).
    pub fn forward(&self, states: &Tensor) -> (Tensor, Tensor, AuxBcCache) {
        let trunk = self.trunk.forward(states);
        let b = states.shape()[0];
        let feat = reshape(
            trunk.output(),
            &[b, self.trunk.out_channels() * self.height * self.width],
        );
        let (logits, head) = self.action_head.forward(&feat);
        let aux_logits = self.aux_head.forward(trunk.output());
        (logits, aux_logits, AuxBcCache { trunk, head })
    }

    /// Both heads feed the shared trunk; the action path always
    /// accumulates first so lambda = 0 reproduces the plain BC run.
    pub fn backward(&mut self, cache: &AuxBcCache, dlogits: &Tensor, daux: &Tensor) {
        let dfeat = self.action_head.backward(&cache.head, dlogits);
        let b = dfeat.shape()[0];
        let mut dfeat = reshape(
            &dfeat,
            &[b, self.trunk.out_channels(), self.height, self.width],
        );
        let daux_feat = self.aux_head.backward(cache.trunk.output(), daux);
        for (a, &d) in dfeat.data_mut().iter_mut().zip(daux_feat.data()) {
            *a += d;
        }
        self.trunk.backward(&cache.trunk, dfeat);
    }

    pub fn act(&self, state: &[f32]) -> usize {
        let x = Tensor::from_vec(&[1, self.channels, self.height, self.width], state.to_vec());
        let (logits, _, _) = self.forward(&x);
        logits.argmax()
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut p = self.trunk.params();
        p.extend(self.action_head.params());
        p.push(&self.aux_head.weight);
        p.push(&self.aux_head.bias);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.trunk.params_mut();
        p.extend(self.action_head.params_mut());
        p.push(&mut self.aux_head.weight);
        p.push(&mut self.aux_head.bias);
        p
    }
}

// ---------------------------------------------------------------------------
// Conditionally independent procedure model
// ---------------------------------------------------------------------------

pub struct PcCiModel {
    pub trunk: ConvTrunk,
    pub head: Conv2d,
    height: usize,
    width: usize,
}

pub struct PcCiCache {
    trunk: TrunkCache,
}

impl PcCiModel {
    pub fn new(rng: &mut Rng, height: usize, width: usize, conv_widths: &[usize]) -> PcCiModel {
        let trunk = ConvTrunk::new(
            rng,
            "trunk",
            super::data::PC_CI_CHANNELS,
            conv_widths,
        );
        let head = conv_layer(rng, String::from("head"), trunk.out_channels(), TOKEN_COUNT);
        PcCiModel {
            trunk,
            head,
            height,
            width,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// inputs: (B, 12, H, W) -> per-cell token logits (B, 9, H, W).
    pub fn forward(&self, inputs: &Tensor) -> (Tensor, PcCiCache) {
        let trunk = self.trunk.forward(inputs);
        let logits = self.head.forward(trunk.output());
        (logits, PcCiCache { trunk })
    }

    pub fn backward(&mut self, cache: &PcCiCache, dlogits: &Tensor) {
        let dfeat = self.head.backward(cache.trunk.output(), dlogits);
        self.trunk.backward(&cache.trunk, dfeat);
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut p = self.trunk.params();
        p.push(&self.head.weight);
        p.push(&self.head.bias);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.trunk.params_mut();
        p.push(&mut self.head.weight);
        p.push(&mut self.head.bias);
        p
    }
}

// ---------------------------------------------------------------------------
// Autoregressive procedure model
// ---------------------------------------------------------------------------

struct Block {
    ln1: LayerNorm,
    attn: CausalSelfAttention,
    ln2: LayerNorm,
    fc1: Dense,
    fc2: Dense,
}

struct BlockCache {
    x: Tensor,
    ln1: LayerNormCache,
    n1: Tensor,
    attn: AttentionCache,
    x2: Tensor,
    ln2: LayerNormCache,
    n2: Tensor,
    h: Tensor,
}

impl Block {
    fn new(rng: &mut Rng, prefix: &str, dim: usize, heads: usize) -> Block {
        Block {
            ln1: layer_norm(format!("{prefix}.ln1"), dim),
            attn: CausalSelfAttention {
                wq: Parameter::new(
                    format!("{prefix}.attn.wq"),
                    init::kaiming_uniform(rng, &[dim, dim], dim),
                ),
                wk: Parameter::new(
                    format!("{prefix}.attn.wk"),
                    init::kaiming_uniform(rng, &[dim, dim], dim),
                ),
                wv: Parameter::new(
                    format!("{prefix}.attn.wv"),
                    init::kaiming_uniform(rng, &[dim, dim], dim),
                ),
                wo: Parameter::new(
                    format!("{prefix}.attn.wo"),
                    init::kaiming_uniform(rng, &[dim, dim], dim),
                ),
                heads,
            },
            ln2: layer_norm(format!("{prefix}.ln2"), dim),
            fc1: dense_layer(rng, format!("{prefix}.fc1"), dim, 4 * dim),
            fc2: dense_layer(rng, format!("{prefix}.fc2"), 4 * dim, dim),
        }
    }

    /// Pre-norm residual block: x + attn(ln1(x)), then x + mlp(ln2(x)).
    fn forward(&self, x: &Tensor) -> (Tensor, BlockCache) {
        let (n1, ln1) = self.ln1.forward(x);
        let (a, attn) = self.attn.forward(&n1);
        let mut x2 = x.clone();
        for (v, &d) in x2.data_mut().iter_mut().zip(a.data()) {
            *v += d;
        }
        let (n2, ln2) = self.ln2.forward(&x2);
        let h = relu(&self.fc1.forward(&n2));
        let m = self.fc2.forward(&h);
        let mut y = x2.clone();
        for (v, &d) in y.data_mut().iter_mut().zip(m.data()) {
            *v += d;
        }
        (
            y,
            BlockCache {
                x: x.clone(),
                ln1,
                n1,
                attn,
                x2,
                ln2,
                n2,
                h,
            },
        )
    }

    fn backward(&mut self, cache: &BlockCache, dy: &Tensor) -> Tensor {
        // MLP branch.
        let dh = self.fc2.backward(&cache.h, dy);
        let dz = relu_backward(&cache.h, &dh);
        let dn2 = self.fc1.backward(&cache.n2, &dz);
        let mut dx2 = dy.clone();
        let dn2x = self.ln2.backward(&cache.ln2, &dn2);
        for (v, &d) in dx2.data_mut().iter_mut().zip(dn2x.data()) {
            *v += d;
        }
        // Attention branch.
        let dn1 = self.attn.backward(&cache.n1, &cache.attn, &dx2);
        let mut dx = dx2;
        let dn1x = self.ln1.backward(&cache.ln1, &dn1);
        for (v, &d) in dx.data_mut().iter_mut().zip(dn1x.data()) {
            *v += d;
        }
        dx
    }

    fn params(&self) -> Vec<&Parameter> {
        vec![
            &self.ln1.gamma,
            &self.ln1.beta,
            &self.attn.wq,
            &self.attn.wk,
            &self.attn.wv,
            &self.attn.wo,
            &self.ln2.gamma,
            &self.ln2.beta,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.ln1.gamma,
            &mut self.ln1.beta,
            &mut self.attn.wq,
            &mut self.attn.wk,
            &mut self.attn.wv,
            &mut self.attn.wo,
            &mut self.ln2.gamma,
            &mut self.ln2.beta,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]
    }
}

/// Goal-conditioned autoregressive action-sequence model.
///
/// Sequence layout for plan depth D: position 0 carries the state/goal
/// conditioning token, positions 1..D carry embeddings of the previous
/// reversed-plan action. The head's output at position t is the logit row
/// for reversed action t, so position D-1 predicts the executed action.
pub struct PcArModel {
    pub encoder: ConvTrunk,
    pub goal_head: Conv2d,
    pub state_proj: Dense,
    pub goal_proj: Dense,
    pub embed: Embedding,
    pub pos: Parameter,
    blocks: Vec<Block>,
    pub final_ln: LayerNorm,
    pub action_head: Dense,
    channels: usize,
    height: usize,
    width: usize,
    plan_depth: usize,
    goals: usize,
    dim: usize,
}

pub struct PcArCache {
    trunk: TrunkCache,
    flat_feat: Tensor,
    goal_inputs: Tensor,
    samples: Vec<SampleCache>,
}

struct SampleCache {
    tokens: Vec<usize>,
    u: Tensor,
    blocks: Vec<BlockCache>,
    final_ln: LayerNormCache,
    normed: Tensor,
}

impl PcArModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rng: &mut Rng,
        channels: usize,
        height: usize,
        width: usize,
        actions: usize,
        plan_depth: usize,
        goals: usize,
        conv_widths: &[usize],
        layers: usize,
        heads: usize,
        dim: usize,
    ) -> PcArModel {
        let encoder = ConvTrunk::new(rng, "enc", channels, conv_widths);
        let feat = encoder.out_channels() * height * width;
        let goal_head = conv_layer(
            rng,
            String::from("goal"),
            encoder.out_channels(),
            channels * goals,
        );
        let state_proj = dense_layer(rng, String::from("state_proj"), feat, dim);
        let goal_proj = dense_layer(
            rng,
            String::from("goal_proj"),
            channels * goals * height * width,
            dim,
        );
        let embed = Embedding {
            table: Parameter::new("embed", init::scaled_normal(rng, &[actions, dim])),
        };
        let pos = Parameter::new("pos", init::scaled_normal(rng, &[plan_depth, dim]));
        let blocks = (0..layers)
            .map(|i| Block::new(rng, &format!("block{i}"), dim, heads))
            .collect();
        let final_ln = layer_norm(String::from("final_ln"), dim);
        let action_head = dense_layer(rng, String::from("action_head"), dim, actions);
        PcArModel {
            encoder,
            goal_head,
            state_proj,
            goal_proj,
            embed,
            pos,
            blocks,
            final_ln,
            action_head,
            channels,
            height,
            width,
            plan_depth,
            goals,
            dim,
        }
    }

    pub fn plan_depth(&self) -> usize {
        self.plan_depth
    }

    pub fn goals_per_state(&self) -> usize {
        self.goals
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Teacher-forced pass over a batch.
    ///
    /// `goal_inputs` are the ground-truth goal images (B, goals*C*H*W);
    /// `sequences` the reversed action codes (B rows of plan_depth).
    /// Returns per-position logits (B, D, A) and the goal-decoder logits.
    pub fn forward(
        &self,
        states: &Tensor,
        goal_inputs: &Tensor,
        sequences: &[Vec<usize>],
    ) -> (Tensor, Tensor, PcArCache) {
        let b = states.shape()[0];
        assert_eq!(sequences.len(), b);
        let d = self.dim;
        let t = self.plan_depth;

        let trunk = self.encoder.forward(states);
        let goal_logits = self.goal_head.forward(trunk.output());
        let flat_feat = reshape(
            trunk.output(),
            &[b, self.encoder.out_channels() * self.height * self.width],
        );
        let s_tok = self.state_proj.forward(&flat_feat);
        let g_tok = self.goal_proj.forward(goal_inputs);

        let mut logits = Tensor::zeros(&[b, t, self.action_head.output_dim()]);
        let mut samples = Vec::with_capacity(b);
        for bi in 0..b {
            let seq = &sequences[bi];
            assert_eq!(seq.len(), t, "sequence length must equal plan depth");
            let tokens: Vec<usize> = seq[..t - 1].to_vec();
            let emb = self.embed.forward(&tokens);
            let mut u = Tensor::zeros(&[t, d]);
            for i in 0..d {
                u.data_mut()[i] = s_tok.data()[bi * d + i]
                    + g_tok.data()[bi * d + i]
                    + self.pos.value.data()[i];
            }
            for tt in 1..t {
                for i in 0..d {
                    u.data_mut()[tt * d + i] =
                        emb.data()[(tt - 1) * d + i] + self.pos.value.data()[tt * d + i];
                }
            }
            let (normed, blocks, final_ln, row_logits) = self.transformer(&u);
            let a = self.action_head.output_dim();
            logits.data_mut()[bi * t * a..(bi + 1) * t * a].copy_from_slice(row_logits.data());
            samples.push(SampleCache {
                tokens,
                u,
                blocks,
                final_ln,
                normed,
            });
        }
        (
            logits,
            goal_logits,
            PcArCache {
                trunk,
                flat_feat,
                goal_inputs: goal_inputs.clone(),
                samples,
            },
        )
    }

    fn transformer(&self, u: &Tensor) -> (Tensor, Vec<BlockCache>, LayerNormCache, Tensor) {
        let mut x = u.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(&x);
            blocks.push(cache);
            x = y;
        }
        let (normed, final_ln) = self.final_ln.forward(&x);
        let logits = self.action_head.forward(&normed);
        (normed, blocks, final_ln, logits)
    }

    /// Backward from sequence-logit gradients (B, D, A) and goal-decoder
    /// gradients.
    pub fn backward(&mut self, cache: &PcArCache, dlogits: &Tensor, dgoal_logits: &Tensor) {
        let b = cache.samples.len();
        let d = self.dim;
        let t = self.plan_depth;
        let a = self.action_head.output_dim();

        let mut ds_tok = Tensor::zeros(&[b, d]);
        let mut dg_tok = Tensor::zeros(&[b, d]);
        for (bi, sample) in cache.samples.iter().enumerate() {
            let drow = Tensor::from_vec(
                &[t, a],
                dlogits.data()[bi * t * a..(bi + 1) * t * a].to_vec(),
            );
            let dnormed = self.action_head.backward(&sample.normed, &drow);
            let mut dx = self.final_ln.backward(&sample.final_ln, &dnormed);
            for (block, bcache) in self.blocks.iter_mut().zip(&sample.blocks).rev() {
                dx = block.backward(bcache, &dx);
            }
            // Position embeddings receive every row; the prefix row splits
            // into the state and goal projections; action rows feed the
            // token table.
            for tt in 0..t {
                for i in 0..d {
                    self.pos.grad.data_mut()[tt * d + i] += dx.data()[tt * d + i];
                }
            }
            for i in 0..d {
                ds_tok.data_mut()[bi * d + i] = dx.data()[i];
                dg_tok.data_mut()[bi * d + i] = dx.data()[i];
            }
            let demb = Tensor::from_vec(&[t - 1, d], dx.data()[d..].to_vec());
            self.embed.backward(&sample.tokens, &demb);
        }

        let dflat = self.state_proj.backward(&cache.flat_feat, &ds_tok);
        self.goal_proj.backward(&cache.goal_inputs, &dg_tok);
        let mut dfeat = reshape(
            &dflat,
            &[b, self.encoder.out_channels(), self.height, self.width],
        );
        let dgoal_feat = self.goal_head.backward(cache.trunk.output(), dgoal_logits);
        for (v, &g) in dfeat.data_mut().iter_mut().zip(dgoal_feat.data()) {
            *v += g;
        }
        self.encoder.backward(&cache.trunk, dfeat);
    }

    /// Greedy inference: decode the goal image from the state, then decode
    /// the reversed action sequence token by token; the final token is the
    /// action to execute. `goal_override` replaces the decoded goal (the
    /// ground-truth-goal ablation hook).
    pub fn decode(&self, state: &[f32], goal_override: Option<&[f32]>) -> Vec<usize> {
        let b1 = Tensor::from_vec(
            &[1, self.channels, self.height, self.width],
            state.to_vec(),
        );
        let trunk = self.encoder.forward(&b1);
        let goal_img: Vec<f32> = match goal_override {
            Some(goal) => goal.to_vec(),
            None => {
                let goal_logits = self.goal_head.forward(trunk.output());
                // Greedy per-cell decode of the binary goal image.
                goal_logits
                    .data()
                    .iter()
                    .map(|&z| if z > 0.0 { 1.0 } else { 0.0 })
                    .collect()
            }
        };
        let flat_feat = reshape(
            trunk.output(),
            &[1, self.encoder.out_channels() * self.height * self.width],
        );
        let s_tok = self.state_proj.forward(&flat_feat);
        let g_tok = self
            .goal_proj
            .forward(&Tensor::from_vec(&[1, goal_img.len()], goal_img));

        let d = self.dim;
        let mut tokens: Vec<usize> = Vec::with_capacity(self.plan_depth);
        for t in 0..self.plan_depth {
            let mut u = Tensor::zeros(&[t + 1, d]);
            for i in 0..d {
                u.data_mut()[i] = s_tok.data()[i] + g_tok.data()[i] + self.pos.value.data()[i];
            }
            for (tt, &tok) in tokens.iter().enumerate() {
                let emb = self.embed.forward(&[tok]);
                for i in 0..d {
                    u.data_mut()[(tt + 1) * d + i] =
                        emb.data()[i] + self.pos.value.data()[(tt + 1) * d + i];
                }
            }
            let (_, _, _, logits) = self.transformer(&u);
            let a = self.action_head.output_dim();
            let row = &logits.data()[t * a..(t + 1) * a];
            let mut best = 0;
            for i in 1..a {
                if row[i] > row[best] {
                    best = i;
                }
            }
            tokens.push(best);
        }
        tokens
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut p = self.encoder.params();
        p.push(&self.goal_head.weight);
        p.push(&self.goal_head.bias);
        p.push(&self.state_proj.weight);
        p.push(&self.state_proj.bias);
        p.push(&self.goal_proj.weight);
        p.push(&self.goal_proj.bias);
        p.push(&self.embed.table);
        p.push(&self.pos);
        for block in &self.blocks {
            p.extend(block.params());
        }
        p.push(&self.final_ln.gamma);
        p.push(&self.final_ln.beta);
        p.push(&self.action_head.weight);
        p.push(&self.action_head.bias);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.encoder.params_mut();
        p.push(&mut self.goal_head.weight);
        p.push(&mut self.goal_head.bias);
        p.push(&mut self.state_proj.weight);
        p.push(&mut self.state_proj.bias);
        p.push(&mut self.goal_proj.weight);
        p.push(&mut self.goal_proj.bias);
        p.push(&mut self.embed.table);
        p.push(&mut self.pos);
        for block in &mut self.blocks {
            p.extend(block.params_mut());
        }
        p.push(&mut self.final_ln.gamma);
        p.push(&mut self.final_ln.beta);
        p.push(&mut self.action_head.weight);
        p.push(&mut self.action_head.bias);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bc_policy_shapes_and_param_names_are_unique() {
        let mut rng = Rng::new(1);
        let policy = BcPolicy::new(&mut rng, 3, 9, 9, 4, &[8, 8], &[16]);
        let x = Tensor::zeros(&[2, 3, 9, 9]);
        let (logits, _) = policy.forward(&x);
        assert_eq!(logits.shape(), &[2, 4]);
        let names: Vec<&str> = policy.params().iter().map(|p| p.name.as_str()).collect();
        let mut dedup = names.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len(), "parameter names must be unique");
    }

    #[test]
    fn aux_policy_draws_shared_params_like_bc() {
        let mut r1 = Rng::new(7);
        let mut r2 = Rng::new(7);
        let bc = BcPolicy::new(&mut r1, 3, 9, 9, 4, &[8, 8], &[16]);
        let aux = AuxBcPolicy::new(&mut r2, 3, 9, 9, 4, &[8, 8], &[16]);
        for (a, b) in bc.params().iter().zip(aux.params().iter()) {
            assert_eq!(a.value, b.value, "{} diverged", a.name);
        }
    }

    #[test]
    fn pc_ci_model_maps_cells_to_token_logits() {
        let mut rng = Rng::new(2);
        let model = PcCiModel::new(&mut rng, 9, 9, &[8, 8]);
        let x = Tensor::zeros(&[3, super::super::data::PC_CI_CHANNELS, 9, 9]);
        let (logits, _) = model.forward(&x);
        assert_eq!(logits.shape(), &[3, TOKEN_COUNT, 9, 9]);
    }

    #[test]
    fn pc_ar_decode_is_deterministic_and_fixed_length() {
        let mut rng = Rng::new(3);
        let model = PcArModel::new(&mut rng, 4, 10, 10, 3, 6, 1, &[8, 8], 2, 2, 16);
        let state = vec![0.0f32; 4 * 100];
        let a = model.decode(&state, None);
        let b = model.decode(&state, None);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|&t| t < 3));
    }

    #[test]
    fn pc_ar_teacher_forced_shapes() {
        let mut rng = Rng::new(4);
        let model = PcArModel::new(&mut rng, 4, 10, 10, 3, 5, 2, &[8], 1, 2, 16);
        let states = Tensor::zeros(&[2, 4, 10, 10]);
        let goals = Tensor::zeros(&[2, 2 * 4 * 100]);
        let seqs = vec![vec![0usize, 1, 2, 1, 0], vec![2usize, 2, 1, 0, 0]];
        let (logits, goal_logits, _) = model.forward(&states, &goals, &seqs);
        assert_eq!(logits.shape(), &[2, 5, 3]);
        assert_eq!(goal_logits.shape(), &[2, 8, 10, 10]);
    }
}
