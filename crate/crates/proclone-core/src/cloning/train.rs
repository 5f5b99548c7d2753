//! The four imitation trainers.
//!
//! All loops share one structure: derive separate generator streams for
//! initialization, batch sampling, and augmentation from the config seed
//! (so enabling one knob never desynchronizes the others), draw uniform
//! minibatches with replacement, take Adam steps, and periodically measure
//! a training-probe metric that both logs progress and drives optional
//! early stopping. Everything is single-threaded and deterministic: the
//! same dataset, config, and seed give bitwise-identical parameters.
//!
//! Objective shapes:
//!
//! - BC / Aug-BC: mean action cross-entropy.
//! - Aux-BC: action cross-entropy + aux_weight * mean per-cell token
//!   cross-entropy on the final search grid.
//! - PC (cond. independent): procedure_weight * mean per-cell token
//!   cross-entropy over snapshot-to-snapshot pairs. The action factor is
//!   deterministic decoding of the final grid, which the expert data
//!   satisfies exactly, so its negative log-likelihood is identically zero
//!   (the trainer asserts that once per dataset).
//! - PC (autoregressive): final-position action cross-entropy +
//!   procedure_weight * (goal-image binary cross-entropy + cross-entropy
//!   over the earlier sequence positions, pads masked). At
//!   procedure_weight = 0 the objective is exactly the vanilla BC
//!   objective of the model's action prediction.

use alloc::vec;
use alloc::vec::Vec;

use super::augment::{augment_state, AugmentConfig};
use super::data::{GameDataset, MazeDataset, StateActionSamples, PC_CI_CHANNELS};
use super::models::{AuxBcPolicy, BcPolicy, PcArModel, PcCiModel};
use crate::nn::ops::{cross_entropy, cross_entropy_masked, sigmoid_bce, spatial_cross_entropy};
use crate::nn::{AdamState, Tensor};
use crate::rng::Rng;

const STREAM_INIT: u64 = 0x494e4954;
const STREAM_BATCH: u64 = 0x42415443;
const STREAM_AUG: u64 = 0x41554721;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStop {
    pub enabled: bool,
    /// Probe cadence in optimizer steps.
    pub check_every: usize,
    /// Stop once the probe metric reaches this level...
    pub threshold: f32,
    /// ...or once it has not improved for this many checks.
    pub patience: usize,
    pub min_steps: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            enabled: true,
            check_every: 100,
            threshold: 0.995,
            patience: 15,
            min_steps: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    /// Step cap; early stopping usually ends runs well before it.
    pub train_steps: usize,
    /// Metric-log cadence in steps.
    pub eval_every: usize,
    pub seed: u64,
    /// Aux-BC mixing weight (lambda).
    pub aux_weight: f32,
    /// Weight on the procedure terms of the PC objectives. Zero reduces
    /// them to the plain action objective.
    pub procedure_weight: f32,
    pub augment: AugmentConfig,
    pub early_stop: EarlyStop,
    pub conv_widths: Vec<usize>,
    pub mlp_hidden: Vec<usize>,
    pub attn_layers: usize,
    pub attn_heads: usize,
    pub attn_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            batch_size: 32,
            train_steps: 50_000,
            eval_every: 2_000,
            seed: 0,
            aux_weight: 1.0,
            procedure_weight: 1.0,
            augment: AugmentConfig::default(),
            early_stop: EarlyStop::default(),
            conv_widths: vec![32, 32, 64, 64, 64],
            mlp_hidden: vec![128, 128],
            attn_layers: 2,
            attn_heads: 4,
            attn_dim: 64,
        }
    }
}

/// One metric-log row, emitted at probe checks and at the final step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub step: usize,
    pub loss_total: f32,
    pub loss_action: f32,
    pub loss_procedure: f32,
    /// Training-probe metric (accuracy or exact-match fraction).
    pub probe: f32,
}

pub struct TrainResult<M> {
    pub model: M,
    pub metrics: Vec<MetricRow>,
    /// Total loss at every optimizer step.
    pub step_losses: Vec<f32>,
    pub steps_run: usize,
}

/// Early-stop bookkeeping shared by the loops.
struct StopWatch {
    config: EarlyStop,
    best: f32,
    since_best: usize,
}

impl StopWatch {
    fn new(config: EarlyStop) -> StopWatch {
        StopWatch {
            config,
            best: f32::NEG_INFINITY,
            since_best: 0,
        }
    }

    fn should_stop(&mut self, step: usize, metric: f32) -> bool {
        if metric > self.best {
            self.best = metric;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        if !self.config.enabled || step < self.config.min_steps {
            return false;
        }
        metric >= self.config.threshold || self.since_best >= self.config.patience
    }
}

fn probe_indices(len: usize) -> Vec<usize> {
    (0..len.min(512)).collect()
}

// ---------------------------------------------------------------------------
// BC and Aug-BC
// ---------------------------------------------------------------------------

/// Vanilla behavioral cloning: minimize mean action cross-entropy.
pub fn train_bc<D: StateActionSamples>(data: &D, config: &TrainConfig) -> TrainResult<BcPolicy> {
    train_bc_impl(data, config, None)
}

/// BC with geometric augmentation of the maze state images; labels are
/// untouched.
pub fn train_aug_bc(data: &MazeDataset, config: &TrainConfig) -> TrainResult<BcPolicy> {
    train_bc_impl(data, config, Some(config.augment))
}

fn train_bc_impl<D: StateActionSamples>(
    data: &D,
    config: &TrainConfig,
    augment: Option<AugmentConfig>,
) -> TrainResult<BcPolicy> {
    assert!(!data.is_empty(), "training needs a non-empty dataset");
    let (c, h, w) = (data.channels(), data.height(), data.width());
    let mut init_rng = Rng::new(config.seed).derive(STREAM_INIT);
    let mut policy = BcPolicy::new(
        &mut init_rng,
        c,
        h,
        w,
        data.action_count(),
        &config.conv_widths,
        &config.mlp_hidden,
    );
    let mut adam = AdamState::new(&policy.params(), config.learning_rate);
    let mut batch_rng = Rng::new(config.seed).derive(STREAM_BATCH);
    let mut aug_rng = Rng::new(config.seed).derive(STREAM_AUG);

    let probe = probe_indices(data.len());
    let mut watch = StopWatch::new(config.early_stop);
    let mut metrics = Vec::new();
    let mut step_losses = Vec::new();
    let mut steps_run = 0;

    let chw = c * h * w;
    let bsz = config.batch_size;
    for step in 1..=config.train_steps {
        let mut states = Tensor::zeros(&[bsz, c, h, w]);
        let mut labels = vec![0usize; bsz];
        for bi in 0..bsz {
            let idx = batch_rng.index(data.len());
            let out = &mut states.data_mut()[bi * chw..(bi + 1) * chw];
            data.write_state(idx, out);
            if let Some(aug) = &augment {
                augment_state(aug, out, h, w, &mut aug_rng);
            }
            labels[bi] = data.action(idx);
        }
        let (logits, cache) = policy.forward(&states);
        let (loss, dlogits, _) = cross_entropy(&logits, &labels);
        policy.backward(&cache, &dlogits);
        adam.step(&mut policy.params_mut());
        step_losses.push(loss);
        steps_run = step;

        if step % config.early_stop.check_every == 0 || step == config.train_steps {
            let acc = classify_probe(&probe, data, |states| policy.forward(states).0);
            if step % config.eval_every == 0 || step == config.train_steps {
                metrics.push(MetricRow {
                    step,
                    loss_total: loss,
                    loss_action: loss,
                    loss_procedure: 0.0,
                    probe: acc,
                });
            }
            if watch.should_stop(step, acc) {
                metrics.push(MetricRow {
                    step,
                    loss_total: loss,
                    loss_action: loss,
                    loss_procedure: 0.0,
                    probe: acc,
                });
                break;
            }
        }
    }
    TrainResult {
        model: policy,
        metrics,
        step_losses,
        steps_run,
    }
}

/// Greedy-prediction accuracy on fixed probe indices, in forward chunks.
fn classify_probe<D: StateActionSamples>(
    probe: &[usize],
    data: &D,
    forward: impl Fn(&Tensor) -> Tensor,
) -> f32 {
    let (c, h, w) = (data.channels(), data.height(), data.width());
    let chw = c * h * w;
    let mut correct = 0usize;
    for chunk in probe.chunks(64) {
        let mut states = Tensor::zeros(&[chunk.len(), c, h, w]);
        for (bi, &idx) in chunk.iter().enumerate() {
            data.write_state(idx, &mut states.data_mut()[bi * chw..(bi + 1) * chw]);
        }
        let logits = forward(&states);
        let a = logits.shape()[1];
        for (bi, &idx) in chunk.iter().enumerate() {
            let row = &logits.data()[bi * a..(bi + 1) * a];
            let mut best = 0;
            for i in 1..a {
                if row[i] > row[best] {
                    best = i;
                }
            }
            if best == data.action(idx) {
                correct += 1;
            }
        }
    }
    correct as f32 / probe.len() as f32
}

// ---------------------------------------------------------------------------
// Aux-BC
// ---------------------------------------------------------------------------

/// BC plus an auxiliary per-cell prediction of the expert's final search
/// grid: total = action CE + aux_weight * token CE.
pub fn train_aux_bc(data: &MazeDataset, config: &TrainConfig) -> TrainResult<AuxBcPolicy> {
    assert!(!data.is_empty(), "training needs a non-empty dataset");
    let (c, h, w) = (data.channels(), data.height(), data.width());
    let mut init_rng = Rng::new(config.seed).derive(STREAM_INIT);
    let mut policy = AuxBcPolicy::new(
        &mut init_rng,
        c,
        h,
        w,
        data.action_count(),
        &config.conv_widths,
        &config.mlp_hidden,
    );
    let mut adam = AdamState::new(&policy.params(), config.learning_rate);
    let mut batch_rng = Rng::new(config.seed).derive(STREAM_BATCH);

    let probe = probe_indices(data.len());
    let mut watch = StopWatch::new(config.early_stop);
    let mut metrics = Vec::new();
    let mut step_losses = Vec::new();
    let mut steps_run = 0;

    let chw = c * h * w;
    let hw = h * w;
    let bsz = config.batch_size;
    for step in 1..=config.train_steps {
        let mut states = Tensor::zeros(&[bsz, c, h, w]);
        let mut labels = vec![0usize; bsz];
        let mut grids = vec![0u8; bsz * hw];
        for bi in 0..bsz {
            let idx = batch_rng.index(data.len());
            data.write_state(idx, &mut states.data_mut()[bi * chw..(bi + 1) * chw]);
            labels[bi] = data.action(idx);
            grids[bi * hw..(bi + 1) * hw].copy_from_slice(data.final_grid(idx));
        }
        let (logits, aux_logits, cache) = policy.forward(&states);
        let (action_loss, dlogits, _) = cross_entropy(&logits, &labels);
        let (aux_loss, mut daux, _) = spatial_cross_entropy(&aux_logits, &grids, None);
        let total = action_loss + config.aux_weight * aux_loss;
        daux.data_mut()
            .iter_mut()
            .for_each(|v| *v *= config.aux_weight);
        policy.backward(&cache, &dlogits, &daux);
        adam.step(&mut policy.params_mut());
        step_losses.push(total);
        steps_run = step;

        if step % config.early_stop.check_every == 0 || step == config.train_steps {
            let acc = classify_probe(&probe, data, |states| policy.forward(states).0);
            if step % config.eval_every == 0 || step == config.train_steps {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: action_loss,
                    loss_procedure: aux_loss,
                    probe: acc,
                });
            }
            if watch.should_stop(step, acc) {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: action_loss,
                    loss_procedure: aux_loss,
                    probe: acc,
                });
                break;
            }
        }
    }
    TrainResult {
        model: policy,
        metrics,
        step_losses,
        steps_run,
    }
}

// ---------------------------------------------------------------------------
// PC, conditionally independent
// ---------------------------------------------------------------------------

/// Teacher-forced training of the snapshot transition model over every
/// consecutive pair (plus the state-to-initial-grid step).
pub fn train_pc_ci(data: &MazeDataset, config: &TrainConfig) -> TrainResult<PcCiModel> {
    assert!(data.pair_count() > 0, "training needs at least one pair");
    for demo in data.demos() {
        assert!(demo.trace.len() >= 2, "traces must hold at least two snapshots");
        // The action factor is deterministic decoding of the final grid;
        // verify once that the data satisfies it, making its NLL zero.
        assert!(demo.is_consistent(), "demonstration violates decode consistency");
    }
    let (h, w) = (data.height(), data.width());
    let mut init_rng = Rng::new(config.seed).derive(STREAM_INIT);
    let mut model = PcCiModel::new(&mut init_rng, h, w, &config.conv_widths);
    let mut adam = AdamState::new(&model.params(), config.learning_rate);
    let mut batch_rng = Rng::new(config.seed).derive(STREAM_BATCH);

    let probe = probe_indices(data.pair_count());
    let mut watch = StopWatch::new(config.early_stop);
    let mut metrics = Vec::new();
    let mut step_losses = Vec::new();
    let mut steps_run = 0;

    let hw = h * w;
    let in_chw = PC_CI_CHANNELS * hw;
    let bsz = config.batch_size;
    for step in 1..=config.train_steps {
        let mut inputs = Tensor::zeros(&[bsz, PC_CI_CHANNELS, h, w]);
        let mut targets = vec![0u8; bsz * hw];
        let mut mask = vec![true; bsz * hw];
        for bi in 0..bsz {
            let idx = batch_rng.index(data.pair_count());
            data.write_pair(
                idx,
                &mut inputs.data_mut()[bi * in_chw..(bi + 1) * in_chw],
                &mut targets[bi * hw..(bi + 1) * hw],
                &mut mask[bi * hw..(bi + 1) * hw],
            );
        }
        let (logits, cache) = model.forward(&inputs);
        let (proc_loss, mut dlogits, _) = spatial_cross_entropy(&logits, &targets, Some(&mask));
        let total = config.procedure_weight * proc_loss;
        dlogits
            .data_mut()
            .iter_mut()
            .for_each(|v| *v *= config.procedure_weight);
        model.backward(&cache, &dlogits);
        adam.step(&mut model.params_mut());
        step_losses.push(total);
        steps_run = step;

        if step % config.early_stop.check_every == 0 || step == config.train_steps {
            let exact = pc_ci_exact_pair_fraction(&model, data, &probe);
            if step % config.eval_every == 0 || step == config.train_steps {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: 0.0,
                    loss_procedure: proc_loss,
                    probe: exact,
                });
            }
            if watch.should_stop(step, exact) {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: 0.0,
                    loss_procedure: proc_loss,
                    probe: exact,
                });
                break;
            }
        }
    }
    TrainResult {
        model,
        metrics,
        step_losses,
        steps_run,
    }
}

/// Fraction of the given pairs whose next snapshot the model reproduces
/// exactly (every unmasked cell).
pub fn pc_ci_exact_pair_fraction(model: &PcCiModel, data: &MazeDataset, pairs: &[usize]) -> f32 {
    let (h, w) = (data.height(), data.width());
    let hw = h * w;
    let in_chw = PC_CI_CHANNELS * hw;
    let mut exact = 0usize;
    for chunk in pairs.chunks(64) {
        let mut inputs = Tensor::zeros(&[chunk.len(), PC_CI_CHANNELS, h, w]);
        let mut targets = vec![0u8; chunk.len() * hw];
        let mut mask = vec![true; chunk.len() * hw];
        for (bi, &idx) in chunk.iter().enumerate() {
            data.write_pair(
                idx,
                &mut inputs.data_mut()[bi * in_chw..(bi + 1) * in_chw],
                &mut targets[bi * hw..(bi + 1) * hw],
                &mut mask[bi * hw..(bi + 1) * hw],
            );
        }
        let (logits, _) = model.forward(&inputs);
        for bi in 0..chunk.len() {
            let mut all = true;
            for cell in 0..hw {
                if !mask[bi * hw + cell] {
                    continue;
                }
                let base = bi * crate::bfs::TOKEN_COUNT * hw + cell;
                let mut best = 0usize;
                for ch in 1..crate::bfs::TOKEN_COUNT {
                    if logits.data()[base + ch * hw] > logits.data()[base + best * hw] {
                        best = ch;
                    }
                }
                if best as u8 != targets[bi * hw + cell] {
                    all = false;
                    break;
                }
            }
            if all {
                exact += 1;
            }
        }
    }
    exact as f32 / pairs.len() as f32
}

// ---------------------------------------------------------------------------
// PC, autoregressive
// ---------------------------------------------------------------------------

/// Joint training of the goal decoder and the reversed action-sequence
/// model. The final sequence position is the action term; the goal image
/// and earlier positions are the procedure terms.
pub fn train_pc_ar(data: &GameDataset, config: &TrainConfig) -> TrainResult<PcArModel> {
    assert!(!data.is_empty(), "training needs a non-empty dataset");
    let (c, h, w) = (data.channels(), data.height(), data.width());
    let depth = data.plan_depth();
    let goals = data.goals_per_state();
    let mut init_rng = Rng::new(config.seed).derive(STREAM_INIT);
    let mut model = PcArModel::new(
        &mut init_rng,
        c,
        h,
        w,
        data.action_count(),
        depth,
        goals,
        &config.conv_widths,
        config.attn_layers,
        config.attn_heads,
        config.attn_dim,
    );
    let mut adam = AdamState::new(&model.params(), config.learning_rate);
    let mut batch_rng = Rng::new(config.seed).derive(STREAM_BATCH);

    let probe = probe_indices(data.len());
    let mut watch = StopWatch::new(config.early_stop);
    let mut metrics = Vec::new();
    let mut step_losses = Vec::new();
    let mut steps_run = 0;

    let chw = c * h * w;
    let goal_len = goals * chw;
    let actions = data.action_count();
    let bsz = config.batch_size;
    for step in 1..=config.train_steps {
        let mut states = Tensor::zeros(&[bsz, c, h, w]);
        let mut goal_imgs = Tensor::zeros(&[bsz, goal_len]);
        let mut seqs: Vec<Vec<usize>> = Vec::with_capacity(bsz);
        let mut pads: Vec<Vec<bool>> = Vec::with_capacity(bsz);
        for bi in 0..bsz {
            let idx = batch_rng.index(data.len());
            data.write_state(idx, &mut states.data_mut()[bi * chw..(bi + 1) * chw]);
            data.write_goals(idx, &mut goal_imgs.data_mut()[bi * goal_len..(bi + 1) * goal_len]);
            let (seq, pad) = data.sequence(idx);
            seqs.push(seq);
            pads.push(pad);
        }
        let (logits, goal_logits, cache) = model.forward(&states, &goal_imgs, &seqs);

        // The final (executed-action) position is the action term; earlier
        // positions are procedure terms. Pads are excluded everywhere.
        let rows = bsz * depth;
        let flat = Tensor::from_vec(&[rows, actions], logits.data().to_vec());
        let mut labels = vec![0usize; rows];
        let mut final_keep = vec![false; rows];
        let mut prefix_keep = vec![false; rows];
        for bi in 0..bsz {
            for t in 0..depth {
                let r = bi * depth + t;
                labels[r] = seqs[bi][t];
                let keep = !pads[bi][t];
                if t == depth - 1 {
                    final_keep[r] = keep;
                } else {
                    prefix_keep[r] = keep;
                }
            }
        }
        // Plans that ended before the full depth have padded finals; they
        // contribute no action term (rare outside tiny-timeout tests).
        let (action_loss, mut d_final) = if final_keep.iter().any(|&k| k) {
            let (l, d, _) = cross_entropy_masked(&flat, &labels, &final_keep);
            (l, d)
        } else {
            (0.0, Tensor::zeros(&[rows, actions]))
        };
        let (prefix_loss, d_prefix) = if prefix_keep.iter().any(|&k| k) {
            let (l, d, _) = cross_entropy_masked(&flat, &labels, &prefix_keep);
            (l, Some(d))
        } else {
            (0.0, None)
        };
        let (goal_loss, mut dgoal) = sigmoid_bce(&goal_logits, goal_imgs.data());
        let proc_loss = prefix_loss + goal_loss;
        let total = action_loss + config.procedure_weight * proc_loss;

        if let Some(dp) = d_prefix {
            for (a, &b) in d_final.data_mut().iter_mut().zip(dp.data()) {
                *a += config.procedure_weight * b;
            }
        }
        let dlogits = Tensor::from_vec(&[bsz, depth, actions], d_final.data().to_vec());
        dgoal
            .data_mut()
            .iter_mut()
            .for_each(|v| *v *= config.procedure_weight);
        model.backward(&cache, &dlogits, &dgoal);
        adam.step(&mut model.params_mut());
        step_losses.push(total);
        steps_run = step;

        if step % config.early_stop.check_every == 0 || step == config.train_steps {
            let acc = pc_ar_token_accuracy(&model, data, &probe);
            if step % config.eval_every == 0 || step == config.train_steps {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: action_loss,
                    loss_procedure: proc_loss,
                    probe: acc,
                });
            }
            if watch.should_stop(step, acc) {
                metrics.push(MetricRow {
                    step,
                    loss_total: total,
                    loss_action: action_loss,
                    loss_procedure: proc_loss,
                    probe: acc,
                });
                break;
            }
        }
    }
    TrainResult {
        model,
        metrics,
        step_losses,
        steps_run,
    }
}

/// Teacher-forced token accuracy over non-pad positions of the given
/// samples (ground-truth goal conditioning).
pub fn pc_ar_token_accuracy(model: &PcArModel, data: &GameDataset, samples: &[usize]) -> f32 {
    let (c, h, w) = (data.channels(), data.height(), data.width());
    let chw = c * h * w;
    let depth = data.plan_depth();
    let goal_len = data.goals_per_state() * chw;
    let actions = data.action_count();
    let mut correct = 0usize;
    let mut counted = 0usize;
    for chunk in samples.chunks(64) {
        let mut states = Tensor::zeros(&[chunk.len(), c, h, w]);
        let mut goal_imgs = Tensor::zeros(&[chunk.len(), goal_len]);
        let mut seqs = Vec::with_capacity(chunk.len());
        let mut pads = Vec::with_capacity(chunk.len());
        for (bi, &idx) in chunk.iter().enumerate() {
            data.write_state(idx, &mut states.data_mut()[bi * chw..(bi + 1) * chw]);
            data.write_goals(idx, &mut goal_imgs.data_mut()[bi * goal_len..(bi + 1) * goal_len]);
            let (seq, pad) = data.sequence(idx);
            seqs.push(seq);
            pads.push(pad);
        }
        let (logits, _, _) = model.forward(&states, &goal_imgs, &seqs);
        for bi in 0..chunk.len() {
            for t in 0..depth {
                if pads[bi][t] {
                    continue;
                }
                counted += 1;
                let row = &logits.data()[(bi * depth + t) * actions..(bi * depth + t + 1) * actions];
                let mut best = 0;
                for i in 1..actions {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                if best == seqs[bi][t] {
                    correct += 1;
                }
            }
        }
    }
    if counted == 0 {
        return 1.0;
    }
    correct as f32 / counted as f32
}
