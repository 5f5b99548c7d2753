//! Inference-time policies of the trained models.

use alloc::vec;
use alloc::vec::Vec;

use super::data::PC_CI_CHANNELS;
use super::models::{PcArModel, PcCiModel};
use crate::bfs::{CellToken, TOKEN_COUNT};
use crate::breakout::GameAction;
use crate::grid::{Action, StateTensor, STATE_CHANNELS};
use crate::nn::Tensor;
use crate::rng::Rng;

/// Outcome of one emulated search rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcCiRollout {
    pub action: Action,
    /// Snapshots generated before the stopping condition fired.
    pub snapshots: usize,
    /// True when no backtracked token appeared at the agent cell within
    /// the budget and the action fell back to a uniform draw.
    pub timed_out: bool,
}

/// Emulate the expert's search: starting from the deterministic initial
/// grid (all unvisited, agent cell carrying the root token), repeatedly
/// predict the next snapshot until the agent's cell is labelled
/// backtracked, then return that action. If `max_rollout` snapshots pass
/// without stopping — or the prediction reaches a fixed point that can
/// never stop — a uniformly random action is returned instead.
pub fn pc_ci_act_traced(
    model: &PcCiModel,
    state: &StateTensor,
    max_rollout: usize,
    rng: &mut Rng,
) -> PcCiRollout {
    let (h, w) = model.dims();
    assert_eq!((state.height(), state.width()), (h, w), "state/model dims");
    let hw = h * w;
    let agent = state.agent_pos();
    let agent_idx = agent.0 * w + agent.1;

    let mut tokens = vec![0u8; hw];
    tokens[agent_idx] = crate::bfs::ROOT_TOKEN.code();

    let mut input = Tensor::zeros(&[1, PC_CI_CHANNELS, h, w]);
    for step in 1..=max_rollout {
        let data = input.data_mut();
        data[..STATE_CHANNELS * hw].copy_from_slice(state.data());
        data[STATE_CHANNELS * hw..].iter_mut().for_each(|v| *v = 0.0);
        for (cell, &code) in tokens.iter().enumerate() {
            data[(STATE_CHANNELS + code as usize) * hw + cell] = 1.0;
        }
        let (logits, _) = model.forward(&input);
        let mut next = vec![0u8; hw];
        for (cell, slot) in next.iter_mut().enumerate() {
            let mut best = 0usize;
            for ch in 1..TOKEN_COUNT {
                if logits.data()[ch * hw + cell] > logits.data()[best * hw + cell] {
                    best = ch;
                }
            }
            *slot = best as u8;
        }
        if let Some(CellToken::Backtracked(action)) = CellToken::from_code(next[agent_idx]) {
            return PcCiRollout {
                action,
                snapshots: step,
                timed_out: false,
            };
        }
        if next == tokens {
            // Fixed point: a deterministic rollout can never stop now.
            break;
        }
        tokens = next;
    }
    PcCiRollout {
        action: Action::from_code(rng.below(Action::COUNT as u64) as u8).unwrap(),
        snapshots: max_rollout,
        timed_out: true,
    }
}

/// [`pc_ci_act_traced`] returning only the action.
pub fn pc_ci_act(model: &PcCiModel, state: &StateTensor, max_rollout: usize, rng: &mut Rng) -> Action {
    pc_ci_act_traced(model, state, max_rollout, rng).action
}

/// Greedy goal + sequence decode; the last generated token is the action.
pub fn pc_ar_act(model: &PcArModel, state: &[f32]) -> GameAction {
    let tokens = model.decode(state, None);
    GameAction::from_code(*tokens.last().unwrap() as u8).unwrap()
}

/// Ablation hook: decode conditioned on a provided goal image instead of
/// the model's own goal prediction.
pub fn pc_ar_act_with_goal(model: &PcArModel, state: &[f32], goal: &[f32]) -> GameAction {
    let tokens = model.decode(state, Some(goal));
    GameAction::from_code(*tokens.last().unwrap() as u8).unwrap()
}

/// Full decoded reversed sequence (tests and diagnostics).
pub fn pc_ar_decode(model: &PcArModel, state: &[f32]) -> Vec<GameAction> {
    model
        .decode(state, None)
        .into_iter()
        .map(|t| GameAction::from_code(t as u8).unwrap())
        .collect()
}
