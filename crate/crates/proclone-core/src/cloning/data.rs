//! Training-set views over expert demonstrations.
//!
//! The maze dataset indexes every teacher-forcing pair a trace contains:
//! pair step 0 is the state-to-initial-grid prediction, pair step `l >= 1`
//! predicts snapshot `l` from snapshot `l - 1`. The game dataset exposes
//! states, plans, and executed actions.

use alloc::vec::Vec;

use crate::bfs::{Demonstration, TOKEN_COUNT};
use crate::breakout::{GAME_CHANNELS, GRID};
use crate::grid::STATE_CHANNELS;
use crate::mcts::GameDemo;

/// Channel count of a conditionally-independent procedure-model input:
/// the 3 state channels concatenated with one plane per token class.
pub const PC_CI_CHANNELS: usize = STATE_CHANNELS + TOKEN_COUNT;

/// Sample source for plain state-to-action learners. Both environments
/// implement this, so one trainer serves both tasks.
pub trait StateActionSamples {
    fn len(&self) -> usize;
    fn channels(&self) -> usize;
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Write sample `idx`'s state into `out` (channels * height * width).
    fn write_state(&self, idx: usize, out: &mut [f32]);
    fn action(&self, idx: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Maze demonstrations plus a flat index of teacher-forcing pairs.
#[derive(Clone, Debug)]
pub struct MazeDataset {
    demos: Vec<Demonstration>,
    height: usize,
    width: usize,
    /// (demonstration, pair step); step 0 is s -> x0.
    pairs: Vec<(u32, u32)>,
}

impl MazeDataset {
    pub fn new(demos: Vec<Demonstration>) -> MazeDataset {
        assert!(!demos.is_empty(), "dataset needs at least one demonstration");
        let height = demos[0].state.height();
        let width = demos[0].state.width();
        let mut pairs = Vec::new();
        for (di, demo) in demos.iter().enumerate() {
            assert_eq!(demo.state.height(), height, "mixed maze heights");
            assert_eq!(demo.state.width(), width, "mixed maze widths");
            for step in 0..demo.trace.len() as u32 {
                pairs.push((di as u32, step));
            }
        }
        MazeDataset {
            demos,
            height,
            width,
            pairs,
        }
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, idx: usize) -> (u32, u32) {
        self.pairs[idx]
    }

    /// Write one conditionally-independent training pair: the 12-channel
    /// input into `input`, target token codes into `target`, and the loss
    /// mask into `mask` (step 0 excludes the conventional root token at the
    /// agent cell).
    pub fn write_pair(&self, idx: usize, input: &mut [f32], target: &mut [u8], mask: &mut [bool]) {
        let (di, step) = self.pairs[idx];
        let demo = &self.demos[di as usize];
        let hw = self.height * self.width;
        debug_assert_eq!(input.len(), PC_CI_CHANNELS * hw);
        debug_assert_eq!(target.len(), hw);
        debug_assert_eq!(mask.len(), hw);

        input[..STATE_CHANNELS * hw].copy_from_slice(demo.state.data());
        let token_planes = &mut input[STATE_CHANNELS * hw..];
        token_planes.iter_mut().for_each(|v| *v = 0.0);
        if step == 0 {
            // Neutral all-unvisited encoding for the s -> x0 step.
            token_planes[..hw].iter_mut().for_each(|v| *v = 1.0);
        } else {
            let prev = &demo.trace.snapshots[step as usize - 1];
            for (cell, &code) in prev.codes().iter().enumerate() {
                token_planes[code as usize * hw + cell] = 1.0;
            }
        }
        target.copy_from_slice(demo.trace.snapshots[step as usize].codes());
        mask.iter_mut().for_each(|m| *m = true);
        if step == 0 {
            let agent = demo.state.agent_pos();
            mask[agent.0 * self.width + agent.1] = false;
        }
    }

    /// Final-snapshot token codes of demonstration `idx`, the auxiliary
    /// prediction target.
    pub fn final_grid(&self, idx: usize) -> &[u8] {
        self.demos[idx].trace.last().codes()
    }
}

impl StateActionSamples for MazeDataset {
    fn len(&self) -> usize {
        self.demos.len()
    }

    fn channels(&self) -> usize {
        STATE_CHANNELS
    }

    fn height(&self) -> usize {
        self.height
    }

    fn width(&self) -> usize {
        self.width
    }

    fn action_count(&self) -> usize {
        crate::grid::Action::COUNT
    }

    fn write_state(&self, idx: usize, out: &mut [f32]) {
        out.copy_from_slice(self.demos[idx].state.data());
    }

    fn action(&self, idx: usize) -> usize {
        self.demos[idx].action.code() as usize
    }
}

/// Game demonstrations with fixed-depth plans.
#[derive(Clone, Debug)]
pub struct GameDataset {
    demos: Vec<GameDemo>,
    plan_depth: usize,
    goals_per_state: usize,
}

impl GameDataset {
    pub fn new(demos: Vec<GameDemo>) -> GameDataset {
        assert!(!demos.is_empty(), "dataset needs at least one demonstration");
        let plan_depth = demos[0].plans[0].actions_reversed.len();
        let goals_per_state = demos[0].plans.len();
        for demo in &demos {
            assert_eq!(demo.plans.len(), goals_per_state, "mixed plan counts");
            for plan in &demo.plans {
                assert_eq!(plan.actions_reversed.len(), plan_depth, "mixed plan depths");
            }
        }
        GameDataset {
            demos,
            plan_depth,
            goals_per_state,
        }
    }

    pub fn demos(&self) -> &[GameDemo] {
        &self.demos
    }

    pub fn plan_depth(&self) -> usize {
        self.plan_depth
    }

    pub fn goals_per_state(&self) -> usize {
        self.goals_per_state
    }

    /// Stacked goal images of sample `idx`: (goals_per_state * 4, 10, 10).
    pub fn write_goals(&self, idx: usize, out: &mut [f32]) {
        let per = GAME_CHANNELS * GRID * GRID;
        debug_assert_eq!(out.len(), self.goals_per_state * per);
        for (g, plan) in self.demos[idx].plans.iter().enumerate() {
            out[g * per..(g + 1) * per].copy_from_slice(plan.goal.data());
        }
    }

    /// Reversed action codes and pad flags of the full-depth plan.
    pub fn sequence(&self, idx: usize) -> (Vec<usize>, Vec<bool>) {
        let plan = &self.demos[idx].plans[0];
        (
            plan.actions_reversed.iter().map(|a| a.code() as usize).collect(),
            plan.padded.clone(),
        )
    }
}

impl StateActionSamples for GameDataset {
    fn len(&self) -> usize {
        self.demos.len()
    }

    fn channels(&self) -> usize {
        GAME_CHANNELS
    }

    fn height(&self) -> usize {
        GRID
    }

    fn width(&self) -> usize {
        GRID
    }

    fn action_count(&self) -> usize {
        crate::breakout::GameAction::COUNT
    }

    fn write_state(&self, idx: usize, out: &mut [f32]) {
        out.copy_from_slice(self.demos[idx].state.data());
    }

    fn action(&self, idx: usize) -> usize {
        self.demos[idx].action.code() as usize
    }
}
