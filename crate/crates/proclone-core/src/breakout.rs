//! Deterministic mini-Breakout on a 10x10 grid.
//!
//! The game mirrors the structure of a miniature arcade Breakout: a
//! two-cell paddle on the bottom row, a diagonally moving ball, and three
//! rows of bricks at the top. Three actions (left, stay, right) move the
//! paddle one column. The transition function is exact integer arithmetic,
//! so with `sticky_prob = 0` every trajectory is a pure function of the
//! reset seed and the action sequence.
//!
//! Two test-time options degrade naive policies:
//!
//! - sticky actions: with probability `sticky_prob` the previously executed
//!   action is substituted for the commanded one,
//! - difficulty ramping: when the last brick is cleared, the wall refills
//!   and the ball advances one extra sub-step per step from then on.

use crate::rng::Rng;

pub const GRID: usize = 10;
pub const BRICK_ROWS: usize = 3;
pub const PADDLE_WIDTH: usize = 2;
pub const PADDLE_ROW: usize = GRID - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GameAction {
    Left = 0,
    Stay = 1,
    Right = 2,
}

impl GameAction {
    pub const ALL: [GameAction; 3] = [GameAction::Left, GameAction::Stay, GameAction::Right];
    pub const COUNT: usize = 3;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<GameAction> {
        match code {
            0 => Some(GameAction::Left),
            1 => Some(GameAction::Stay),
            2 => Some(GameAction::Right),
            _ => None,
        }
    }

    fn dx(self) -> i32 {
        match self {
            GameAction::Left => -1,
            GameAction::Stay => 0,
            GameAction::Right => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameConfig {
    /// Probability of repeating the previously executed action.
    pub sticky_prob: f32,
    /// Refill bricks and speed the ball up each time the wall is cleared.
    pub ramping: bool,
    /// Episode step budget.
    pub timeout: usize,
    /// Determines the ball spawn at reset.
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            sticky_prob: 0.0,
            ramping: false,
            timeout: 2500,
            seed: 0,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        if !(0.0..=1.0).contains(&self.sticky_prob) {
            return Err(GameError::BadStickyProb(self.sticky_prob));
        }
        if self.timeout == 0 {
            return Err(GameError::ZeroTimeout);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GameError {
    BadStickyProb(f32),
    ZeroTimeout,
    /// `game_step` on a finished episode.
    EpisodeOver,
}

impl core::fmt::Display for GameError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GameError::BadStickyProb(p) => write!(f, "sticky_prob {p} outside [0, 1]"),
            GameError::ZeroTimeout => write!(f, "timeout must be at least 1"),
            GameError::EpisodeOver => write!(f, "cannot step a finished episode"),
        }
    }
}

impl core::error::Error for GameError {}

/// Full game state. A plain value: `clone()` yields a deep, independent
/// copy, which is what tree-search snapshots rely on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameState {
    paddle_col: usize,
    ball: (usize, usize),
    ball_vel: (i32, i32),
    /// One bit per cell, rows 0..3.
    bricks: [u16; BRICK_ROWS],
    steps: usize,
    ramp_level: usize,
    /// Previous ball cell, rendered as the direction-trail channel.
    last_ball: (usize, usize),
    last_executed: GameAction,
    alive: bool,
}

impl GameState {
    pub fn paddle_col(&self) -> usize {
        self.paddle_col
    }

    pub fn ball(&self) -> (usize, usize) {
        self.ball
    }

    pub fn ball_vel(&self) -> (i32, i32) {
        self.ball_vel
    }

    pub fn brick(&self, row: usize, col: usize) -> bool {
        row < BRICK_ROWS && self.bricks[row] & (1 << col) != 0
    }

    pub fn brick_count(&self) -> usize {
        self.bricks.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn ramp_level(&self) -> usize {
        self.ramp_level
    }

    pub fn last_ball(&self) -> (usize, usize) {
        self.last_ball
    }

    /// Action actually applied in the most recent step (after stickiness).
    pub fn last_executed(&self) -> GameAction {
        self.last_executed
    }

    pub fn alive(&self) -> bool {
        self.alive
    }

    fn full_bricks() -> [u16; BRICK_ROWS] {
        [(1 << GRID) - 1; BRICK_ROWS]
    }
}

/// Fresh episode: full brick wall, centered paddle, ball in row 3 moving
/// down from a seed-determined column.
pub fn reset(config: &GameConfig) -> GameState {
    debug_assert!(config.validate().is_ok());
    let mut rng = Rng::new(config.seed).derive(0x42414c4c); // "BALL"
    let col = rng.index(GRID);
    let dc = if rng.bernoulli(0.5) { 1 } else { -1 };
    let ball = (BRICK_ROWS, col);
    let prev_c = col as i32 - dc;
    let last_ball = if (0..GRID as i32).contains(&prev_c) {
        (BRICK_ROWS - 1, prev_c as usize)
    } else {
        ball
    };
    GameState {
        paddle_col: (GRID - PADDLE_WIDTH) / 2,
        ball,
        ball_vel: (1, dc),
        bricks: GameState::full_bricks(),
        steps: 0,
        ramp_level: 0,
        last_ball,
        last_executed: GameAction::Stay,
        alive: true,
    }
}

/// Advance one step. Returns `(reward, done)`. With `sticky_prob = 0` no
/// randomness is consumed.
pub fn game_step(
    state: &mut GameState,
    action: GameAction,
    config: &GameConfig,
    rng: &mut Rng,
) -> Result<(f32, bool), GameError> {
    if !state.alive {
        return Err(GameError::EpisodeOver);
    }

    let executed = if config.sticky_prob > 0.0 && rng.bernoulli(config.sticky_prob) {
        state.last_executed
    } else {
        action
    };
    state.last_executed = executed;

    let col = state.paddle_col as i32 + executed.dx();
    state.paddle_col = col.clamp(0, (GRID - PADDLE_WIDTH) as i32) as usize;

    let mut reward = 0.0f32;
    let sub_steps = if config.ramping {
        1 + state.ramp_level
    } else {
        1
    };
    for _ in 0..sub_steps {
        if !state.alive {
            break;
        }
        let (r, c) = state.ball;
        let (mut dr, mut dc) = state.ball_vel;

        // Horizontal move with side-wall reflection.
        let mut nc = c as i32 + dc;
        if !(0..GRID as i32).contains(&nc) {
            dc = -dc;
            nc = c as i32 + dc;
        }
        let nc = nc as usize;

        // Vertical move with ceiling reflection.
        let mut nr = r as i32 + dr;
        if nr < 0 {
            dr = 1;
            nr = r as i32 + dr;
        }
        let mut nr = nr as usize;

        // Brick hit: clear it, reflect vertically, ball keeps its row.
        if nr < BRICK_ROWS && state.bricks[nr] & (1 << nc) != 0 {
            state.bricks[nr] &= !(1 << nc);
            reward += 1.0;
            dr = -dr;
            nr = r;
            if config.ramping && state.brick_count() == 0 {
                state.bricks = GameState::full_bricks();
                state.ramp_level += 1;
            }
        }

        // Paddle row: bounce when covered, otherwise the episode ends.
        if nr == PADDLE_ROW {
            if nc == state.paddle_col || nc == state.paddle_col + 1 {
                dr = -1;
                nr = r;
            } else {
                state.alive = false;
            }
        }

        state.last_ball = (r, c);
        state.ball = (nr, nc);
        state.ball_vel = (dr, dc);
    }

    state.steps += 1;
    if state.steps >= config.timeout {
        state.alive = false;
    }
    Ok((reward, !state.alive))
}

pub const GAME_CHANNELS: usize = 4;

/// 4-channel binary image: paddle, ball, bricks, previous-ball trail.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTensor {
    data: [f32; GAME_CHANNELS * GRID * GRID],
}

impl GameTensor {
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn from_data(data: &[f32]) -> Option<GameTensor> {
        if data.len() != GAME_CHANNELS * GRID * GRID {
            return None;
        }
        let mut out = [0.0f32; GAME_CHANNELS * GRID * GRID];
        out.copy_from_slice(data);
        Some(GameTensor { data: out })
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * GRID * GRID..(c + 1) * GRID * GRID]
    }
}

pub fn encode_game(state: &GameState) -> GameTensor {
    let mut data = [0.0f32; GAME_CHANNELS * GRID * GRID];
    let cell = |ch: usize, r: usize, c: usize| ch * GRID * GRID + r * GRID + c;
    data[cell(0, PADDLE_ROW, state.paddle_col)] = 1.0;
    data[cell(0, PADDLE_ROW, state.paddle_col + 1)] = 1.0;
    data[cell(1, state.ball.0, state.ball.1)] = 1.0;
    for r in 0..BRICK_ROWS {
        for c in 0..GRID {
            if state.brick(r, c) {
                data[cell(2, r, c)] = 1.0;
            }
        }
    }
    data[cell(3, state.last_ball.0, state.last_ball.1)] = 1.0;
    GameTensor { data }
}

/// Decoded view of a [`GameTensor`], used by round-trip tests.
pub struct DecodedGame {
    pub paddle_col: usize,
    pub ball: (usize, usize),
    pub bricks: [u16; BRICK_ROWS],
}

pub fn decode_game(tensor: &GameTensor) -> DecodedGame {
    let find_one =
        |ch: usize| -> usize { tensor.channel(ch).iter().position(|&v| v == 1.0).unwrap() };
    let paddle_idx = find_one(0);
    let ball_idx = find_one(1);
    let mut bricks = [0u16; BRICK_ROWS];
    for r in 0..BRICK_ROWS {
        for c in 0..GRID {
            if tensor.channel(2)[r * GRID + c] == 1.0 {
                bricks[r] |= 1 << c;
            }
        }
    }
    DecodedGame {
        paddle_col: paddle_idx % GRID,
        ball: (ball_idx / GRID, ball_idx % GRID),
        bricks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn reset_is_deterministic_and_full() {
        let config = GameConfig::default();
        let a = reset(&config);
        let b = reset(&config);
        assert_eq!(a, b);
        assert_eq!(a.brick_count(), 30);
        assert_eq!(a.ball().0, BRICK_ROWS);
        assert_eq!(a.ball_vel().0, 1);
        assert_eq!(a.paddle_col(), 4);
    }

    #[test]
    fn reset_seeds_vary_but_hold_invariants() {
        let mut cols = alloc::collections::BTreeSet::new();
        for seed in 0..10 {
            let state = reset(&GameConfig {
                seed,
                ..GameConfig::default()
            });
            assert!(state.ball().1 < GRID);
            assert_eq!(state.brick_count(), 30);
            cols.insert(state.ball().1);
        }
        assert!(cols.len() > 1, "spawn column should depend on the seed");
    }

    #[test]
    fn deterministic_replay_matches() {
        let config = GameConfig {
            seed: 3,
            ..GameConfig::default()
        };
        let run = || {
            let mut state = reset(&config);
            let mut rng = Rng::new(0);
            let mut rewards = Vec::new();
            for t in 0..200 {
                let action = GameAction::ALL[t % 3];
                match game_step(&mut state, action, &config, &mut rng) {
                    Ok((r, done)) => {
                        rewards.push((r as i32, done));
                        if done {
                            break;
                        }
                    }
                    Err(_) => unreachable!(),
                }
            }
            (rewards, state)
        };
        let (ra, sa) = run();
        let (rb, sb) = run();
        assert_eq!(ra, rb);
        assert_eq!(sa, sb);
    }

    #[test]
    fn stepping_finished_episode_errors() {
        let config = GameConfig {
            timeout: 1,
            ..GameConfig::default()
        };
        let mut state = reset(&config);
        let mut rng = Rng::new(0);
        let (_, done) = game_step(&mut state, GameAction::Stay, &config, &mut rng).unwrap();
        assert!(done);
        assert_eq!(
            game_step(&mut state, GameAction::Stay, &config, &mut rng),
            Err(GameError::EpisodeOver)
        );
    }

    #[test]
    fn brick_hit_rewards_and_reflects() {
        let config = GameConfig::default();
        let mut state = reset(&config);
        let mut rng = Rng::new(0);
        // Point the ball up so the next move enters the brick rows.
        state.ball_vel = (-1, 1);
        let before = state.brick_count();
        let (reward, done) = game_step(&mut state, GameAction::Stay, &config, &mut rng).unwrap();
        assert!(!done);
        assert_eq!(reward, 1.0);
        assert_eq!(state.brick_count(), before - 1);
        assert_eq!(state.ball_vel().0, 1, "vertical velocity flips on brick hit");
        assert_eq!(state.ball().0, BRICK_ROWS, "ball stays out of the brick cell");
    }

    #[test]
    fn sticky_zero_always_executes_command() {
        let config = GameConfig {
            sticky_prob: 0.0,
            ..GameConfig::default()
        };
        let mut state = reset(&config);
        let mut rng = Rng::new(5);
        let before = rng.clone().next_u64();
        for _ in 0..50 {
            if game_step(&mut state, GameAction::Left, &config, &mut rng)
                .map(|(_, d)| d)
                .unwrap_or(true)
            {
                break;
            }
            assert_eq!(state.last_executed(), GameAction::Left);
        }
        // No randomness consumed when sticky_prob = 0.
        assert_eq!(rng.next_u64(), before);
    }

    #[test]
    fn sticky_substitution_rate_near_p() {
        let config = GameConfig {
            sticky_prob: 0.1,
            timeout: usize::MAX >> 1,
            ..GameConfig::default()
        };
        let mut rng = Rng::new(11);
        let mut state = reset(&config);
        let mut substituted = 0usize;
        let total = 100_000usize;
        for _ in 0..total {
            if !state.alive() {
                state = reset(&config);
            }
            // Command an action that differs from the previously executed
            // one, so a substitution is observable exactly.
            let command = match state.last_executed() {
                GameAction::Left => GameAction::Right,
                _ => GameAction::Left,
            };
            game_step(&mut state, command, &config, &mut rng).unwrap();
            if state.last_executed() != command {
                substituted += 1;
            }
        }
        let rate = substituted as f64 / total as f64;
        assert!((rate - 0.1).abs() < 0.01, "substitution rate {rate}");
    }

    #[test]
    fn ramping_refills_and_speeds_up() {
        let config = GameConfig {
            ramping: true,
            timeout: 100_000,
            seed: 1,
            ..GameConfig::default()
        };
        let mut state = reset(&config);
        // Clear all but one brick by hand, then hit the last one.
        state.bricks = [0, 0, 1 << 4];
        state.ball = (3, 3);
        state.ball_vel = (-1, 1);
        let mut rng = Rng::new(0);
        let (reward, _) = game_step(&mut state, GameAction::Stay, &config, &mut rng).unwrap();
        assert_eq!(reward, 1.0);
        assert_eq!(state.brick_count(), 30, "wall refills under ramping");
        assert_eq!(state.ramp_level(), 1);
        // Next step advances two sub-steps.
        let ball = state.ball();
        game_step(&mut state, GameAction::Stay, &config, &mut rng).unwrap();
        let moved = (state.ball().0 as i32 - ball.0 as i32).abs()
            + (state.ball().1 as i32 - ball.1 as i32).abs();
        assert!(moved >= 2 || state.ball_vel() != (-1, 1));
    }

    #[test]
    fn ramp_level_never_decreases() {
        let config = GameConfig {
            ramping: true,
            seed: 2,
            timeout: 5_000,
            ..GameConfig::default()
        };
        let mut state = reset(&config);
        let mut rng = Rng::new(3);
        let mut level = 0;
        for t in 0..5_000 {
            let action = GameAction::ALL[(t / 7) % 3];
            match game_step(&mut state, action, &config, &mut rng) {
                Ok((_, done)) => {
                    assert!(state.ramp_level() >= level);
                    level = state.ramp_level();
                    if done {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let config = GameConfig {
            seed: 9,
            ..GameConfig::default()
        };
        let mut state = reset(&config);
        let mut rng = Rng::new(1);
        for t in 0..40 {
            let tensor = encode_game(&state);
            assert_eq!(tensor.channel(1).iter().sum::<f32>(), 1.0);
            assert_eq!(tensor.channel(0).iter().sum::<f32>(), 2.0);
            let decoded = decode_game(&tensor);
            assert_eq!(decoded.paddle_col, state.paddle_col());
            assert_eq!(decoded.ball, state.ball());
            for r in 0..BRICK_ROWS {
                assert_eq!(decoded.bricks[r], state.bricks[r]);
            }
            let action = GameAction::ALL[t % 3];
            if game_step(&mut state, action, &config, &mut rng).unwrap().1 {
                break;
            }
        }
    }

    #[test]
    fn clone_is_independent() {
        let config = GameConfig::default();
        let mut state = reset(&config);
        let snapshot = state.clone();
        let mut rng = Rng::new(0);
        game_step(&mut state, GameAction::Left, &config, &mut rng).unwrap();
        assert_ne!(state, snapshot);
        assert_eq!(snapshot, reset(&config));
    }

    #[test]
    fn clone_step_interleavings_preserve_invariants() {
        let config = GameConfig {
            seed: 4,
            ..GameConfig::default()
        };
        let mut rng = Rng::new(17);
        let mut states = alloc::vec![reset(&config)];
        for _ in 0..1000 {
            let i = rng.index(states.len());
            if rng.bernoulli(0.3) && states.len() < 32 {
                let copy = states[i].clone();
                states.push(copy);
            } else if states[i].alive() {
                let action = GameAction::ALL[rng.index(3)];
                game_step(&mut states[i], action, &config, &mut rng).unwrap();
            }
            let s = &states[i];
            if s.alive() {
                assert!(s.ball().0 < GRID && s.ball().1 < GRID);
            }
            assert!(s.paddle_col() <= GRID - PADDLE_WIDTH);
            assert!(s.brick_count() <= 30);
        }
    }
}
