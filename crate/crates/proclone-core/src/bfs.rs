//! Breadth-first-search expert with computation traces.
//!
//! The expert answers "what is the first move of a shortest path to the
//! goal" and, while doing so, records the sequence of `visited`-grid
//! snapshots that a procedure-cloning learner trains on:
//!
//! - one snapshot of the initial grid (all unvisited, the start cell
//!   carrying a fixed root token),
//! - one snapshot after each completed expansion level (the search
//!   perimeter grows by one ring of cells per snapshot),
//! - one snapshot per backtrack step, flipping one path cell at a time
//!   from visited to backtracked, ending at the start cell.
//!
//! Expansion is level-synchronous with a canonical parent rule: a newly
//! reached cell adopts the first visited neighbor in U, D, L, R scan order.
//! That makes every snapshot a pure radius-1 function of its predecessor
//! (plus the static wall/goal/agent channels), which is exactly the
//! conditional-independence structure the cloning model assumes, and it
//! keeps ties among equal-length shortest paths deterministic.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{encode, Action, Cell, GridState, Maze, StateTensor};
use crate::rng::Rng;

/// Per-cell search token. Codes are stable: 0 unvisited, 1-4 visited by
/// {U,D,L,R}, 5-8 backtracked with the same action order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellToken {
    Unvisited,
    Visited(Action),
    Backtracked(Action),
}

pub const TOKEN_COUNT: usize = 9;

impl CellToken {
    pub fn code(self) -> u8 {
        match self {
            CellToken::Unvisited => 0,
            CellToken::Visited(a) => 1 + a.code(),
            CellToken::Backtracked(a) => 5 + a.code(),
        }
    }

    pub fn from_code(code: u8) -> Option<CellToken> {
        match code {
            0 => Some(CellToken::Unvisited),
            1..=4 => Some(CellToken::Visited(Action::from_code(code - 1)?)),
            5..=8 => Some(CellToken::Backtracked(Action::from_code(code - 5)?)),
            _ => None,
        }
    }
}

/// Grid of [`CellToken`] codes with the maze's dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitedGrid {
    height: usize,
    width: usize,
    tokens: Vec<u8>,
}

impl VisitedGrid {
    pub fn unvisited(height: usize, width: usize) -> VisitedGrid {
        VisitedGrid {
            height,
            width,
            tokens: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Raw token codes, row-major.
    pub fn codes(&self) -> &[u8] {
        &self.tokens
    }

    pub fn from_codes(height: usize, width: usize, codes: Vec<u8>) -> Option<VisitedGrid> {
        if codes.len() != height * width || codes.iter().any(|&c| c as usize >= TOKEN_COUNT) {
            return None;
        }
        Some(VisitedGrid {
            height,
            width,
            tokens: codes,
        })
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> CellToken {
        CellToken::from_code(self.tokens[cell.0 * self.width + cell.1]).unwrap()
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, token: CellToken) {
        self.tokens[cell.0 * self.width + cell.1] = token.code();
    }

    fn is_visited(&self, cell: Cell) -> bool {
        matches!(self.get(cell), CellToken::Visited(_))
    }
}

/// Snapshot sequence of one expert query, expansion first, backtrack last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcedureTrace {
    pub snapshots: Vec<VisitedGrid>,
}

impl ProcedureTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> &VisitedGrid {
        self.snapshots.last().expect("trace has at least x0")
    }
}

/// One imitation record: encoded state, full trace, expert action.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub state: StateTensor,
    pub trace: ProcedureTrace,
    pub action: Action,
}

impl Demonstration {
    /// Check that the final snapshot's token at the agent cell decodes to
    /// the stored action.
    pub fn is_consistent(&self) -> bool {
        let agent = self.state.agent_pos();
        matches!(self.trace.last().get(agent), CellToken::Backtracked(a) if a == self.action)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BfsError {
    StartOnWall(Cell),
    StartIsGoal(Cell),
}

impl core::fmt::Display for BfsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BfsError::StartOnWall(c) => write!(f, "start cell {c:?} is a wall"),
            BfsError::StartIsGoal(c) => write!(f, "start cell {c:?} already is the goal"),
        }
    }
}

impl core::error::Error for BfsError {}

/// Conventional token for the search root: the start cell has no real entry
/// action, so it is marked `Visited(Right)` in the initial snapshot. The
/// trainer excludes this cell from the x0 prediction loss.
pub const ROOT_TOKEN: CellToken = CellToken::Visited(Action::Right);

/// Neighbor scan order used both to pick a parent for a newly reached cell
/// and (implicitly) to break shortest-path ties.
const SCAN: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

/// Run BFS from `start` to the maze goal, returning the first action of a
/// shortest path together with the full snapshot trace.
pub fn bfs_action_with_trace(
    maze: &Maze,
    start: Cell,
) -> Result<(Action, ProcedureTrace), BfsError> {
    if maze.is_wall(start) {
        return Err(BfsError::StartOnWall(start));
    }
    if start == maze.goal() {
        return Err(BfsError::StartIsGoal(start));
    }
    let (h, w) = (maze.height(), maze.width());
    let goal = maze.goal();

    let mut current = VisitedGrid::unvisited(h, w);
    current.set(start, ROOT_TOKEN);
    let mut snapshots = vec![current.clone()];

    // Expansion: grow the perimeter one level per snapshot until the level
    // that reaches the goal completes. In a connected maze this terminates.
    while !current.is_visited(goal) && !(goal == start) {
        let mut next = current.clone();
        let mut grew = false;
        for r in 0..h {
            for c in 0..w {
                let cell = (r, c);
                if maze.is_wall(cell) || current.get(cell) != CellToken::Unvisited {
                    continue;
                }
                // Adopt the first visited neighbor in scan order as parent.
                for scan in SCAN {
                    let parent = maze.neighbor(cell, scan);
                    if parent != cell && current.is_visited(parent) {
                        next.set(cell, CellToken::Visited(scan.opposite()));
                        grew = true;
                        break;
                    }
                }
            }
        }
        debug_assert!(grew, "expansion stalled before reaching the goal");
        current = next;
        snapshots.push(current.clone());
        if !grew {
            break;
        }
    }

    // Reconstruct the shortest path goal -> start by following each cell's
    // entry action backwards.
    let mut path = vec![goal];
    while *path.last().unwrap() != start {
        let cell = *path.last().unwrap();
        let token = current.get(cell);
        let CellToken::Visited(entry) = token else {
            unreachable!("path cells are visited during expansion");
        };
        let parent = maze.neighbor(cell, entry.opposite());
        debug_assert_ne!(parent, cell);
        path.push(parent);
    }

    // Backtrack: flip one path cell per snapshot, goal side first. The goal
    // keeps its visited token; every other path cell keeps its own entry
    // action, except the start cell which copies its successor's action
    // (the first move of the path).
    let mut action = None;
    for i in 1..path.len() {
        let cell = path[i];
        let flip = if cell == start {
            let successor = path[i - 1];
            let a = match current.get(successor) {
                CellToken::Visited(a) | CellToken::Backtracked(a) => a,
                CellToken::Unvisited => unreachable!(),
            };
            action = Some(a);
            a
        } else {
            match current.get(cell) {
                CellToken::Visited(a) => a,
                _ => unreachable!(),
            }
        };
        current.set(cell, CellToken::Backtracked(flip));
        snapshots.push(current.clone());
    }

    let action = action.expect("path ends at start");
    Ok((action, ProcedureTrace { snapshots }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetError {
    Bfs(BfsError),
    /// An expert episode failed to reach the goal within the step budget,
    /// which would silently truncate the dataset.
    ExpertTimeout {
        maze_index: usize,
        trajectory: usize,
        steps: usize,
    },
    NoOpenStart {
        maze_index: usize,
    },
}

impl core::fmt::Display for DatasetError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DatasetError::Bfs(e) => write!(f, "expert query failed: {e}"),
            DatasetError::ExpertTimeout {
                maze_index,
                trajectory,
                steps,
            } => write!(
                f,
                "expert episode timed out after {steps} steps (maze {maze_index}, trajectory {trajectory})"
            ),
            DatasetError::NoOpenStart { maze_index } => {
                write!(f, "maze {maze_index} has no open non-goal cell to start from")
            }
        }
    }
}

impl core::error::Error for DatasetError {}

impl From<BfsError> for DatasetError {
    fn from(e: BfsError) -> Self {
        DatasetError::Bfs(e)
    }
}

/// Roll expert episodes from random starts and record one [`Demonstration`]
/// per MDP step. Episode generators derive from `(seed, maze index,
/// trajectory index)` so collection order never changes the data.
pub fn collect_dataset(
    mazes: &[Maze],
    trajectories_per_maze: usize,
    timeout: usize,
    seed: u64,
) -> Result<Vec<Demonstration>, DatasetError> {
    assert!(timeout >= 1, "timeout must be at least one step");
    let root = Rng::new(seed);
    let mut demos = Vec::new();
    for (mi, maze) in mazes.iter().enumerate() {
        let starts: Vec<Cell> = maze
            .open_cells()
            .filter(|&c| c != maze.goal())
            .collect();
        if starts.is_empty() {
            return Err(DatasetError::NoOpenStart { maze_index: mi });
        }
        for t in 0..trajectories_per_maze {
            let mut rng = root.derive(mi as u64).derive(t as u64);
            let mut state = GridState::new(maze, starts[rng.index(starts.len())]);
            let mut steps = 0;
            while state.agent != maze.goal() {
                if steps >= timeout {
                    return Err(DatasetError::ExpertTimeout {
                        maze_index: mi,
                        trajectory: t,
                        steps,
                    });
                }
                let (action, trace) = bfs_action_with_trace(maze, state.agent)?;
                demos.push(Demonstration {
                    state: encode(state),
                    trace,
                    action,
                });
                state = crate::grid::step(state, action);
                steps += 1;
            }
        }
    }
    Ok(demos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    /// 3x5 maze whose only open cells form a 1x3 corridor in row 1.
    fn corridor() -> Maze {
        let mut walls = vec![true; 15];
        for c in 1..=3 {
            walls[5 + c] = false;
        }
        Maze::from_parts(3, 5, walls, (1, 3), 99).unwrap()
    }

    #[test]
    fn corridor_trace_matches_hand_execution() {
        let maze = corridor();
        let (action, trace) = bfs_action_with_trace(&maze, (1, 1)).unwrap();
        assert_eq!(action, Action::Right);
        // x0 + 2 expansion levels + 2 backtrack steps.
        assert_eq!(trace.len(), 5);

        let x0 = &trace.snapshots[0];
        assert_eq!(x0.get((1, 1)), ROOT_TOKEN);
        assert_eq!(x0.get((1, 2)), CellToken::Unvisited);

        let x1 = &trace.snapshots[1];
        assert_eq!(x1.get((1, 2)), CellToken::Visited(Action::Right));
        assert_eq!(x1.get((1, 3)), CellToken::Unvisited);

        let x2 = &trace.snapshots[2];
        assert_eq!(x2.get((1, 3)), CellToken::Visited(Action::Right));

        let x3 = &trace.snapshots[3];
        assert_eq!(x3.get((1, 2)), CellToken::Backtracked(Action::Right));
        assert_eq!(x3.get((1, 3)), CellToken::Visited(Action::Right));

        let x4 = &trace.snapshots[4];
        assert_eq!(x4.get((1, 1)), CellToken::Backtracked(Action::Right));
        assert_eq!(x4.get((1, 3)), CellToken::Visited(Action::Right));
    }

    #[test]
    fn one_step_to_goal() {
        // Goal directly below the start in the corridor rotated: use a
        // generated maze and pick a start adjacent to its goal.
        let maze = Maze::generate(5, 9).unwrap();
        let goal = maze.goal();
        let start = Action::ALL
            .iter()
            .map(|&a| maze.neighbor(goal, a))
            .find(|&c| c != goal)
            .unwrap();
        let (action, trace) = bfs_action_with_trace(&maze, start).unwrap();
        assert_eq!(maze.neighbor(start, action), goal);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.last().get(start), CellToken::Backtracked(action));
    }

    #[test]
    fn rejects_invalid_starts() {
        let maze = corridor();
        assert_eq!(
            bfs_action_with_trace(&maze, (0, 0)),
            Err(BfsError::StartOnWall((0, 0)))
        );
        assert_eq!(
            bfs_action_with_trace(&maze, (1, 3)),
            Err(BfsError::StartIsGoal((1, 3)))
        );
    }

    /// Unit-weight Dijkstra distances, independent of the BFS implementation.
    fn dijkstra_dist(maze: &Maze, from: Cell) -> Vec<usize> {
        let (h, w) = (maze.height(), maze.width());
        let mut dist = vec![usize::MAX; h * w];
        dist[from.0 * w + from.1] = 0;
        let mut frontier = vec![from];
        // Unit weights: plain level relaxation is exact Dijkstra.
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for cell in frontier {
                let d = dist[cell.0 * w + cell.1];
                for a in Action::ALL {
                    let n = maze.neighbor(cell, a);
                    if n != cell && dist[n.0 * w + n.1] > d + 1 {
                        dist[n.0 * w + n.1] = d + 1;
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    #[test]
    fn expert_walk_follows_shortest_paths() {
        for seed in 0..6u64 {
            let maze = Maze::generate(seed, 11).unwrap();
            let dist = dijkstra_dist(&maze, maze.goal());
            for start in maze.open_cells().filter(|&c| c != maze.goal()) {
                let mut state = GridState::new(&maze, start);
                let expected = dist[start.0 * maze.width() + start.1];
                let mut walked = 0;
                while state.agent != maze.goal() {
                    let (action, _) = bfs_action_with_trace(&maze, state.agent).unwrap();
                    state = crate::grid::step(state, action);
                    walked += 1;
                    assert!(walked <= expected, "walk exceeded the oracle distance");
                }
                assert_eq!(walked, expected, "start {start:?} seed {seed}");
            }
        }
    }

    #[test]
    fn trace_snapshots_satisfy_invariants() {
        let maze = Maze::generate(21, 11).unwrap();
        let start = maze
            .open_cells()
            .find(|&c| c != maze.goal())
            .unwrap();
        let (action, trace) = bfs_action_with_trace(&maze, start).unwrap();

        // Monotone expansion while no cell is backtracked yet.
        let mut seen_backtrack = false;
        for pair in trace.snapshots.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let backtracking = b
                .codes()
                .iter()
                .zip(a.codes())
                .any(|(&nb, &na)| nb >= 5 && na < 5);
            if backtracking {
                seen_backtrack = true;
            }
            if !seen_backtrack {
                for (&na, &nb) in a.codes().iter().zip(b.codes()) {
                    assert!(na == 0 || nb == na, "expansion must not rewrite tokens");
                }
            }
        }

        // Walls stay unvisited everywhere.
        for snap in &trace.snapshots {
            for (i, &code) in snap.codes().iter().enumerate() {
                let cell = (i / maze.width(), i % maze.width());
                if maze.is_wall(cell) {
                    assert_eq!(code, 0);
                }
            }
        }

        // Non-start backtracked cells keep their expansion action.
        let last = trace.last();
        for (i, &code) in last.codes().iter().enumerate() {
            let cell = (i / maze.width(), i % maze.width());
            if code >= 5 && cell != start {
                let visited_code = code - 4; // Backtracked(a) -> Visited(a)
                assert!(
                    trace
                        .snapshots
                        .iter()
                        .any(|s| s.codes()[i] == visited_code),
                    "cell {cell:?} was never visited with its backtracked action"
                );
            }
        }
        assert_eq!(last.get(start), CellToken::Backtracked(action));
    }

    #[test]
    fn collect_counts_and_consistency() {
        let mazes: Vec<Maze> = (0..5).map(|s| Maze::generate(s, 9).unwrap()).collect();
        let demos = collect_dataset(&mazes, 1, 100, 7).unwrap();
        assert!(!demos.is_empty());
        for d in &demos {
            assert!(d.is_consistent());
        }
        let empty = collect_dataset(&mazes, 0, 100, 7).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn collect_is_deterministic() {
        let mazes: Vec<Maze> = (0..3).map(|s| Maze::generate(s, 9).unwrap()).collect();
        let a = collect_dataset(&mazes, 2, 100, 7).unwrap();
        let b = collect_dataset(&mazes, 2, 100, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn timeout_is_surfaced() {
        let mazes = vec![Maze::generate(0, 17).unwrap()];
        let err = collect_dataset(&mazes, 4, 1, 3).unwrap_err();
        assert!(matches!(err, DatasetError::ExpertTimeout { .. }));
    }
}
