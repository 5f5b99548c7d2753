//! Desk-scale calibration: PC-CI and BC at 16x16 / 40 mazes.
use proclone_core::bfs::collect_dataset;
use proclone_core::cloning::*;
use proclone_core::grid::{encode, split_mazes, step, Action, GridState, Maze};
use proclone_core::Rng;
use std::time::Instant;

fn eval_success(
    mazes: &[Maze],
    per_maze: usize,
    timeout: usize,
    seed: u64,
    mut act: impl FnMut(&proclone_core::grid::StateTensor, &mut Rng) -> Action,
) -> f32 {
    let root = Rng::new(seed);
    let mut successes = 0usize;
    let mut episodes = 0usize;
    for (mi, maze) in mazes.iter().enumerate() {
        let starts: Vec<_> = maze.open_cells().filter(|&c| c != maze.goal()).collect();
        for t in 0..per_maze {
            let mut rng = root.derive(mi as u64).derive(t as u64);
            let mut state = GridState::new(maze, starts[rng.index(starts.len())]);
            episodes += 1;
            for _ in 0..timeout {
                if state.agent == maze.goal() { break; }
                let tensor = encode(state);
                let a = act(&tensor, &mut rng);
                state = step(state, a);
            }
            if state.agent == maze.goal() { successes += 1; }
        }
    }
    successes as f32 / episodes as f32
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let budget: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let seeds: Vec<u64> = (0..80).collect();
    let (train_mazes, test_mazes) = split_mazes(&seeds, 17, budget, 10).unwrap();
    let t0 = Instant::now();
    let demos = collect_dataset(&train_mazes, 1, 100, seed ^ 0xD5).unwrap();
    println!("collected {} demos ({} mazes) in {:?}", demos.len(), budget, t0.elapsed());
    let data = MazeDataset::new(demos);
    println!("pairs: {}", data.pair_count());

    // PC-CI
    let config = TrainConfig {
        seed,
        train_steps: 4000,
        early_stop: EarlyStop { enabled: true, check_every: 100, threshold: 0.995, patience: 15, min_steps: 300 },
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let result = train_pc_ci(&data, &config);
    let train_time = t0.elapsed();
    let probe: Vec<usize> = (0..data.pair_count()).collect();
    let exact = proclone_core::cloning::train::pc_ci_exact_pair_fraction(&result.model, &data, &probe);
    println!("pc_ci: steps {} in {:?}, all-pair exact {:.4}", result.steps_run, train_time, exact);

    let mut agree = 0usize;
    let mut rng = Rng::new(1);
    let t0 = Instant::now();
    for demo in data.demos() {
        let r = pc_ci_act_traced(&result.model, &demo.state, 100, &mut rng);
        if !r.timed_out && r.action == demo.action { agree += 1; }
    }
    println!("pc_ci expert-action agreement on train states: {:.4} ({:?})", agree as f32 / data.demos().len() as f32, t0.elapsed());

    let t0 = Instant::now();
    let model = &result.model;
    let test_sr = eval_success(&test_mazes, 5, 100, 99, |s, r| pc_ci_act(model, s, 100, r));
    println!("pc_ci TEST success: {:.3} (eval {:?})", test_sr, t0.elapsed());
    let train_sr = eval_success(&train_mazes[..10.min(train_mazes.len())], 5, 100, 98, |s, r| pc_ci_act(model, s, 100, r));
    println!("pc_ci TRAIN success: {:.3}", train_sr);

    // BC
    let config = TrainConfig {
        seed,
        train_steps: 4000,
        early_stop: EarlyStop { enabled: true, check_every: 100, threshold: 0.995, patience: 15, min_steps: 300 },
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let bc = train_bc(&data, &config);
    println!("bc: steps {} in {:?}", bc.steps_run, t0.elapsed());
    let policy = &bc.model;
    let t0 = Instant::now();
    let test_sr = eval_success(&test_mazes, 5, 100, 99, |s, _| Action::from_code(policy.act(s.data()) as u8).unwrap());
    let train_sr = eval_success(&train_mazes[..10.min(train_mazes.len())], 5, 100, 98, |s, _| Action::from_code(policy.act(s.data()) as u8).unwrap());
    println!("bc TEST success: {:.3}  TRAIN success: {:.3} (eval {:?})", test_sr, train_sr, t0.elapsed());
}
