//! Quick expert-quality measurement: MCTS vs uniform random.
use proclone_core::breakout::{game_step, reset, GameAction, GameConfig};
use proclone_core::mcts::{run_mcts, GameSim, MctsConfig};
use proclone_core::Rng;
use std::time::Instant;

fn main() {
    let base = GameConfig { timeout: 400, ..GameConfig::default() };
    let mcts = MctsConfig { num_simulations: 500, ..MctsConfig::default() };
    let episodes = 10;

    let mut rng = Rng::new(123);
    let mut rand_total = 0.0f64;
    for ep in 0..20u64 {
        let cfg = GameConfig { seed: ep, ..base };
        let mut s = reset(&cfg);
        let mut total = 0.0f32;
        while s.alive() {
            let a = GameAction::ALL[rng.index(3)];
            let (r, done) = game_step(&mut s, a, &cfg, &mut rng).unwrap();
            total += r;
            if done { break; }
        }
        rand_total += total as f64;
    }
    println!("random mean reward: {:.2}", rand_total / 20.0);

    let t0 = Instant::now();
    let mut mcts_total = 0.0f64;
    for ep in 0..episodes as u64 {
        let cfg = GameConfig { seed: 1000 + ep, ..base };
        let sim = GameSim { config: cfg };
        let mut s = reset(&cfg);
        let mut total = 0.0f32;
        let mut calls = 0u32;
        while s.alive() {
            let mut srng = Rng::new(ep).derive(s.steps() as u64);
            let (a, _) = run_mcts(&sim, s.clone(), &mcts, &mut srng);
            calls += 1;
            let a = GameAction::from_code(a as u8).unwrap();
            let mut er = Rng::new(0);
            let (r, done) = game_step(&mut s, a, &cfg, &mut er).unwrap();
            total += r;
            if done { break; }
        }
        println!("  mcts ep {ep}: reward {total:.0}, steps {}, calls {calls}", s.steps());
        mcts_total += total as f64;
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("mcts mean reward: {:.2} ({:.1} s total, {:.1} ms/call)", mcts_total / episodes as f64, dt, 1000.0 * dt / (episodes as f64 * 400.0));
}
