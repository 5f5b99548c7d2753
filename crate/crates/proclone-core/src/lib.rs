//! Core library for imitation-learning experiments that compare behavioral
//! cloning against procedure cloning (predicting an expert algorithm's
//! intermediate computations before its final action).
//!
//! The crate is split into:
//!
//! - environments: a generated-maze gridworld ([`grid`]) and a deterministic
//!   mini-Breakout ([`breakout`]),
//! - experts: breadth-first search with computation traces ([`bfs`]) and
//!   UCT Monte-Carlo tree search ([`mcts`]),
//! - numerics: dense tensors with layer-wise reverse-mode gradients and the
//!   Adam optimizer ([`nn`]),
//! - learners: the BC / Aug-BC / Aux-BC / PC trainers and their
//!   inference-time policies ([`cloning`]).
//!
//! Everything here is pure computation over owned buffers: no files, no
//! clocks, no threads. All randomness flows through the counter-based
//! generator in [`rng`], so results are reproducible across platforms. The
//! crate is `no_std`-compatible (with `alloc`); the companion `proclone`
//! crate carries IO, file formats, and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bfs;
pub mod breakout;
pub mod cloning;
pub mod grid;
pub mod mcts;
pub mod nn;
pub mod rng;

pub use rng::Rng;
