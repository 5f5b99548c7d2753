//! The imitation learners: behavioral cloning (vanilla, augmented, and
//! auxiliary-task variants) and procedure cloning in both factorizations
//! (conditionally independent snapshot prediction for the maze task,
//! goal-conditioned autoregressive sequence prediction for the game task),
//! together with their training objectives and inference-time policies.

pub mod augment;
pub mod data;
pub mod models;
pub mod policy;
pub mod train;

pub use augment::AugmentConfig;
pub use data::{GameDataset, MazeDataset, StateActionSamples};
pub use models::{AuxBcPolicy, BcPolicy, PcArModel, PcCiModel};
pub use policy::{pc_ar_act, pc_ar_act_with_goal, pc_ci_act, pc_ci_act_traced, PcCiRollout};
pub use train::{
    train_aug_bc, train_aux_bc, train_bc, train_pc_ar, train_pc_ci, EarlyStop, MetricRow,
    TrainConfig, TrainResult,
};
