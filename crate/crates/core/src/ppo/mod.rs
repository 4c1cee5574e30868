//! Proximal policy optimization over the full agent.

pub mod buffer;
pub mod config;
pub mod gae;
pub mod loss;
pub mod rollout;
pub mod train;
pub mod update;

pub use buffer::RolloutBuffer;
pub use config::PpoConfig;
pub use gae::compute_gae;
pub use loss::{ppo_loss_and_grad, LossCoefs, LossStats, Minibatch};
pub use rollout::{collect_rollout, RolloutStats, VecEnv};
pub use train::{train, IterationLog, TaskSelection, TrainConfig, TrainOutcome, Trainer};
pub use update::{ppo_update, UpdateStats};
