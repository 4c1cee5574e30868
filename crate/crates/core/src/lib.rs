//! Quadrotor control stack with language-routed tasks, a latent-conditioned
//! Gaussian policy adapted online from observed transitions, a from-scratch
//! PPO trainer, and a dynamics-mismatch evaluation harness.
//!
//! Each capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run --release --example <name>
//! ```

pub mod cli;
pub mod env;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod nets;
pub mod ppo;
pub mod run;
pub mod sim;
pub mod task;
pub mod tta;

pub use error::{Error, Result};
