//! Dense networks: MLP forward/backward, initialization, the agent's heads,
//! optimizer, and checkpoint serialization.

pub mod agent;
pub mod checkpoint;
pub mod gaussian;
pub mod init;
pub mod mlp;
pub mod optim;
pub mod scalar;
pub mod tensor;

pub use agent::{Agent, AgentArch};
pub use checkpoint::{load_checkpoint, save_checkpoint, weights_digest, CheckpointMeta};
pub use mlp::{Activation, Mlp};
pub use scalar::Real;
pub use tensor::Tensor;
