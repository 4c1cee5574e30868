//! Saves a freshly initialized agent and reloads it bit-for-bit.

use aerobridge::nets::{
    load_checkpoint, save_checkpoint, weights_digest, Agent, AgentArch, CheckpointMeta,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aerobridge::Result<()> {
    let agent: Agent<f32> = Agent::new(AgentArch::default(), &mut ChaCha8Rng::seed_from_u64(0));
    let meta = CheckpointMeta {
        config_digest: "example".into(),
        iteration: 0,
        seed: 0,
    };
    let dir = std::env::temp_dir().join("aerobridge-checkpoint-example");
    let path = dir.join("init.abtt");
    save_checkpoint(&agent, &meta, &path)?;
    let (back, back_meta) = load_checkpoint(&path)?;
    println!(
        "saved {} bytes to {}",
        std::fs::metadata(&path).map_or(0, |m| m.len()),
        path.display()
    );
    println!("weights digest  {}", weights_digest(&agent));
    println!("reloaded digest {}", weights_digest(&back));
    println!("identical: {}", back == agent && back_meta == meta);
    Ok(())
}
