//! Single-task smoke training: navigate to a fixed 2 m goal without
//! randomization, stopping once the success-rate EMA reaches 80%.
//!
//! cargo run --release --example train_smoke -- [out_dir]

use std::time::Instant;

use aerobridge::ppo::{PpoConfig, TrainConfig, Trainer};
use aerobridge::sim::DrPreset;
use aerobridge::task::Task;

fn main() -> aerobridge::Result<()> {
    let out = std::env::args().nth(1);
    let ppo = PpoConfig {
        // 1M environment steps at 4096 per iteration.
        total_iterations: 245,
        ..PpoConfig::smoke()
    };
    let cfg = TrainConfig {
        fixed_distance: Some(2.0),
        stop_at_sr_ema: Some(0.8),
        ..TrainConfig::single(Task::Navigate, ppo, DrPreset::Off, 0)
    };
    let start = Instant::now();
    let trainer = Trainer::new(cfg)?;
    let outcome = trainer.run(out.as_deref().map(std::path::Path::new), |log| {
        println!(
            "it {:>4} steps {:>8} sr {:>5.2} ema {:>5.2} len {:>6.1} r {:>6.3} pi {:>7.4} v {:>7.4} ent {:>6.3} [{:.0}s]",
            log.iteration,
            log.steps,
            log.sr,
            log.sr_ema,
            log.mean_ep_len,
            log.mean_reward,
            log.update.loss.policy,
            log.update.loss.value,
            log.update.loss.entropy,
            start.elapsed().as_secs_f64()
        );
    })?;
    let last = outcome.logs.last().expect("at least one iteration");
    println!(
        "finished after {} steps, success-rate EMA {:.3}",
        outcome.env_steps, last.sr_ema
    );
    Ok(())
}
