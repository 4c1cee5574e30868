//! Short multi-task run: 40 envs, eight per task, one shared policy.
//!
//! cargo run --release --example train_multitask -- [iterations] [out_dir]

use aerobridge::ppo::{PpoConfig, TrainConfig, Trainer};
use aerobridge::sim::DrPreset;
use aerobridge::task::Task;

fn main() -> aerobridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args
        .next()
        .map_or(Ok(20), |s| s.parse())
        .expect("iterations must be an integer");
    let out = args.next();
    let ppo = PpoConfig {
        total_iterations: iterations,
        ..PpoConfig::multitask()
    };
    let trainer = Trainer::new(TrainConfig::multitask(ppo, DrPreset::Narrow, 0))?;
    let outcome = trainer.run(out.as_deref().map(std::path::Path::new), |log| {
        println!(
            "it {:>3} steps {:>7} sr {:>5.2}",
            log.iteration, log.steps, log.sr
        );
    })?;
    for (task, c) in Task::ALL.iter().zip(&outcome.curricula) {
        println!(
            "task {} curriculum {:.2} m  ema {:.3}",
            task.index(),
            c.distance,
            c.sr_ema
        );
    }
    Ok(())
}
