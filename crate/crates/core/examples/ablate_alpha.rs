//! Latent step-size ablation. Trains a navigate policy with narrow
//! randomization (~2M steps), or loads one, then evaluates it with
//! alpha in {0, 0.02, 0.1} on the four hardest conditions.
//!
//! cargo run --release --example ablate_alpha -- [out_dir] [checkpoint.abtt]

use std::path::PathBuf;
use std::time::Instant;

use aerobridge::eval::{eval_condition, run_default_ablation, EvalSettings};
use aerobridge::nets::load_checkpoint;
use aerobridge::ppo::{PpoConfig, TrainConfig, Trainer};
use aerobridge::run::config_digest;
use aerobridge::sim::{DrPreset, MASS_PLUS_50};
use aerobridge::task::Task;
use aerobridge::tta::DEFAULT_ALPHA;

fn main() -> aerobridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/ablate".into()));
    let start = Instant::now();

    let agent = match args.next() {
        Some(path) => load_checkpoint(path)?.0,
        None => {
            let ppo = PpoConfig {
                // 489 x 4096 ~ 2M environment steps.
                total_iterations: 489,
                ..PpoConfig::smoke()
            };
            let cfg = TrainConfig::single(Task::Navigate, ppo, DrPreset::Narrow, 0);
            let trainer = Trainer::new(cfg)?;
            let outcome = trainer.run(Some(&out), |log| {
                if log.iteration % 10 == 0 {
                    println!(
                        "it {:>4} steps {:>8} sr {:>5.2} ema {:>5.2} dist {:>4.2} [{:.0}s]",
                        log.iteration,
                        log.steps,
                        log.sr,
                        log.sr_ema,
                        log.curriculum_m,
                        start.elapsed().as_secs_f64()
                    );
                }
            })?;
            outcome.agent
        }
    };

    let report = run_default_ablation(&agent, 0)?;
    report.write(
        out.join("ablation.csv"),
        &config_digest(&("ablate-alpha", 0u64)),
    )?;
    for c in &report.cells {
        println!(
            "alpha {:<5} {:<14} sr {:>6.2}%",
            c.alpha, c.row.condition, c.row.sr_pct
        );
    }
    println!("monotone on: {:?}", report.monotone_conditions());

    let (row, _) = eval_condition(
        &agent,
        MASS_PLUS_50,
        &EvalSettings::new(60, DEFAULT_ALPHA, 0),
    )?;
    println!(
        "{MASS_PLUS_50}: sr {:.2}% final dist {:.2} m [{:.0}s]",
        row.sr_pct,
        row.mean_final_dist_m,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
