//! Mismatch suite on a checkpoint: 13 conditions plus ID/OOD/overall means.
//!
//! cargo run --release --example eval_mismatch -- <checkpoint.abtt> [episodes] [report.csv]

use aerobridge::eval::{run_mismatch_suite, EvalSettings, DEFAULT_EPISODES};
use aerobridge::nets::load_checkpoint;
use aerobridge::run::config_digest;
use aerobridge::tta::DEFAULT_ALPHA;

fn main() -> aerobridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .expect("usage: eval_mismatch <checkpoint.abtt> [episodes] [report.csv]");
    let episodes = args.next().map_or(DEFAULT_EPISODES, |s| {
        s.parse().expect("episodes must be an integer")
    });
    let (agent, meta) = load_checkpoint(&path)?;
    let settings = EvalSettings::new(episodes, DEFAULT_ALPHA, 0);
    let report = run_mismatch_suite(&agent, &settings)?;
    for r in &report.rows {
        println!(
            "{:<14} {:<5} {:>3}/{:<3} {:>7.2}%  final dist {:.2} m",
            r.condition,
            r.group.as_str(),
            r.successes,
            r.episodes,
            r.sr_pct,
            r.mean_final_dist_m
        );
    }
    if let Some(out) = args.next() {
        report.write(out, &config_digest(&(&meta.config_digest, episodes)))?;
    }
    Ok(())
}
