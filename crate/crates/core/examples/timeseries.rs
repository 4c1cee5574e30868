//! Goal distance and latent norm over time, 10 episodes per condition.
//!
//! cargo run --release --example timeseries -- <checkpoint.abtt> [out.csv]

use aerobridge::eval::{emit_timeseries, timeseries, EvalSettings};
use aerobridge::nets::load_checkpoint;
use aerobridge::run::config_digest;
use aerobridge::tta::DEFAULT_ALPHA;

const CONDITIONS: [&str; 3] = ["nominal", "mass+30", "combined-hard"];

fn main() -> aerobridge::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .expect("usage: timeseries <checkpoint.abtt> [out.csv]");
    let (agent, _) = load_checkpoint(&path)?;
    let settings = EvalSettings::new(10, DEFAULT_ALPHA, 0);
    let rows = match args.next() {
        Some(out) => emit_timeseries(
            &agent,
            &CONDITIONS,
            &settings,
            out,
            &config_digest(&("timeseries", &path)),
        )?,
        None => timeseries(&agent, &CONDITIONS, &settings)?,
    };
    for r in rows.iter().filter(|r| r.step % 50 == 0) {
        println!(
            "{:<14} t={:>3}  dist {:>6.3} ± {:<6.3} |z| {:>6.3} ± {:.3}",
            r.condition, r.step, r.dist_mean, r.dist_std, r.znorm_mean, r.znorm_std
        );
    }
    Ok(())
}
