//! Command-line front end. Flags can also come from a JSON file given with
//! `--config`; a flag on the command line always wins over the file.
//!
//! Failures print one line, `error: kind=<kind> code=<n> msg=<text>`, and
//! exit with the code from [`Error::exit_code`] (2 for usage errors).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    emit_timeseries, run_alpha_ablation, run_mismatch_suite, EvalSettings, ABLATION_CONDITIONS,
    ABLATION_EPISODES, DEFAULT_EPISODES,
};
use crate::grounding::{load_bundle, load_query_fixture, route, ParaphraseBundle, Route};
use crate::nets::{load_checkpoint, weights_digest};
use crate::ppo::{PpoConfig, TrainConfig, Trainer};
use crate::run::config_digest;
use crate::sim::DrPreset;
use crate::task::Task;
use crate::tta::{ABLATION_ALPHAS, DEFAULT_ALPHA};

pub const USAGE_EXIT_CODE: i32 = 2;
pub const DEFAULT_TIMESERIES_EPISODES: usize = 10;
pub const DEFAULT_TIMESERIES_CONDITIONS: &str = "nominal,mass+30,combined-hard";

#[derive(Debug, Parser)]
#[command(
    name = "aerobridge",
    version,
    about = "Quadrotor command-conditioned control with test-time latent adaptation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Train a single-task policy
    Train,
    /// Train one policy on all five tasks
    TrainMultitask,
    /// Evaluate a checkpoint on the 13-condition mismatch suite
    EvalMismatch,
    /// Evaluate a checkpoint at alpha in {0, 0.02, 0.1} on the hardest conditions
    AblateAlpha,
    /// Per-step goal distance and latent norm, mean and std over episodes
    Timeseries,
    /// Route a free-form command to a task id
    Route,
    /// Check a paraphrase bundle (and optionally score a labeled query fixture)
    ValidateBundle,
}

/// Every flag is optional so that values from `--config` can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// JSON file with flag values (keys are flag names) [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Task id 0-4 [default: 0]
    #[arg(long, global = true, value_name = "ID")]
    pub task: Option<usize>,
    /// Domain randomization preset: narrow, wide or off [default: narrow]
    #[arg(long, global = true, value_name = "PRESET")]
    pub dr: Option<DrPreset>,
    /// PPO iterations [default: 250]
    #[arg(long, global = true, value_name = "N")]
    pub iterations: Option<usize>,
    /// Environment steps per iteration, summed over envs [default: 4096; 4000 for train-multitask]
    #[arg(long, global = true, value_name = "N")]
    pub steps_per_iter: Option<usize>,
    /// Parallel environments [default: 32; 40 for train-multitask]
    #[arg(long, global = true, value_name = "N")]
    pub envs: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Latent step size [default: 0.1]
    #[arg(long, global = true, value_name = "A")]
    pub alpha: Option<f64>,
    /// Episodes per condition [default: 60; 30 for ablate-alpha; 10 for timeseries]
    #[arg(long, global = true, value_name = "N")]
    pub episodes: Option<usize>,
    /// Paraphrase embedding bundle (JSON) [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    pub bundle: Option<PathBuf>,
    /// Checkpoint to evaluate (.abtt) [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Step environments on the calling thread only [default: false]
    #[arg(long, global = true)]
    #[serde(default)]
    pub deterministic_single_thread: bool,
    /// Save a checkpoint every N iterations, 0 for final only [default: 0]
    #[arg(long, global = true, value_name = "N")]
    pub checkpoint_every: Option<usize>,
    /// Command text to route [default: none]
    #[arg(long, global = true, value_name = "TEXT")]
    pub text: Option<String>,
    /// Labeled query fixture (JSON) with precomputed embeddings [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    pub queries: Option<PathBuf>,
    /// JSON array holding the query embedding for `route` [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Reject routes whose best score is below this [default: none]
    #[arg(long, global = true, value_name = "S")]
    pub min_score: Option<f64>,
    /// Comma-separated conditions for timeseries [default: nominal,mass+30,combined-hard]
    #[arg(long, global = true, value_name = "LIST")]
    pub conditions: Option<String>,
}

impl Flags {
    /// Command-line values over file values.
    pub fn over(self, file: Flags) -> Flags {
        Flags {
            config: self.config,
            task: self.task.or(file.task),
            dr: self.dr.or(file.dr),
            iterations: self.iterations.or(file.iterations),
            steps_per_iter: self.steps_per_iter.or(file.steps_per_iter),
            envs: self.envs.or(file.envs),
            seed: self.seed.or(file.seed),
            alpha: self.alpha.or(file.alpha),
            episodes: self.episodes.or(file.episodes),
            bundle: self.bundle.or(file.bundle),
            checkpoint: self.checkpoint.or(file.checkpoint),
            out: self.out.or(file.out),
            deterministic_single_thread: self.deterministic_single_thread
                || file.deterministic_single_thread,
            checkpoint_every: self.checkpoint_every.or(file.checkpoint_every),
            text: self.text.or(file.text),
            queries: self.queries.or(file.queries),
            embedding: self.embedding.or(file.embedding),
            min_score: self.min_score.or(file.min_score),
            conditions: self.conditions.or(file.conditions),
        }
    }

    pub fn load_file(path: &Path) -> Result<Flags> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings of one invocation; its digest tags every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub train: Option<TrainConfig>,
    pub eval: Option<EvalPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPlan {
    pub checkpoint: PathBuf,
    pub weights_digest: String,
    pub alpha: f64,
    pub episodes: usize,
    pub conditions: Vec<String>,
}

fn reject(flags: &[(&str, bool)], command: &str) -> Result<()> {
    match flags.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(Error::config(format!(
            "--{name} cannot be used with {command}"
        ))),
        None => Ok(()),
    }
}

fn workers(flags: &Flags) -> usize {
    if flags.deterministic_single_thread {
        1
    } else {
        std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(8)
    }
}

fn train_config(command: Command, f: &Flags) -> Result<TrainConfig> {
    let multi = command == Command::TrainMultitask;
    if multi {
        reject(&[("task", f.task.is_some())], "train-multitask")?;
    }
    let base = if multi {
        PpoConfig::multitask()
    } else {
        PpoConfig::smoke()
    };
    let ppo = PpoConfig {
        total_iterations: f.iterations.unwrap_or(base.total_iterations),
        rollout_steps_total: f.steps_per_iter.unwrap_or(base.rollout_steps_total),
        n_envs: f.envs.unwrap_or(base.n_envs),
        alpha: f.alpha.unwrap_or(base.alpha),
        ..base
    };
    let dr = f.dr.unwrap_or(DrPreset::Narrow);
    let seed = f.seed.unwrap_or(0);
    let mut cfg = if multi {
        TrainConfig::multitask(ppo, dr, seed)
    } else {
        TrainConfig::single(Task::from_index(f.task.unwrap_or(0))?, ppo, dr, seed)
    };
    cfg.checkpoint_every = f.checkpoint_every.unwrap_or(0);
    cfg.workers = workers(f);
    cfg.validate()?;
    Ok(cfg)
}

fn eval_plan(command: Command, f: &Flags) -> Result<EvalPlan> {
    let name = match command {
        Command::EvalMismatch => "eval-mismatch",
        Command::AblateAlpha => "ablate-alpha",
        _ => "timeseries",
    };
    reject(
        &[
            ("iterations", f.iterations.is_some()),
            ("steps-per-iter", f.steps_per_iter.is_some()),
            ("envs", f.envs.is_some()),
            ("dr", f.dr.is_some()),
        ],
        name,
    )?;
    if command == Command::AblateAlpha {
        reject(&[("alpha", f.alpha.is_some())], name)?;
    }
    if command != Command::Timeseries {
        reject(&[("conditions", f.conditions.is_some())], name)?;
    }
    let checkpoint = f
        .checkpoint
        .clone()
        .ok_or_else(|| Error::config(format!("{name} requires --checkpoint")))?;
    let (agent, _) = load_checkpoint(&checkpoint)?;
    let conditions: Vec<String> = match command {
        Command::EvalMismatch => Vec::new(),
        Command::AblateAlpha => ABLATION_CONDITIONS.iter().map(|s| s.to_string()).collect(),
        _ => f
            .conditions
            .as_deref()
            .unwrap_or(DEFAULT_TIMESERIES_CONDITIONS)
            .split(',')
            .map(|s| s.trim().to_string())
            .collect(),
    };
    let default_episodes = match command {
        Command::EvalMismatch => DEFAULT_EPISODES,
        Command::AblateAlpha => ABLATION_EPISODES,
        _ => DEFAULT_TIMESERIES_EPISODES,
    };
    let plan = EvalPlan {
        checkpoint,
        weights_digest: weights_digest(&agent),
        alpha: f.alpha.unwrap_or(DEFAULT_ALPHA),
        episodes: f.episodes.unwrap_or(default_episodes),
        conditions,
    };
    EvalSettings::new(plan.episodes, plan.alpha, 0).validate()?;
    for c in &plan.conditions {
        crate::sim::mismatch_condition(c)?;
    }
    Ok(plan)
}

/// Validates flag combinations and fills in defaults.
pub fn resolve(command: Command, f: &Flags) -> Result<RunConfig> {
    let (train, eval) = match command {
        Command::Train | Command::TrainMultitask => (Some(train_config(command, f)?), None),
        Command::EvalMismatch | Command::AblateAlpha | Command::Timeseries => {
            (None, Some(eval_plan(command, f)?))
        }
        Command::Route | Command::ValidateBundle => {
            if f.bundle.is_none() {
                return Err(Error::config("--bundle is required"));
            }
            if command == Command::Route && f.text.is_none() && f.embedding.is_none() {
                return Err(Error::config("route requires --text or --embedding"));
            }
            (None, None)
        }
    };
    Ok(RunConfig {
        command,
        seed: f.seed.unwrap_or(0),
        out: f.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        train,
        eval,
    })
}

fn print_route(r: &Route) {
    println!(
        "task={} score={:.6} command=\"{}\"",
        r.task.index(),
        r.score,
        r.task.command()
    );
    for (k, s) in r.scores.iter().enumerate() {
        println!("  {k} {s:>9.6} {}", Task::ALL[k].command());
    }
}

fn query_embedding(f: &Flags, bundle: &ParaphraseBundle) -> Result<Vec<f32>> {
    if let Some(path) = &f.embedding {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return serde_json::from_str(&text)
            .map_err(|e| Error::Routing(format!("{}: {e}", path.display())));
    }
    let text = f.text.as_deref().unwrap_or_default();
    if let Some(v) = bundle.lookup(text) {
        return Ok(v.to_vec());
    }
    if let Some(path) = &f.queries {
        if let Some(v) = load_query_fixture(path)?.lookup(text) {
            return Ok(v.to_vec());
        }
    }
    Err(Error::Routing(format!(
        "no precomputed embedding for \"{text}\"; pass --embedding or a --queries fixture containing it"
    )))
}

pub fn execute(cfg: &RunConfig, f: &Flags) -> Result<()> {
    let digest = config_digest(cfg);
    match cfg.command {
        Command::Train | Command::TrainMultitask => {
            let tc = cfg.train.clone().expect("resolved train config");
            let trainer = Trainer::new(tc)?;
            let outcome = trainer.run(Some(&cfg.out), |log| {
                println!(
                    "iteration={} steps={} sr={:.3} sr_ema={:.3} curriculum_m={:.2}",
                    log.iteration, log.steps, log.sr, log.sr_ema, log.curriculum_m
                );
            })?;
            println!(
                "trained env_steps={} checkpoint={}",
                outcome.env_steps,
                cfg.out.join("final.abtt").display()
            );
        }
        Command::EvalMismatch => {
            let plan = cfg.eval.as_ref().expect("resolved eval plan");
            let (agent, _) = load_checkpoint(&plan.checkpoint)?;
            let report = run_mismatch_suite(
                &agent,
                &EvalSettings::new(plan.episodes, plan.alpha, cfg.seed),
            )?;
            let path = cfg.out.join("mismatch_report.csv");
            report.write(&path, &digest)?;
            for r in &report.rows {
                println!(
                    "{:<14} {:<4} sr {:>7.2}%",
                    r.condition,
                    r.group.as_str(),
                    r.sr_pct
                );
            }
            println!("report={}", path.display());
        }
        Command::AblateAlpha => {
            let plan = cfg.eval.as_ref().expect("resolved eval plan");
            let (agent, _) = load_checkpoint(&plan.checkpoint)?;
            let conds: Vec<&str> = plan.conditions.iter().map(String::as_str).collect();
            let report =
                run_alpha_ablation(&agent, &ABLATION_ALPHAS, &conds, plan.episodes, cfg.seed)?;
            let path = cfg.out.join("ablation.csv");
            report.write(&path, &digest)?;
            for c in &report.cells {
                println!(
                    "alpha={} {:<14} sr {:>7.2}%",
                    c.alpha, c.row.condition, c.row.sr_pct
                );
            }
            println!("report={}", path.display());
        }
        Command::Timeseries => {
            let plan = cfg.eval.as_ref().expect("resolved eval plan");
            let (agent, _) = load_checkpoint(&plan.checkpoint)?;
            let conds: Vec<&str> = plan.conditions.iter().map(String::as_str).collect();
            let path = cfg.out.join("timeseries.csv");
            let rows = emit_timeseries(
                &agent,
                &conds,
                &EvalSettings::new(plan.episodes, plan.alpha, cfg.seed),
                &path,
                &digest,
            )?;
            println!("rows={} report={}", rows.len(), path.display());
        }
        Command::Route => {
            let bundle = load_bundle(f.bundle.as_ref().expect("resolved bundle"))?;
            let r = route(&query_embedding(f, &bundle)?, &bundle)?;
            if !r.is_confident(f.min_score) {
                print_route(&r);
                return Err(Error::Routing(format!(
                    "best score {:.6} below --min-score {}",
                    r.score,
                    f.min_score.unwrap_or_default()
                )));
            }
            print_route(&r);
        }
        Command::ValidateBundle => {
            let bundle = load_bundle(f.bundle.as_ref().expect("resolved bundle"))?;
            let counts: Vec<usize> = bundle.tasks.iter().map(Vec::len).collect();
            println!(
                "bundle ok encoder={} dim={} paraphrases={counts:?}",
                bundle.encoder, bundle.dim
            );
            if let Some(path) = &f.queries {
                let fixture = load_query_fixture(path)?;
                let mut correct = 0;
                for q in &fixture.queries {
                    let r = route(&q.vec, &bundle)?;
                    let ok = r.task.index() == q.label;
                    correct += usize::from(ok);
                    if !ok {
                        println!(
                            "misrouted \"{}\": expected {} got {}",
                            q.text,
                            q.label,
                            r.task.index()
                        );
                    }
                }
                println!("routed {correct}/{} correctly", fixture.queries.len());
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage code={USAGE_EXIT_CODE} msg={first}");
            return USAGE_EXIT_CODE;
        }
    };
    let result = (|| {
        let flags = match &cli.flags.config {
            Some(path) => cli.flags.clone().over(Flags::load_file(path)?),
            None => cli.flags.clone(),
        };
        let cfg = resolve(cli.command, &flags)?;
        execute(&cfg, &flags)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} code={} msg={msg}", e.kind(), e.exit_code());
            e.exit_code()
        }
    }
}
