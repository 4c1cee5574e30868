//! Deterministic evaluation of a trained agent under named dynamics mismatches.
//!
//! Every episode of a condition runs in lockstep so network forwards are
//! batched. Episode `i` draws its goal from RNG stream `i` of the seed, so
//! results depend only on `(weights, condition, settings)`.

use std::path::Path;

use ndarray::s;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::QuadEnv;
use crate::error::{Error, Result};
use crate::nets::agent::{STATE_DIM, TRANSITION_DIM};
use crate::nets::gaussian::deterministic_action;
use crate::nets::{weights_digest, Agent};
use crate::ppo::rollout::rows_f32;
use crate::run::{fmt_f, provenance_header};
use crate::sim::{mismatch_condition, MismatchConfig, PhysicalParams};
use crate::task::{Outcome, Task, CURRICULUM_MAX, OBS_DIM};
use crate::tta::{transition_features, LatentState, ABLATION_ALPHAS};

pub const EVAL_DISTANCE: f64 = CURRICULUM_MAX;
pub const DEFAULT_EPISODES: usize = 60;
pub const ABLATION_EPISODES: usize = 30;
pub const ID_CONDITIONS: [&str; 8] = [
    "nominal",
    "mass-20",
    "mass+20",
    "mass+30",
    "drag+100",
    "delay2",
    "wind-med",
    "combined-mild",
];
pub const OOD_CONDITIONS: [&str; 5] = [
    "mass+40",
    "wind-strong",
    "combined-hard",
    "delay5",
    "combined-ood",
];
pub const ABLATION_CONDITIONS: [&str; 4] = ["mass+30", "mass+40", "combined-hard", "combined-ood"];

pub const REPORT_HEADER: &str =
    "condition,group,episodes,successes,sr_pct,mean_steps,mean_final_dist_m";
pub const ABLATION_HEADER: &str =
    "alpha,condition,group,episodes,successes,sr_pct,mean_steps,mean_final_dist_m";
pub const TIMESERIES_HEADER: &str = "condition,step,dist_mean,dist_std,znorm_mean,znorm_std";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Id,
    Ood,
    /// Conditions outside the suite, e.g. the thrust-ceiling probe.
    Extra,
    Avg,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Id => "id",
            Group::Ood => "ood",
            Group::Extra => "extra",
            Group::Avg => "avg",
        }
    }

    pub fn of(condition: &str) -> Group {
        if ID_CONDITIONS.contains(&condition) {
            Group::Id
        } else if OOD_CONDITIONS.contains(&condition) {
            Group::Ood
        } else {
            Group::Extra
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub task: Task,
    pub episodes: usize,
    pub alpha: f64,
    pub seed: u64,
    pub distance: f64,
}

impl EvalSettings {
    pub fn new(episodes: usize, alpha: f64, seed: u64) -> Self {
        Self {
            task: Task::Navigate,
            episodes,
            alpha,
            seed,
            distance: EVAL_DISTANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episode count must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub index: usize,
    pub outcome: Outcome,
    pub steps: usize,
    pub final_dist: f64,
    /// Distance to goal after each step, starting with the initial state.
    pub dist_trace: Vec<f64>,
    /// Latent norm at each step, starting with the reset latent.
    pub znorm_trace: Vec<f64>,
}

/// One report line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub condition: String,
    pub group: Group,
    pub episodes: usize,
    pub successes: usize,
    pub sr_pct: f64,
    /// Mean steps of successful episodes (NaN if none succeeded).
    pub mean_steps: f64,
    pub mean_final_dist_m: f64,
}

impl ConditionRow {
    fn from_records(condition: &str, group: Group, records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        let wins: Vec<&EpisodeRecord> = records
            .iter()
            .filter(|r| r.outcome == Outcome::Success)
            .collect();
        let mean_steps = if wins.is_empty() {
            f64::NAN
        } else {
            wins.iter().map(|r| r.steps as f64).sum::<f64>() / wins.len() as f64
        };
        Self {
            condition: condition.to_string(),
            group,
            episodes: n,
            successes: wins.len(),
            sr_pct: 100.0 * wins.len() as f64 / n as f64,
            mean_steps,
            mean_final_dist_m: records.iter().map(|r| r.final_dist).sum::<f64>() / n as f64,
        }
    }

    /// Arithmetic mean of member rows; counts are summed, and `mean_steps`
    /// averages the members that have one.
    pub fn aggregate(label: &str, rows: &[&ConditionRow]) -> Self {
        let n = rows.len() as f64;
        let steps: Vec<f64> = rows
            .iter()
            .map(|r| r.mean_steps)
            .filter(|x| !x.is_nan())
            .collect();
        Self {
            condition: label.to_string(),
            group: Group::Avg,
            episodes: rows.iter().map(|r| r.episodes).sum(),
            successes: rows.iter().map(|r| r.successes).sum(),
            sr_pct: rows.iter().map(|r| r.sr_pct).sum::<f64>() / n,
            mean_steps: if steps.is_empty() {
                f64::NAN
            } else {
                steps.iter().sum::<f64>() / steps.len() as f64
            },
            mean_final_dist_m: rows.iter().map(|r| r.mean_final_dist_m).sum::<f64>() / n,
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.condition,
            self.group.as_str(),
            self.episodes,
            self.successes,
            fmt_f(self.sr_pct),
            fmt_f(self.mean_steps),
            fmt_f(self.mean_final_dist_m)
        )
    }
}

/// Runs `settings.episodes` deterministic episodes under one mismatch.
pub fn run_episodes(
    agent: &Agent<f32>,
    mismatch: MismatchConfig,
    settings: &EvalSettings,
) -> Vec<EpisodeRecord> {
    let n = settings.episodes;
    let params = PhysicalParams::default();
    let latent_dim = agent.arch.latent_dim;
    let log_std = agent.log_std.to_vec();
    let mut envs: Vec<QuadEnv> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(i as u64);
            QuadEnv::new(params, mismatch, settings.task, settings.distance, &mut rng)
        })
        .collect();
    let mut latents: Vec<LatentState> = (0..n)
        .map(|_| LatentState::reset(latent_dim, settings.alpha))
        .collect();
    let mut records: Vec<EpisodeRecord> = envs
        .iter()
        .enumerate()
        .map(|(i, env)| EpisodeRecord {
            index: i,
            outcome: Outcome::Running,
            steps: 0,
            final_dist: env.distance_to_goal(),
            dist_trace: vec![env.distance_to_goal()],
            znorm_trace: vec![0.0],
        })
        .collect();

    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !envs[i].is_done()).collect();
        if active.is_empty() {
            break;
        }
        let m = active.len();
        let obs = rows_f32(active.iter().map(|&i| envs[i].observation()), m, OBS_DIM);
        let task_ids: Vec<usize> = active.iter().map(|&i| envs[i].command.index()).collect();
        let z = rows_f32(active.iter().map(|&i| &latents[i].z), m, latent_dim);
        let g = agent.subgoal(&task_ids, obs.view());
        let mean = agent.policy_mean(obs.slice(s![.., 0..STATE_DIM]), g.view(), z.view());

        let mut feats = Vec::with_capacity(m);
        for (k, &i) in active.iter().enumerate() {
            let action = deterministic_action(mean.row(k).as_slice().expect("row"), &log_std);
            let res = envs[i].step(action.control);
            feats.push(transition_features(&res.transition, params.dt));
        }
        let deltas = agent.tta_delta(rows_f32(feats.iter(), m, TRANSITION_DIM).view());
        for (k, &i) in active.iter().enumerate() {
            latents[i].apply_delta(deltas.row(k).as_slice().expect("row"));
            let rec = &mut records[i];
            rec.dist_trace.push(envs[i].distance_to_goal());
            rec.znorm_trace.push(latents[i].norm());
            if envs[i].is_done() {
                rec.outcome = envs[i].episode.outcome;
                rec.steps = envs[i].episode.step;
                rec.final_dist = envs[i].distance_to_goal();
            }
        }
    }
    records
}

pub fn eval_condition(
    agent: &Agent<f32>,
    condition: &str,
    settings: &EvalSettings,
) -> Result<(ConditionRow, Vec<EpisodeRecord>)> {
    settings.validate()?;
    let mismatch = mismatch_condition(condition)?;
    let records = run_episodes(agent, mismatch, settings);
    Ok((
        ConditionRow::from_records(condition, Group::of(condition), &records),
        records,
    ))
}

fn csv_text(header_lines: &str, header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header_lines);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The 13-condition grid, ID rows first, followed by ID, OOD and overall means.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<ConditionRow>,
    pub settings: EvalSettings,
    pub weights_digest: String,
}

impl SuiteReport {
    pub fn condition_rows(&self) -> &[ConditionRow] {
        &self.rows[..ID_CONDITIONS.len() + OOD_CONDITIONS.len()]
    }

    pub fn aggregate(&self, label: &str) -> Option<&ConditionRow> {
        self.rows
            .iter()
            .find(|r| r.group == Group::Avg && r.condition == label)
    }

    pub fn to_csv(&self, config_digest: &str) -> String {
        let mut head = provenance_header(config_digest, self.settings.seed);
        head.push_str(&format!("# weights_digest={}\n", self.weights_digest));
        csv_text(&head, REPORT_HEADER, self.rows.iter().map(|r| r.csv()))
    }

    pub fn write(&self, path: impl AsRef<Path>, config_digest: &str) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv(config_digest))
    }
}

pub fn run_mismatch_suite(agent: &Agent<f32>, settings: &EvalSettings) -> Result<SuiteReport> {
    settings.validate()?;
    let mut rows = Vec::new();
    for name in ID_CONDITIONS.iter().chain(OOD_CONDITIONS.iter()) {
        rows.push(eval_condition(agent, name, settings)?.0);
    }
    let id: Vec<&ConditionRow> = rows.iter().filter(|r| r.group == Group::Id).collect();
    let ood: Vec<&ConditionRow> = rows.iter().filter(|r| r.group == Group::Ood).collect();
    let all: Vec<&ConditionRow> = rows.iter().collect();
    let aggregates = [
        ConditionRow::aggregate("id-avg", &id),
        ConditionRow::aggregate("ood-avg", &ood),
        ConditionRow::aggregate("overall-avg", &all),
    ];
    rows.extend(aggregates);
    Ok(SuiteReport {
        rows,
        settings: *settings,
        weights_digest: weights_digest(agent),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub alpha: f64,
    pub row: ConditionRow,
    /// Digest of the weights the cell was evaluated with.
    pub weights_digest: String,
}

/// Same weights, varying only the latent step size.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub alphas: Vec<f64>,
    pub conditions: Vec<String>,
    pub cells: Vec<AblationCell>,
    /// Mean SR per alpha, in `alphas` order.
    pub averages: Vec<ConditionRow>,
    pub seed: u64,
}

impl AblationReport {
    pub fn sr(&self, alpha: f64, condition: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.alpha == alpha && c.row.condition == condition)
            .map(|c| c.row.sr_pct)
    }

    /// Conditions on which SR never decreases as alpha grows.
    pub fn monotone_conditions(&self) -> Vec<String> {
        self.conditions
            .iter()
            .filter(|c| {
                let srs: Vec<f64> = self.alphas.iter().filter_map(|&a| self.sr(a, c)).collect();
                srs.windows(2).all(|w| w[1] >= w[0])
            })
            .cloned()
            .collect()
    }

    pub fn to_csv(&self, config_digest: &str) -> String {
        let mut head = provenance_header(config_digest, self.seed);
        if let Some(c) = self.cells.first() {
            head.push_str(&format!("# weights_digest={}\n", c.weights_digest));
        }
        let rows = self
            .cells
            .iter()
            .map(|c| (c.alpha, &c.row))
            .chain(self.alphas.iter().copied().zip(self.averages.iter()))
            .map(|(a, r)| format!("{a},{}", r.csv()));
        csv_text(&head, ABLATION_HEADER, rows)
    }

    pub fn write(&self, path: impl AsRef<Path>, config_digest: &str) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv(config_digest))
    }
}

pub fn run_alpha_ablation(
    agent: &Agent<f32>,
    alphas: &[f64],
    conditions: &[&str],
    episodes: usize,
    seed: u64,
) -> Result<AblationReport> {
    let mut cells = Vec::new();
    let mut averages = Vec::new();
    for &alpha in alphas {
        let settings = EvalSettings::new(episodes, alpha, seed);
        let mut rows = Vec::new();
        for &name in conditions {
            let (row, _) = eval_condition(agent, name, &settings)?;
            cells.push(AblationCell {
                alpha,
                row: row.clone(),
                weights_digest: weights_digest(agent),
            });
            rows.push(row);
        }
        averages.push(ConditionRow::aggregate(
            "avg",
            &rows.iter().collect::<Vec<_>>(),
        ));
    }
    Ok(AblationReport {
        alphas: alphas.to_vec(),
        conditions: conditions.iter().map(|s| s.to_string()).collect(),
        cells,
        averages,
        seed,
    })
}

/// The standard grid: alpha in {0, 0.02, 0.1} on four hard conditions, 30 episodes each.
pub fn run_default_ablation(agent: &Agent<f32>, seed: u64) -> Result<AblationReport> {
    run_alpha_ablation(
        agent,
        &ABLATION_ALPHAS,
        &ABLATION_CONDITIONS,
        ABLATION_EPISODES,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub condition: String,
    pub step: usize,
    pub dist_mean: f64,
    pub dist_std: f64,
    pub znorm_mean: f64,
    pub znorm_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-step mean and population standard deviation of goal distance and
/// latent norm over `settings.episodes` seeds. Episodes that end early hold
/// their final values until the longest one finishes.
pub fn timeseries(
    agent: &Agent<f32>,
    conditions: &[&str],
    settings: &EvalSettings,
) -> Result<Vec<TimeseriesRow>> {
    settings.validate()?;
    let mut out = Vec::new();
    for &name in conditions {
        let records = run_episodes(agent, mismatch_condition(name)?, settings);
        let len = records
            .iter()
            .map(|r| r.dist_trace.len())
            .max()
            .unwrap_or(0);
        for t in 0..len {
            let at = |trace: &Vec<f64>| trace[t.min(trace.len() - 1)];
            let d: Vec<f64> = records.iter().map(|r| at(&r.dist_trace)).collect();
            let z: Vec<f64> = records.iter().map(|r| at(&r.znorm_trace)).collect();
            let (dm, ds) = mean_std(&d);
            let (zm, zs) = mean_std(&z);
            out.push(TimeseriesRow {
                condition: name.to_string(),
                step: t,
                dist_mean: dm,
                dist_std: ds,
                znorm_mean: zm,
                znorm_std: zs,
            });
        }
    }
    Ok(out)
}

pub fn timeseries_csv(rows: &[TimeseriesRow], config_digest: &str, seed: u64) -> String {
    csv_text(
        &provenance_header(config_digest, seed),
        TIMESERIES_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.condition,
                r.step,
                fmt_f(r.dist_mean),
                fmt_f(r.dist_std),
                fmt_f(r.znorm_mean),
                fmt_f(r.znorm_std)
            )
        }),
    )
}

pub fn emit_timeseries(
    agent: &Agent<f32>,
    conditions: &[&str],
    settings: &EvalSettings,
    path: impl AsRef<Path>,
    config_digest: &str,
) -> Result<Vec<TimeseriesRow>> {
    let rows = timeseries(agent, conditions, settings)?;
    write_text(
        path.as_ref(),
        &timeseries_csv(&rows, config_digest, settings.seed),
    )?;
    Ok(rows)
}
