//! Experiment driver behind the command line: single runs, sweeps and the
//! exhaustive oracle, with their on-disk artifacts.
//!
//! A run directory holds
//!
//! * `manifest.json`: the resolved config, which replays the run exactly,
//! * `train_log.csv`: `episode,cum_reward,mean_erank,mean_penalty` (learning
//!   algorithms only),
//! * `eval_summary.csv`: `scope,slots,mean_erank,std_erank`,
//! * `checkpoints/`: network parameters (learning algorithms only).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{exhaustive_ma, exhaustive_pa, greedy_ma, greedy_pa, random_ma, random_pa};
use crate::config::{EvalSection, ExperimentConfig};
use crate::error::{Error, Result};
use crate::gaiqn::{evaluate_gaiqn, train_gaiqn};
use crate::magaqn::{evaluate_magaqn, train_magaqn};
use crate::scenario::Mobility;
use crate::seed::{Purpose, SeedStream};
use crate::selection::Selection;
use crate::system::{MaSystem, PaSystem, SystemKind};
use crate::train::{Algorithm, EpisodeLog};

/// Environment stream of evaluation seed `index`. Stationary scenarios keep
/// the training drop; i.i.d. ones get fresh draws.
pub fn eval_env_seeds(cfg: &ExperimentConfig, index: usize) -> SeedStream {
    let master = SeedStream::new(cfg.seed);
    match cfg.mobility {
        Mobility::Stationary => master,
        Mobility::Iid => master.fork(1000 + index as u64),
    }
}

/// Stream for exploration-free policy randomness (quantile levels, random
/// placements) of evaluation seed `index`.
pub fn eval_policy_seeds(cfg: &ExperimentConfig, index: usize) -> SeedStream {
    SeedStream::new(cfg.seed).fork(2000 + index as u64)
}

fn slot_label(i: usize, slots_per_episode: usize) -> (u64, u64) {
    ((i / slots_per_episode) as u64, (i % slots_per_episode) as u64)
}

/// Effective rank of `slots` consecutive slots under a non-learning
/// placement rule.
pub fn evaluate_baseline(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    env: &SeedStream,
    policy: &SeedStream,
    slots: usize,
) -> Result<Vec<f64>> {
    let budget = cfg.oracle.budget as u128;
    match cfg.system {
        SystemKind::Ma => {
            let sys = cfg.ma_system()?;
            let t_len = sys.area.slots;
            (0..slots)
                .into_par_iter()
                .map(|i| {
                    let (e, t) = slot_label(i, t_len);
                    let slot = sys.slot(env, e, t)?;
                    match algorithm {
                        Algorithm::Random => {
                            let mut rng = policy.rng(e, t, Purpose::Placement);
                            slot.effective_rank(&random_ma(sys.candidates(), sys.antennas, &mut rng)?)
                        }
                        Algorithm::Greedy => slot.effective_rank(&greedy_ma(&slot, sys.antennas)?),
                        Algorithm::Oracle => Ok(exhaustive_ma(&slot, sys.antennas, budget)?.value),
                        other => Err(Error::Config(format!("{other} is not a baseline"))),
                    }
                })
                .collect()
        }
        SystemKind::Pa => {
            let sys = cfg.pa_system()?;
            let t_len = sys.area.slots;
            let per = sys.layout.antennas_per_waveguide;
            (0..slots)
                .into_par_iter()
                .map(|i| {
                    let (e, t) = slot_label(i, t_len);
                    let slot = sys.slot(env, e, t)?;
                    match algorithm {
                        Algorithm::Random => {
                            let mut rng = policy.rng(e, t, Purpose::Placement);
                            slot.effective_rank(&random_pa(sys.layout.waveguides, sys.candidates(), per, &mut rng)?)
                        }
                        Algorithm::Greedy => slot.effective_rank(&greedy_pa(&slot, per)?),
                        Algorithm::Oracle => Ok(exhaustive_pa(&slot, per, budget)?.value),
                        other => Err(Error::Config(format!("{other} is not a baseline"))),
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Per evaluation seed: `(mean, std across slots)`.
    pub per_seed: Vec<(f64, f64)>,
    pub slots_per_seed: usize,
    pub mean: f64,
    pub std_across_seeds: f64,
    pub std_across_slots: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalSummary {
    pub fn from_samples(samples: &[Vec<f64>]) -> Self {
        let per_seed: Vec<(f64, f64)> = samples.iter().map(|s| mean_std(s)).collect();
        let means: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
        let pooled: Vec<f64> = samples.iter().flatten().copied().collect();
        let (mean, std_across_slots) = mean_std(&pooled);
        Self {
            slots_per_seed: samples.first().map_or(0, Vec::len),
            std_across_seeds: mean_std(&means).1,
            per_seed,
            mean,
            std_across_slots,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["scope", "slots", "mean_erank", "std_erank"])?;
        for (i, (m, s)) in self.per_seed.iter().enumerate() {
            w.write_record([format!("seed{i}"), self.slots_per_seed.to_string(), m.to_string(), s.to_string()])?;
        }
        let total = (self.slots_per_seed * self.per_seed.len()).to_string();
        w.write_record(["across_seeds".to_string(), total.clone(), self.mean.to_string(), self.std_across_seeds.to_string()])?;
        w.write_record(["across_slots".to_string(), total, self.mean.to_string(), self.std_across_slots.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_train_log(log: &[EpisodeLog], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_train_log(path: &Path) -> Result<Vec<EpisodeLog>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub log: Vec<EpisodeLog>,
    pub eval: EvalSummary,
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let manifest = ExperimentConfig { out: None, ..cfg.clone() };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

fn learned_ma(cfg: &ExperimentConfig, sys: &MaSystem, dir: Option<&Path>) -> Result<(Vec<EpisodeLog>, Vec<Vec<f64>>)> {
    let (agent, log) = train_gaiqn(sys, &cfg.train, &cfg.graph, &SeedStream::new(cfg.seed), |_| {})?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir.join("checkpoints"))?;
        agent.save(&dir.join("checkpoints").join("gaiqn.frck"))?;
    }
    let episodes = cfg.eval.slots.div_ceil(sys.area.slots);
    let samples = (0..cfg.eval.seeds)
        .into_par_iter()
        .map(|i| {
            let mut v = evaluate_gaiqn(&agent, sys, &cfg.graph, &eval_env_seeds(cfg, i), &eval_policy_seeds(cfg, i), episodes)?;
            v.truncate(cfg.eval.slots);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((log, samples))
}

fn learned_pa(cfg: &ExperimentConfig, sys: &PaSystem, dir: Option<&Path>) -> Result<(Vec<EpisodeLog>, Vec<Vec<f64>>)> {
    let (agents, log) = train_magaqn(sys, &cfg.train, &cfg.graph, &SeedStream::new(cfg.seed), |_| {})?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir.join("checkpoints"))?;
        for (k, a) in agents.iter().enumerate() {
            a.save(&dir.join("checkpoints").join(format!("magaqn_agent{k}.frck")))?;
        }
    }
    let episodes = cfg.eval.slots.div_ceil(sys.area.slots);
    let samples = (0..cfg.eval.seeds)
        .into_par_iter()
        .map(|i| {
            let mut local = agents.clone();
            let mut v = evaluate_magaqn(&mut local, sys, &cfg.graph, &eval_env_seeds(cfg, i), &eval_policy_seeds(cfg, i), episodes)?;
            v.truncate(cfg.eval.slots);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((log, samples))
}

/// Train (if the algorithm learns) and evaluate without touching the disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    execute_in(cfg, None)
}

fn execute_in(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<RunOutcome> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let (log, samples) = match (cfg.system, cfg.algorithm) {
        (SystemKind::Ma, Algorithm::Gaiqn) => learned_ma(&cfg, &cfg.ma_system()?, dir)?,
        (SystemKind::Pa, Algorithm::Magaqn) => learned_pa(&cfg, &cfg.pa_system()?, dir)?,
        (_, algorithm) => {
            let samples = (0..cfg.eval.seeds)
                .map(|i| evaluate_baseline(&cfg, algorithm, &eval_env_seeds(&cfg, i), &eval_policy_seeds(&cfg, i), cfg.eval.slots))
                .collect::<Result<Vec<_>>>()?;
            (Vec::new(), samples)
        }
    };
    Ok(RunOutcome { log, eval: EvalSummary::from_samples(&samples) })
}

/// Full run with artifacts under `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let resolved = cfg.resolved();
    resolved.validate()?;
    fs::create_dir_all(dir)?;
    write_manifest(&resolved, dir)?;
    let outcome = execute_in(&resolved, Some(dir))?;
    if !outcome.log.is_empty() {
        write_train_log(&outcome.log, &dir.join("train_log.csv"))?;
    }
    outcome.eval.write_csv(&dir.join("eval_summary.csv"))?;
    Ok(outcome)
}

/// Run directory when none is given: `<root>/<system>-<algorithm>-s<seed>`,
/// where `root` comes from the environment or defaults to `runs`.
pub fn default_run_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    root.unwrap_or(Path::new("runs")).join(format!("{}-{}-s{}", cfg.system, cfg.algorithm, cfg.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub mean_erank: f64,
    pub std_erank: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One table per system, in grid order.
    pub tables: Vec<(SystemKind, Vec<SweepRow>)>,
    /// Cells that failed: system, grid value, message.
    pub failures: Vec<(SystemKind, f64, String)>,
}

/// Mean effective rank of one cell for every evaluation seed. Learning
/// algorithms train once per seed, with master seed `seed + index`.
fn sweep_cell(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..cfg.eval.seeds)
        .into_par_iter()
        .map(|i| {
            if matches!(cfg.algorithm, Algorithm::Gaiqn | Algorithm::Magaqn) {
                let one = ExperimentConfig {
                    seed: cfg.seed.wrapping_add(i as u64),
                    eval: EvalSection { seeds: 1, ..cfg.eval.clone() },
                    ..cfg.clone()
                };
                return Ok(execute(&one)?.eval.mean);
            }
            let values =
                evaluate_baseline(cfg, cfg.algorithm, &eval_env_seeds(cfg, i), &eval_policy_seeds(cfg, i), cfg.eval.slots)?;
            Ok(mean_std(&values).0)
        })
        .collect()
}

/// Every grid cell of `cfg.sweep`; cells run concurrently. Failures are
/// collected and the remaining cells still run.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let cfg = cfg.resolved();
    let Some(spec) = cfg.sweep.clone() else {
        return Err(Error::Config("sweep needs a `sweep` section".into()));
    };
    let systems = if spec.systems.is_empty() { vec![cfg.system] } else { spec.systems.clone() };
    let cells: Vec<(SystemKind, f64)> = systems.iter().flat_map(|&s| spec.values.iter().map(move |&v| (s, v))).collect();
    let results: Vec<Result<Vec<f64>>> =
        cells.par_iter().map(|&(s, v)| sweep_cell(&cfg.at_grid_point(spec.param, v, s))).collect();
    let mut tables: Vec<(SystemKind, Vec<SweepRow>)> = systems.iter().map(|&s| (s, Vec::new())).collect();
    let mut failures = Vec::new();
    for ((s, v), r) in cells.into_iter().zip(results) {
        match r {
            Ok(means) => {
                let (mean_erank, std_erank) = mean_std(&means);
                let row = SweepRow { param: spec.param.to_string(), value: v, mean_erank, std_erank, n_seeds: means.len() };
                tables.iter_mut().find(|t| t.0 == s).expect("system listed").1.push(row);
            }
            Err(e) => failures.push((s, v, e.to_string())),
        }
    }
    Ok(SweepOutcome { tables, failures })
}

pub fn write_sweep(outcome: &SweepOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    write_manifest(&cfg.resolved(), dir)?;
    let mut written = Vec::new();
    for (system, rows) in &outcome.tables {
        let path = dir.join(format!("sweep_{system}_{}.csv", cfg.algorithm));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
        w.write_record(["param", "value", "mean_erank", "std_erank", "n_seeds"])?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    if !outcome.failures.is_empty() {
        let mut f = fs::File::create(dir.join("sweep_failures.txt"))?;
        for (s, v, m) in &outcome.failures {
            writeln!(f, "{s} {v}: {m}")?;
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub system: SystemKind,
    pub evaluated: u64,
    pub oracle_value: f64,
    /// One index list per waveguide for PA, a single list for MA.
    pub best: Vec<Vec<usize>>,
    pub greedy_value: f64,
    pub random_mean: f64,
    pub random_draws: usize,
}

/// Exhaustive search on the first slot of the master seed, next to greedy
/// and the mean of `random_draws` uniform placements on the same slot.
pub fn oracle_report(cfg: &ExperimentConfig, random_draws: usize) -> Result<OracleReport> {
    cfg.validate()?;
    let seeds = SeedStream::new(cfg.seed);
    let budget = cfg.oracle.budget as u128;
    let mut rng = seeds.rng(0, 0, Purpose::Placement);
    match cfg.system {
        SystemKind::Ma => {
            let sys = cfg.ma_system()?;
            let slot = sys.slot(&seeds, 0, 0)?;
            let o = exhaustive_ma(&slot, sys.antennas, budget)?;
            let greedy_value = slot.effective_rank(&greedy_ma(&slot, sys.antennas)?)?;
            let random: Vec<f64> = (0..random_draws)
                .map(|_| slot.effective_rank(&random_ma(sys.candidates(), sys.antennas, &mut rng)?))
                .collect::<Result<_>>()?;
            Ok(OracleReport {
                system: cfg.system,
                evaluated: o.evaluated,
                oracle_value: o.value,
                best: vec![o.best.into_inner()],
                greedy_value,
                random_mean: mean_std(&random).0,
                random_draws,
            })
        }
        SystemKind::Pa => {
            let sys = cfg.pa_system()?;
            let per = sys.layout.antennas_per_waveguide;
            let slot = sys.slot(&seeds, 0, 0)?;
            let o = exhaustive_pa(&slot, per, budget)?;
            let greedy_value = slot.effective_rank(&greedy_pa(&slot, per)?)?;
            let random: Vec<f64> = (0..random_draws)
                .map(|_| slot.effective_rank(&random_pa(sys.layout.waveguides, sys.candidates(), per, &mut rng)?))
                .collect::<Result<_>>()?;
            Ok(OracleReport {
                system: cfg.system,
                evaluated: o.evaluated,
                oracle_value: o.value,
                best: o.best.into_iter().map(Selection::into_inner).collect(),
                greedy_value,
                random_mean: mean_std(&random).0,
                random_draws,
            })
        }
    }
}
