//! Experiment protocol: 200 weekly episodes per run, the first 100 for
//! training and the rest for evaluation with exploration switched off while
//! learning continues. Writes plot-ready CSV artifacts per run.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::agents::{argmax, AgentError, DqnAgent, Mode};
use crate::baselines::{replay_schedule, solve_lp_blocks, BaselineError, DdpgAgent, LpConfig, Schedule};
use crate::data::{self, generate_synthetic, DataError, Forecasts, TimeSeries};
use crate::env::{Env, EnvError, EnvState};
use crate::forecast::{ForecastError, ForecastSet};
use crate::nn::{self, Network, NnError};
use crate::rng::{derive_seed, seeded};
use crate::HOURS_PER_WEEK;

pub use config::{DataSource, ExperimentConfig, LpSettings, Method, PriceSource, Scenario, Settings};
pub use report::{
    aggregate, compare, find_runs, format_comparison, percent_difference, read_episodes, write_comparison,
    write_episodes, write_steps, ComparisonRow, DistributionSnapshot, EpisodeReport, RunSummary, StepRecord,
    EPISODE_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("data covers {weeks} weeks, {needed} required")]
    InsufficientData { weeks: usize, needed: usize },
    #[error("{0}")]
    InvalidCombination(String),
    #[error("evaluation purity violated: {0}")]
    Purity(String),
    #[error("no completed runs under {}", .0.display())]
    NoRuns(PathBuf),
    #[error("no dqn baseline run for scenario {0}")]
    MissingBaseline(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed artifact: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Series and forecasts shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub series: Arc<TimeSeries>,
    /// Row `h` holds the forecasts for hour `h + 1`.
    pub forecasts: Option<Arc<Vec<Forecasts>>>,
}

pub fn load_series(source: &DataSource) -> Result<TimeSeries, HarnessError> {
    Ok(match source {
        DataSource::Csv(path) => data::load_csv(path)?,
        DataSource::Synthetic(cfg) => generate_synthetic(cfg)?,
    })
}

/// Load or train the forecasters and tabulate their predictions.
pub fn forecast_rows(cfg: &ExperimentConfig, series: &TimeSeries) -> Result<Vec<Forecasts>, HarnessError> {
    let set = match &cfg.forecast_dir {
        Some(dir) => ForecastSet::load(dir)?,
        None => ForecastSet::train(series, &cfg.forecast, &cfg.env, cfg.forecast_seed)?,
    };
    Ok(set.precompute(series, &cfg.env)?)
}

pub fn prepare_inputs(cfg: &ExperimentConfig) -> Result<Inputs, HarnessError> {
    cfg.validate()?;
    let series = load_series(&cfg.data)?;
    if series.weeks() < cfg.episodes {
        return Err(HarnessError::InsufficientData {
            weeks: series.weeks(),
            needed: cfg.episodes,
        });
    }
    let needs_forecasts =
        cfg.scenario.forecasts() || (cfg.method == Method::Lp && cfg.lp.prices == PriceSource::Forecast);
    let forecasts = if needs_forecasts {
        Some(Arc::new(forecast_rows(cfg, &series)?))
    } else {
        None
    };
    Ok(Inputs {
        series: Arc::new(series),
        forecasts,
    })
}

fn make_env(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<Env, HarnessError> {
    let env = Env::new(inputs.series.clone(), cfg.env.clone())?;
    Ok(if cfg.scenario.forecasts() {
        let rows = inputs
            .forecasts
            .clone()
            .ok_or_else(|| HarnessError::InvalidCombination("forecast scenario without forecasts".into()))?;
        env.with_forecasts(rows)?
    } else {
        env
    })
}

/// Artifacts of one seed.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub seed: u64,
    pub reports: Vec<EpisodeReport>,
    pub snapshots: Vec<DistributionSnapshot>,
    pub summary: RunSummary,
}

/// Run every seed of `cfg` in turn.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>, HarnessError> {
    let inputs = prepare_inputs(cfg)?;
    cfg.seeds.iter().map(|&s| run_seed(cfg, &inputs, s)).collect()
}

#[derive(Default)]
struct EpisodeAcc {
    reward: f64,
    savings: f64,
    punished: usize,
    loss_sum: f64,
    losses: usize,
    steps: usize,
}

impl EpisodeAcc {
    fn add(&mut self, reward: f64, savings: f64, punished: bool, loss: Option<f64>) {
        self.reward += reward;
        self.savings += savings;
        self.punished += usize::from(punished);
        if let Some(l) = loss {
            self.loss_sum += l;
            self.losses += 1;
        }
        self.steps += 1;
    }

    fn report(&self, episode: usize, eval: bool, epsilon: f64) -> EpisodeReport {
        EpisodeReport {
            episode,
            eval,
            total_reward: self.reward,
            savings: self.savings,
            punish_count: self.punished,
            mean_loss: (self.losses > 0).then(|| self.loss_sum / self.losses as f64),
            epsilon,
            steps: self.steps,
        }
    }
}

struct Trace {
    reports: Vec<EpisodeReport>,
    steps: Vec<StepRecord>,
    snapshots: Vec<DistributionSnapshot>,
}

/// Run one seed and write its artifacts under [`ExperimentConfig::run_dir`].
pub fn run_seed(cfg: &ExperimentConfig, inputs: &Inputs, seed: u64) -> Result<RunOutput, HarnessError> {
    let dir = cfg.run_dir(seed);
    std::fs::create_dir_all(&dir)?;
    let trace = match cfg.method {
        Method::Dqn(_) => {
            let (trace, agent) = run_dqn(cfg, inputs, seed)?;
            nn::save_network(agent.online(), dir.join("online.net"))?;
            trace
        }
        Method::Ddpg => {
            let (trace, agent) = run_ddpg(cfg, inputs, seed)?;
            nn::save_network(agent.actor(), dir.join("actor.net"))?;
            nn::save_network(agent.critic(), dir.join("critic.net"))?;
            trace
        }
        Method::Lp => {
            let (trace, schedule) = run_lp(cfg, inputs)?;
            schedule.write_csv(dir.join("schedule.csv"))?;
            trace
        }
    };

    let mut snapshot_cfg = cfg.clone();
    snapshot_cfg.seeds = vec![seed];
    std::fs::write(dir.join("config.snapshot"), snapshot_cfg.to_ini())?;
    write_episodes(dir.join("episodes.csv"), &trace.reports)?;
    if cfg.step_log && !trace.steps.is_empty() {
        write_steps(dir.join("steps.csv"), &trace.steps)?;
    }
    if !trace.snapshots.is_empty() {
        let sdir = dir.join("snapshots");
        std::fs::create_dir_all(&sdir)?;
        for s in &trace.snapshots {
            s.write_csv(sdir.join(s.file_name()))?;
        }
    }
    let summary = RunSummary::from_reports(dir.clone(), cfg.method, cfg.scenario, seed, &trace.reports);
    Ok(RunOutput {
        dir,
        seed,
        reports: trace.reports,
        snapshots: trace.snapshots,
        summary,
    })
}

/// Current return distributions of a distributional agent with context
/// from the environment. `chosen` is the greedy action.
pub fn export_snapshot(
    agent: &DqnAgent,
    env: &Env,
    obs: &[f64],
    episode: usize,
    step: usize,
) -> Result<DistributionSnapshot, HarnessError> {
    let support = agent
        .support()
        .ok_or_else(|| HarnessError::Unsupported("snapshots need a distributional agent".into()))?
        .values();
    let probabilities = agent.distribution(obs)?;
    let q: Vec<f64> = probabilities
        .iter()
        .map(|p| p.iter().zip(&support).map(|(p, z)| p * z).sum())
        .collect();
    let state = env.state();
    let record = env
        .series()
        .get(state.hour.min(env.series().len() - 1))
        .expect("nonempty series");
    Ok(DistributionSnapshot {
        episode,
        step,
        chosen: argmax(&q),
        probabilities,
        support,
        charge: state.charge,
        price: record.price,
        demand: record.demand,
    })
}

fn run_dqn(cfg: &ExperimentConfig, inputs: &Inputs, seed: u64) -> Result<(Trace, DqnAgent), HarnessError> {
    let mut env = make_env(cfg, inputs)?;
    let mut agent = DqnAgent::new(
        cfg.agent.clone(),
        env.observation_len(),
        env.action_space().size(),
        seed,
    )?;
    let distributional = agent.support().is_some();
    let max_power = cfg.env.grid.max_power_mw;
    let mut trace = Trace {
        reports: Vec::with_capacity(cfg.episodes),
        steps: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut global = 0;
    for ep in 0..cfg.episodes {
        let eval = ep >= cfg.train_episodes;
        agent.set_mode(if eval { Mode::Eval } else { Mode::Train });
        let snap_episode = distributional && cfg.snapshot_episodes.contains(&(ep + 1));
        let mut obs = env.reset(ep)?.into_vec();
        let mut acc = EpisodeAcc::default();
        for step in 0..HOURS_PER_WEEK {
            if snap_episode && step % cfg.snapshot_stride == 0 {
                trace.snapshots.push(export_snapshot(&agent, &env, &obs, ep + 1, step)?);
            }
            let a = agent.act(&obs)?;
            let info = agent.last_action().expect("act records its choice");
            if eval && (info.epsilon != 0.0 || info.noise_active) {
                return Err(HarnessError::Purity(format!(
                    "episode {} step {step}: epsilon {} noise {}",
                    ep + 1,
                    info.epsilon,
                    info.noise_active
                )));
            }
            let out = env.step(a)?;
            let next = out.observation.into_vec();
            let loss = agent.observe(&obs, a, out.reward, &next)?;
            acc.add(out.reward, out.info.savings_gbp, out.info.clamped, loss);
            if cfg.step_log {
                trace.steps.push(StepRecord {
                    step: global,
                    episode: ep + 1,
                    epsilon: info.epsilon,
                    loss,
                    reward: out.reward,
                    power: env.action_space().power(a, max_power)?,
                    savings: out.info.savings_gbp,
                });
            }
            global += 1;
            obs = next;
        }
        let eps = agent.last_action().map_or(0.0, |i| i.epsilon);
        trace.reports.push(acc.report(ep + 1, eval, eps));
    }
    Ok((trace, agent))
}

fn run_ddpg(cfg: &ExperimentConfig, inputs: &Inputs, seed: u64) -> Result<(Trace, DdpgAgent), HarnessError> {
    let mut env = make_env(cfg, inputs)?;
    let max_power = cfg.env.grid.max_power_mw;
    let mut agent = DdpgAgent::new(cfg.ddpg.clone(), env.observation_len(), max_power, seed)?;
    let mut rng = seeded(derive_seed(seed, "exploration"));
    let mut trace = Trace {
        reports: Vec::with_capacity(cfg.episodes),
        steps: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut global = 0;
    for ep in 0..cfg.episodes {
        let eval = ep >= cfg.train_episodes;
        let noise = if eval { 0.0 } else { cfg.ddpg.noise_std * max_power };
        let mut obs = env.reset(ep)?.into_vec();
        let mut acc = EpisodeAcc::default();
        for _ in 0..HOURS_PER_WEEK {
            let x = agent.act(&obs, !eval, &mut rng)?;
            let out = env.step_power(x)?;
            let next = out.observation.into_vec();
            let loss = agent.observe(&obs, x, out.reward, &next)?.map(|(c, _)| c);
            acc.add(out.reward, out.info.savings_gbp, out.info.clamped, loss);
            if cfg.step_log {
                trace.steps.push(StepRecord {
                    step: global,
                    episode: ep + 1,
                    epsilon: noise,
                    loss,
                    reward: out.reward,
                    power: out.info.x_requested,
                    savings: out.info.savings_gbp,
                });
            }
            global += 1;
            obs = next;
        }
        trace.reports.push(acc.report(ep + 1, eval, noise));
    }
    Ok((trace, agent))
}

/// Solve the evaluation horizon on predicted (or actual) prices and replay
/// the schedule in the full environment from an empty battery, one report
/// per evaluation week.
fn run_lp(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<(Trace, Schedule), HarnessError> {
    let start = cfg.train_episodes * HOURS_PER_WEEK;
    let end = cfg.episodes * HOURS_PER_WEEK;
    let records = inputs.series.records();
    let prices: Vec<f64> = (start..end)
        .map(|h| match (cfg.lp.prices, &inputs.forecasts) {
            (PriceSource::Forecast, Some(rows)) if h > 0 => rows[h - 1].price * cfg.env.grid.price_cap,
            _ => records[h].price,
        })
        .collect();
    let block = if cfg.lp.full_horizon {
        prices.len().max(1)
    } else {
        cfg.lp.block_hours
    };
    let lp_cfg = LpConfig::from_grid(&cfg.env.grid);
    let solution = solve_lp_blocks(&prices, block, &lp_cfg, 0.0)?;

    let mut env = make_env(cfg, inputs)?;
    env.set_state(EnvState {
        hour: start,
        charge: 0.0,
    })?;
    let mut reports = Vec::with_capacity(cfg.episodes - cfg.train_episodes);
    for (k, week) in solution.schedule.x.chunks(HOURS_PER_WEEK).enumerate() {
        let r = replay_schedule(&Schedule { x: week.to_vec() }, &mut env)?;
        reports.push(EpisodeReport {
            episode: cfg.train_episodes + k + 1,
            eval: true,
            total_reward: r.reward,
            savings: r.savings,
            punish_count: r.clamped,
            mean_loss: None,
            epsilon: 0.0,
            steps: week.len(),
        });
    }
    Ok((
        Trace {
            reports,
            steps: Vec::new(),
            snapshots: Vec::new(),
        },
        solution.schedule,
    ))
}

/// Evaluate a saved policy over the evaluation weeks without learning,
/// starting from an empty battery.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    checkpoint: impl AsRef<Path>,
) -> Result<Vec<EpisodeReport>, HarnessError> {
    let net = nn::load_network(checkpoint)?;
    let mut env = make_env(cfg, inputs)?;
    env.set_state(EnvState {
        hour: cfg.train_episodes * HOURS_PER_WEEK,
        charge: 0.0,
    })?;
    enum Policy {
        Dqn(Box<DqnAgent>),
        Actor(Network),
    }
    let policy = match cfg.method {
        Method::Dqn(_) => {
            let mut agent = DqnAgent::new(
                cfg.agent.clone(),
                env.observation_len(),
                env.action_space().size(),
                0,
            )?;
            agent.load_network(net)?;
            agent.set_mode(Mode::Eval);
            Policy::Dqn(Box::new(agent))
        }
        Method::Ddpg => {
            if net.spec().inputs != env.observation_len() || net.spec().outputs() != 1 {
                return Err(HarnessError::Nn(NnError::ArchitectureMismatch));
            }
            Policy::Actor(net)
        }
        Method::Lp => {
            return Err(HarnessError::InvalidCombination(
                "lp schedules are replayed by lp-solve, not evaluated from a checkpoint".into(),
            ))
        }
    };
    let max_power = cfg.env.grid.max_power_mw;
    let mut policy = policy;
    let mut reports = Vec::new();
    for ep in cfg.train_episodes..cfg.episodes {
        let mut obs = env.reset(ep)?.into_vec();
        let mut acc = EpisodeAcc::default();
        for _ in 0..HOURS_PER_WEEK {
            let out = match &mut policy {
                Policy::Dqn(agent) => {
                    let a = agent.act(&obs)?;
                    env.step(a)?
                }
                Policy::Actor(actor) => {
                    let x = actor.infer_one(&obs)?[0] * max_power;
                    env.step_power(x)?
                }
            };
            acc.add(out.reward, out.info.savings_gbp, out.info.clamped, None);
            obs = out.observation.into_vec();
        }
        reports.push(acc.report(ep + 1, true, 0.0));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::data::SyntheticConfig;

    fn desk(method: Method, scenario: Scenario, out: &Path) -> ExperimentConfig {
        let mut s = Settings::default();
        s.set("experiment", "algorithm", method.name()).unwrap();
        s.set("experiment", "scenario", scenario.name()).unwrap();
        s.set("experiment", "out", out.display().to_string()).unwrap();
        let mut cfg = s.resolve().unwrap();
        cfg.episodes = 4;
        cfg.train_episodes = 2;
        cfg.snapshot_episodes = vec![1, 4];
        cfg.snapshot_stride = 84;
        cfg.data = DataSource::Synthetic(SyntheticConfig {
            weeks: 4,
            ..SyntheticConfig::default()
        });
        cfg.agent.hidden = vec![16];
        cfg.agent.batch_size = 16;
        cfg.ddpg.hidden = vec![16];
        cfg.ddpg.batch_size = 16;
        cfg.forecast.train_weeks = 2;
        cfg.forecast.epochs = 1;
        cfg
    }

    #[test]
    fn rainbow_forecast9_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(Method::Dqn(Algorithm::Rainbow), Scenario::Forecast9, dir.path());
        let out = run_experiment(&cfg).unwrap();
        let run = &out[0];
        assert_eq!(run.reports.len(), 4);
        assert!(run.reports.iter().all(|r| r.steps == HOURS_PER_WEEK));
        assert_eq!(run.reports.iter().filter(|r| r.eval).count(), 2);
        assert!(run.reports[2..].iter().all(|r| r.epsilon == 0.0));
        // Two episodes with snapshots at steps 0 and 84.
        assert_eq!(run.snapshots.len(), 4);
        for s in &run.snapshots {
            assert_eq!(s.probabilities.len(), 9);
            for p in &s.probabilities {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        for f in ["episodes.csv", "steps.csv", "config.snapshot", "online.net"] {
            assert!(run.dir.join(f).is_file(), "{f}");
        }
        assert_eq!(read_episodes(run.dir.join("episodes.csv")).unwrap(), run.reports);
        let snap = &run.snapshots[0];
        let back = DistributionSnapshot::read_csv(run.dir.join("snapshots").join(snap.file_name())).unwrap();
        assert_eq!(&back, snap);
        let summary = RunSummary::load(&run.dir).unwrap();
        assert_eq!(summary.method, Method::Dqn(Algorithm::Rainbow));
        assert_eq!(summary.eval_savings, run.summary.eval_savings);

        let ev = evaluate_checkpoint(&cfg, &prepare_inputs(&cfg).unwrap(), run.dir.join("online.net")).unwrap();
        assert_eq!(ev.len(), 2);
    }

    #[test]
    fn same_seed_same_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(Method::Dqn(Algorithm::Per), Scenario::Basic5, dir.path());
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a[0].reports, b[0].reports);
    }

    #[test]
    fn scalar_agents_have_no_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(Method::Dqn(Algorithm::Dqn), Scenario::Basic5, dir.path());
        let inputs = prepare_inputs(&cfg).unwrap();
        let env = make_env(&cfg, &inputs).unwrap();
        let agent = DqnAgent::new(cfg.agent.clone(), 8, 5, 0).unwrap();
        let obs = env.observe().unwrap().into_vec();
        assert!(matches!(
            export_snapshot(&agent, &env, &obs, 1, 0),
            Err(HarnessError::Unsupported(_))
        ));
        assert!(run_experiment(&cfg).unwrap()[0].snapshots.is_empty());
    }

    #[test]
    fn untrained_distributions_are_spread_out() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = desk(Method::Dqn(Algorithm::C51), Scenario::Basic5, dir.path());
        cfg.agent.hidden = vec![64, 64];
        let inputs = prepare_inputs(&cfg).unwrap();
        let env = make_env(&cfg, &inputs).unwrap();
        let agent = DqnAgent::new(cfg.agent.clone(), 8, 5, 0).unwrap();
        let obs = env.observe().unwrap().into_vec();
        let snap = export_snapshot(&agent, &env, &obs, 1, 0).unwrap();
        for p in &snap.probabilities {
            let max = p.iter().cloned().fold(0.0, f64::max);
            assert!(max < 0.2, "{max}");
        }
    }

    #[test]
    fn ddpg_and_lp_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(Method::Ddpg, Scenario::Basic9, dir.path());
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out[0].reports.len(), 4);
        assert!(out[0].dir.join("actor.net").is_file());
        let ev = evaluate_checkpoint(&cfg, &prepare_inputs(&cfg).unwrap(), out[0].dir.join("actor.net")).unwrap();
        assert_eq!(ev.len(), 2);

        let cfg = desk(Method::Lp, Scenario::Basic5, dir.path());
        let out = run_experiment(&cfg).unwrap();
        let reports = &out[0].reports;
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].episode, 3);
        assert!(reports.iter().all(|r| r.eval));
        let schedule = Schedule::read_csv(out[0].dir.join("schedule.csv")).unwrap();
        assert_eq!(schedule.len(), 2 * HOURS_PER_WEEK);

        let rows = aggregate(&[dir.path()], false).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn short_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = desk(Method::Dqn(Algorithm::Dqn), Scenario::Basic5, dir.path());
        cfg.episodes = 5;
        assert!(matches!(
            run_experiment(&cfg),
            Err(HarnessError::InsufficientData { weeks: 4, needed: 5 })
        ));
    }
}
