use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use super::HarnessError;
use crate::agents::{AgentConfig, Algorithm};
use crate::baselines::DdpgConfig;
use crate::data::SyntheticConfig;
use crate::env::EnvConfig;
use crate::forecast::ForecastConfig;
use crate::HOURS_PER_WEEK;

/// State and action space combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Basic5,
    Basic9,
    Forecast5,
    Forecast9,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Basic5,
        Scenario::Basic9,
        Scenario::Forecast5,
        Scenario::Forecast9,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Basic5 => "basic5",
            Scenario::Basic9 => "basic9",
            Scenario::Forecast5 => "forecast5",
            Scenario::Forecast9 => "forecast9",
        }
    }

    pub fn forecasts(&self) -> bool {
        matches!(self, Scenario::Forecast5 | Scenario::Forecast9)
    }

    pub fn actions(&self) -> usize {
        match self {
            Scenario::Basic5 | Scenario::Forecast5 => 5,
            Scenario::Basic9 | Scenario::Forecast9 => 9,
        }
    }

    pub fn observation_len(&self) -> usize {
        if self.forecasts() {
            12
        } else {
            8
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s.to_ascii_lowercase())
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario {s:?}")))
    }
}

/// Control method under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dqn(Algorithm),
    Ddpg,
    Lp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dqn(a) => a.name(),
            Method::Ddpg => "ddpg",
            Method::Lp => "lp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Method::Ddpg),
            "lp" => Ok(Method::Lp),
            other => other
                .parse::<Algorithm>()
                .map(Method::Dqn)
                .map_err(|_| HarnessError::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSource {
    Forecast,
    Actual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSettings {
    pub block_hours: usize,
    /// Solve the whole evaluation horizon as one program.
    pub full_horizon: bool,
    pub prices: PriceSource,
}

impl Default for LpSettings {
    fn default() -> Self {
        Self {
            block_hours: HOURS_PER_WEEK,
            full_horizon: false,
            prices: PriceSource::Forecast,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Run directory stem; defaults to `<algorithm>-<scenario>`.
    pub name: Option<String>,
    pub method: Method,
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub episodes: usize,
    pub train_episodes: usize,
    /// 1-based episodes at which distribution snapshots are taken.
    pub snapshot_episodes: Vec<usize>,
    /// Steps between snapshots within a snapshot episode.
    pub snapshot_stride: usize,
    pub step_log: bool,
    pub data: DataSource,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub ddpg: DdpgConfig,
    pub forecast: ForecastConfig,
    pub forecast_seed: u64,
    /// Load forecasters from here instead of training them.
    pub forecast_dir: Option<PathBuf>,
    pub lp: LpSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let method = Method::Dqn(Algorithm::Dqn);
        let scenario = Scenario::Basic5;
        Self {
            name: None,
            method,
            scenario,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            episodes: 200,
            train_episodes: 100,
            snapshot_episodes: vec![1, 100, 200],
            snapshot_stride: 24,
            step_log: true,
            data: DataSource::Synthetic(SyntheticConfig::default()),
            env: EnvConfig {
                action_count: scenario.actions(),
                ..EnvConfig::default()
            },
            agent: AgentConfig::for_algorithm(Algorithm::Dqn),
            ddpg: DdpgConfig::default(),
            forecast: ForecastConfig::default(),
            forecast_seed: 1,
            forecast_dir: None,
            lp: LpSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn stem(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.method, self.scenario))
    }

    /// Directory for one seed.
    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!("{}-s{seed}", self.stem()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.train_episodes > self.episodes || self.episodes == 0 {
            return Err(HarnessError::Config(
                "need 0 < episodes and train_episodes <= episodes".into(),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(HarnessError::Config("snapshot_stride must be positive".into()));
        }
        if self.env.action_count != self.scenario.actions() {
            return Err(HarnessError::Config(format!(
                "scenario {} needs {} actions, env has {}",
                self.scenario,
                self.scenario.actions(),
                self.env.action_count
            )));
        }
        if self.lp.block_hours == 0 {
            return Err(HarnessError::Config("lp block_hours must be positive".into()));
        }
        self.env.validate()?;
        match self.method {
            Method::Dqn(_) => self.agent.validate()?,
            Method::Ddpg => self.ddpg.validate()?,
            Method::Lp => {}
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Settings::parse(&text)?.resolve()
    }

    /// Every resolved value, in the same format [`Settings::parse`] reads.
    pub fn to_ini(&self) -> String {
        let mut ini = Ini::new();
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"));
        let f = |x: f64| format!("{x:?}");

        let mut s = ini.with_section(Some("experiment"));
        if let Some(n) = &self.name {
            s.set("name", n.as_str());
        }
        s.set("algorithm", self.method.name())
            .set("scenario", self.scenario.name())
            .set(
                "seeds",
                self.seeds.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            )
            .set("out", self.out_dir.display().to_string())
            .set("episodes", self.episodes.to_string())
            .set("train_episodes", self.train_episodes.to_string())
            .set("snapshot_episodes", list(&self.snapshot_episodes))
            .set("snapshot_stride", self.snapshot_stride.to_string())
            .set("step_log", self.step_log.to_string());

        let mut s = ini.with_section(Some("data"));
        match &self.data {
            DataSource::Csv(p) => {
                s.set("source", "csv").set("path", p.display().to_string());
            }
            DataSource::Synthetic(c) => {
                s.set("source", "synthetic")
                    .set("weeks", c.weeks.to_string())
                    .set("seed", c.seed.to_string());
            }
        }

        ini.with_section(Some("env"))
            .set("reset_charge", self.env.reset_charge.to_string());

        let a = &self.agent;
        ini.with_section(Some("agent"))
            .set("gamma", f(a.gamma))
            .set("lr", f(a.lr))
            .set("batch_size", a.batch_size.to_string())
            .set("epsilon_start", f(a.epsilon_start))
            .set("epsilon_min", f(a.epsilon_min))
            .set("epsilon_decay", f(a.epsilon_decay))
            .set("alpha", f(a.alpha))
            .set("beta", f(a.beta))
            .set(
                "beta_anneal_steps",
                a.beta_anneal_steps.map_or_else(|| "none".into(), |v| v.to_string()),
            )
            .set("n_steps", a.n_steps.to_string())
            .set("sigma0", f(a.sigma0))
            .set("atoms", a.atoms.to_string())
            .set("v_min", f(a.v_min))
            .set("v_max", f(a.v_max))
            .set("target_sync", a.target_sync.to_string())
            .set("buffer_capacity", a.buffer_capacity.to_string())
            .set("hidden", list(&a.hidden))
            .set("per_offset", f(a.per_offset))
            .set("clip_norm", opt(a.clip_norm))
            .set("reward_clip", opt(a.reward_clip))
            .set("double", a.flags.double.to_string())
            .set("dueling", a.flags.dueling.to_string())
            .set("per", a.flags.per.to_string())
            .set("multistep", a.flags.multistep.to_string())
            .set("noisy", a.flags.noisy.to_string())
            .set("categorical", a.flags.categorical.to_string());

        let d = &self.ddpg;
        ini.with_section(Some("ddpg"))
            .set("gamma", f(d.gamma))
            .set("actor_lr", f(d.actor_lr))
            .set("critic_lr", f(d.critic_lr))
            .set("tau", f(d.tau))
            .set("noise_std", f(d.noise_std))
            .set("batch_size", d.batch_size.to_string())
            .set("buffer_capacity", d.buffer_capacity.to_string())
            .set("hidden", list(&d.hidden));

        let fc = &self.forecast;
        let mut s = ini.with_section(Some("forecast"));
        s.set("hidden", fc.hidden.to_string())
            .set("epochs", fc.epochs.to_string())
            .set("lr", f(fc.lr))
            .set("batch_size", fc.batch_size.to_string())
            .set("train_weeks", fc.train_weeks.to_string())
            .set("seed", self.forecast_seed.to_string());
        if let Some(dir) = &self.forecast_dir {
            s.set("dir", dir.display().to_string());
        }

        ini.with_section(Some("lp"))
            .set("block_hours", self.lp.block_hours.to_string())
            .set("full_horizon", self.lp.full_horizon.to_string())
            .set(
                "prices",
                match self.lp.prices {
                    PriceSource::Forecast => "forecast",
                    PriceSource::Actual => "actual",
                },
            );

        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }
}

/// Raw `section → key → value` settings. Later sources override earlier
/// ones, so CLI flags are applied with [`Settings::set`] after parsing the
/// file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, BTreeMap<String, String>>,
}

const SECTIONS: [&str; 7] = ["experiment", "data", "env", "agent", "ddpg", "forecast", "lp"];

impl Settings {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let ini = Ini::load_from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut out = Settings::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(HarnessError::Config("keys must sit inside a [section]".into()));
                }
                continue;
            };
            for (k, v) in props.iter() {
                out.set(section, k, v)?;
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) -> Result<(), HarnessError> {
        let section = section.trim().to_ascii_lowercase();
        if !SECTIONS.contains(&section.as_str()) {
            return Err(HarnessError::Config(format!("unknown section [{section}]")));
        }
        self.values
            .entry(section)
            .or_default()
            .insert(key.trim().to_ascii_lowercase(), value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(section)?.get(key).map(String::as_str)
    }

    /// Typed configuration. Unknown keys are rejected.
    pub fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut r = Reader {
            settings: self,
            used: Vec::new(),
        };
        let mut cfg = ExperimentConfig::default();

        if let Some(m) = r.raw("experiment", "algorithm") {
            cfg.method = m.parse()?;
        }
        if let Some(s) = r.raw("experiment", "scenario") {
            cfg.scenario = s.parse()?;
        }
        cfg.name = r.raw("experiment", "name").map(str::to_string);
        if let Some(s) = r.raw("experiment", "seeds") {
            cfg.seeds = parse_list(s, "experiment.seeds")?;
        }
        if let Some(s) = r.raw("experiment", "out") {
            cfg.out_dir = PathBuf::from(s);
        }
        r.num("experiment", "episodes", &mut cfg.episodes)?;
        r.num("experiment", "train_episodes", &mut cfg.train_episodes)?;
        if let Some(s) = r.raw("experiment", "snapshot_episodes") {
            cfg.snapshot_episodes = parse_list(s, "experiment.snapshot_episodes")?;
        }
        r.num("experiment", "snapshot_stride", &mut cfg.snapshot_stride)?;
        r.num("experiment", "step_log", &mut cfg.step_log)?;

        let source = r.raw("data", "source").unwrap_or("synthetic");
        cfg.data = match source {
            "synthetic" => {
                let mut syn = SyntheticConfig::default();
                r.num("data", "weeks", &mut syn.weeks)?;
                r.num("data", "seed", &mut syn.seed)?;
                DataSource::Synthetic(syn)
            }
            "csv" => {
                let path = r
                    .raw("data", "path")
                    .ok_or_else(|| HarnessError::Config("data.source = csv needs data.path".into()))?;
                DataSource::Csv(PathBuf::from(path))
            }
            other => return Err(HarnessError::Config(format!("unknown data source {other:?}"))),
        };

        cfg.env.action_count = cfg.scenario.actions();
        r.num("env", "reset_charge", &mut cfg.env.reset_charge)?;

        let algorithm = match cfg.method {
            Method::Dqn(a) => a,
            _ => Algorithm::Dqn,
        };
        let mut a = AgentConfig::for_algorithm(algorithm);
        r.num("agent", "gamma", &mut a.gamma)?;
        r.num("agent", "lr", &mut a.lr)?;
        r.num("agent", "batch_size", &mut a.batch_size)?;
        r.num("agent", "epsilon_start", &mut a.epsilon_start)?;
        r.num("agent", "epsilon_min", &mut a.epsilon_min)?;
        r.num("agent", "epsilon_decay", &mut a.epsilon_decay)?;
        r.num("agent", "alpha", &mut a.alpha)?;
        r.num("agent", "beta", &mut a.beta)?;
        r.opt("agent", "beta_anneal_steps", &mut a.beta_anneal_steps)?;
        r.num("agent", "n_steps", &mut a.n_steps)?;
        r.num("agent", "sigma0", &mut a.sigma0)?;
        r.num("agent", "atoms", &mut a.atoms)?;
        r.num("agent", "v_min", &mut a.v_min)?;
        r.num("agent", "v_max", &mut a.v_max)?;
        r.num("agent", "target_sync", &mut a.target_sync)?;
        r.num("agent", "buffer_capacity", &mut a.buffer_capacity)?;
        if let Some(s) = r.raw("agent", "hidden") {
            a.hidden = parse_list(s, "agent.hidden")?;
        }
        r.num("agent", "per_offset", &mut a.per_offset)?;
        r.opt("agent", "clip_norm", &mut a.clip_norm)?;
        r.opt("agent", "reward_clip", &mut a.reward_clip)?;
        r.num("agent", "double", &mut a.flags.double)?;
        r.num("agent", "dueling", &mut a.flags.dueling)?;
        r.num("agent", "per", &mut a.flags.per)?;
        r.num("agent", "multistep", &mut a.flags.multistep)?;
        r.num("agent", "noisy", &mut a.flags.noisy)?;
        r.num("agent", "categorical", &mut a.flags.categorical)?;
        cfg.agent = a;

        let d = &mut cfg.ddpg;
        r.num("ddpg", "gamma", &mut d.gamma)?;
        r.num("ddpg", "actor_lr", &mut d.actor_lr)?;
        r.num("ddpg", "critic_lr", &mut d.critic_lr)?;
        r.num("ddpg", "tau", &mut d.tau)?;
        r.num("ddpg", "noise_std", &mut d.noise_std)?;
        r.num("ddpg", "batch_size", &mut d.batch_size)?;
        r.num("ddpg", "buffer_capacity", &mut d.buffer_capacity)?;
        if let Some(s) = r.raw("ddpg", "hidden") {
            d.hidden = parse_list(s, "ddpg.hidden")?;
        }

        let fc = &mut cfg.forecast;
        r.num("forecast", "hidden", &mut fc.hidden)?;
        r.num("forecast", "epochs", &mut fc.epochs)?;
        r.num("forecast", "lr", &mut fc.lr)?;
        r.num("forecast", "batch_size", &mut fc.batch_size)?;
        r.num("forecast", "train_weeks", &mut fc.train_weeks)?;
        r.num("forecast", "seed", &mut cfg.forecast_seed)?;
        cfg.forecast_dir = r.raw("forecast", "dir").map(PathBuf::from);

        r.num("lp", "block_hours", &mut cfg.lp.block_hours)?;
        r.num("lp", "full_horizon", &mut cfg.lp.full_horizon)?;
        if let Some(p) = r.raw("lp", "prices") {
            cfg.lp.prices = match p {
                "forecast" => PriceSource::Forecast,
                "actual" => PriceSource::Actual,
                other => return Err(HarnessError::Config(format!("unknown lp.prices {other:?}"))),
            };
        }

        for (section, keys) in &self.values {
            for key in keys.keys() {
                if !r.used.iter().any(|(s, k)| s == section && k == key) {
                    return Err(HarnessError::Config(format!("unknown key {section}.{key}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Reader<'a> {
    settings: &'a Settings,
    used: Vec<(String, String)>,
}

impl Reader<'_> {
    fn raw(&mut self, section: &str, key: &str) -> Option<&str> {
        self.used.push((section.to_string(), key.to_string()));
        self.settings.get(section, key)
    }

    fn num<T: FromStr>(&mut self, section: &str, key: &str, dst: &mut T) -> Result<(), HarnessError> {
        if let Some(v) = self.raw(section, key) {
            *dst = v
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad value {v:?} for {section}.{key}")))?;
        }
        Ok(())
    }

    fn opt<T: FromStr>(&mut self, section: &str, key: &str, dst: &mut Option<T>) -> Result<(), HarnessError> {
        if let Some(v) = self.raw(section, key) {
            *dst = if v == "none" {
                None
            } else {
                Some(v.parse().map_err(|_| {
                    HarnessError::Config(format!("bad value {v:?} for {section}.{key}"))
                })?)
            };
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, HarnessError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| HarnessError::Config(format!("bad list item {p:?} in {what}")))
        })
        .collect()
}
