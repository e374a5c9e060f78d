use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{Method, Scenario, Settings};
use super::HarnessError;

/// Summary of one weekly episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    /// 1-based.
    pub episode: usize,
    pub eval: bool,
    pub total_reward: f64,
    /// Unnormalized savings, GBP.
    pub savings: f64,
    pub punish_count: usize,
    /// `None` when no update ran during the episode.
    pub mean_loss: Option<f64>,
    /// Exploration parameter at the end of the episode.
    pub epsilon: f64,
    pub steps: usize,
}

pub const EPISODE_HEADER: [&str; 8] = [
    "episode",
    "phase",
    "total_reward",
    "savings_gbp",
    "punish_count",
    "mean_loss",
    "epsilon",
    "steps",
];

pub fn write_episodes(path: impl AsRef<Path>, reports: &[EpisodeReport]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EPISODE_HEADER)?;
    for r in reports {
        w.write_record([
            r.episode.to_string(),
            if r.eval { "eval" } else { "train" }.to_string(),
            f64_cell(r.total_reward),
            f64_cell(r.savings),
            r.punish_count.to_string(),
            r.mean_loss.map(f64_cell).unwrap_or_default(),
            f64_cell(r.epsilon),
            r.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes(path: impl AsRef<Path>) -> Result<Vec<EpisodeReport>, HarnessError> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    if r.headers()?.iter().collect::<Vec<_>>() != EPISODE_HEADER {
        return Err(HarnessError::Format(format!(
            "{} does not have the episode header",
            path.as_ref().display()
        )));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let cell = |i: usize| row.get(i).unwrap_or("");
        let int = |i: usize| {
            cell(i)
                .parse::<usize>()
                .map_err(|_| HarnessError::Format(format!("bad integer {:?}", cell(i))))
        };
        out.push(EpisodeReport {
            episode: int(0)?,
            eval: match cell(1) {
                "eval" => true,
                "train" => false,
                other => return Err(HarnessError::Format(format!("bad phase {other:?}"))),
            },
            total_reward: parse_f64_cell(cell(2))?,
            savings: parse_f64_cell(cell(3))?,
            punish_count: int(4)?,
            mean_loss: if cell(5).is_empty() {
                None
            } else {
                Some(parse_f64_cell(cell(5))?)
            },
            epsilon: parse_f64_cell(cell(6))?,
            steps: int(7)?,
        });
    }
    Ok(out)
}

/// One row of the per-step training log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub episode: usize,
    pub epsilon: f64,
    pub loss: Option<f64>,
    pub reward: f64,
    pub power: f64,
    pub savings: f64,
}

pub fn write_steps(path: impl AsRef<Path>, steps: &[StepRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "episode", "epsilon", "loss", "reward", "power_mw", "savings_gbp"])?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            s.episode.to_string(),
            f64_cell(s.epsilon),
            s.loss.map(f64_cell).unwrap_or_default(),
            f64_cell(s.reward),
            f64_cell(s.power),
            f64_cell(s.savings),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Value distribution of every action at one step, with context.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSnapshot {
    pub episode: usize,
    pub step: usize,
    /// `probabilities[action][atom]`.
    pub probabilities: Vec<Vec<f64>>,
    pub support: Vec<f64>,
    pub chosen: usize,
    pub charge: f64,
    pub price: f64,
    pub demand: f64,
}

const SNAPSHOT_HEADER: [&str; 10] = [
    "episode",
    "step",
    "action",
    "atom",
    "support",
    "probability",
    "chosen",
    "charge_mwh",
    "price",
    "demand_mwh",
];

impl DistributionSnapshot {
    pub fn file_name(&self) -> String {
        format!("ep{:03}_step{:03}.csv", self.episode, self.step)
    }

    /// One row per (action, atom).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(SNAPSHOT_HEADER)?;
        for (a, probs) in self.probabilities.iter().enumerate() {
            for (i, p) in probs.iter().enumerate() {
                w.write_record([
                    self.episode.to_string(),
                    self.step.to_string(),
                    a.to_string(),
                    i.to_string(),
                    f64_cell(self.support[i]),
                    f64_cell(*p),
                    u8::from(a == self.chosen).to_string(),
                    f64_cell(self.charge),
                    f64_cell(self.price),
                    f64_cell(self.demand),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut snap: Option<Self> = None;
        for row in r.records() {
            let row = row?;
            let cell = |i: usize| row.get(i).unwrap_or("");
            let int = |i: usize| {
                cell(i)
                    .parse::<usize>()
                    .map_err(|_| HarnessError::Format(format!("bad integer {:?}", cell(i))))
            };
            let (action, atom) = (int(2)?, int(3)?);
            let s = snap.get_or_insert(Self {
                episode: int(0)?,
                step: int(1)?,
                probabilities: Vec::new(),
                support: Vec::new(),
                chosen: 0,
                charge: parse_f64_cell(cell(7))?,
                price: parse_f64_cell(cell(8))?,
                demand: parse_f64_cell(cell(9))?,
            });
            if action == s.probabilities.len() {
                s.probabilities.push(Vec::new());
            }
            if action + 1 != s.probabilities.len() || atom != s.probabilities[action].len() {
                return Err(HarnessError::Format("snapshot rows out of order".into()));
            }
            s.probabilities[action].push(parse_f64_cell(cell(5))?);
            if action == 0 {
                s.support.push(parse_f64_cell(cell(4))?);
            }
            if cell(6) == "1" {
                s.chosen = action;
            }
        }
        snap.ok_or_else(|| HarnessError::Format("empty snapshot".into()))
    }
}

/// `100 (alg - baseline) / baseline`.
pub fn percent_difference(value: f64, baseline: f64) -> f64 {
    100.0 * (value - baseline) / baseline
}

/// Evaluation-phase savings of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub method: Method,
    pub scenario: Scenario,
    pub seed: u64,
    /// Sum over evaluation episodes, GBP.
    pub eval_savings: f64,
    /// Cumulative savings after each evaluation episode, GBP.
    pub cumulative: Vec<f64>,
}

impl RunSummary {
    pub fn from_reports(
        dir: PathBuf,
        method: Method,
        scenario: Scenario,
        seed: u64,
        reports: &[EpisodeReport],
    ) -> Self {
        let mut total = 0.0;
        let cumulative = reports
            .iter()
            .filter(|r| r.eval)
            .map(|r| {
                total += r.savings;
                total
            })
            .collect();
        Self {
            dir,
            method,
            scenario,
            seed,
            eval_savings: total,
            cumulative,
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join("config.snapshot"))?;
        let settings = Settings::parse(&text)?;
        let field = |k: &str| {
            settings
                .get("experiment", k)
                .ok_or_else(|| HarnessError::Format(format!("config.snapshot lacks experiment.{k}")))
        };
        let method: Method = field("algorithm")?.parse()?;
        let scenario: Scenario = field("scenario")?.parse()?;
        let seed = field("seeds")?
            .split(',')
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| HarnessError::Format("config.snapshot has no seed".into()))?;
        let reports = read_episodes(dir.join("episodes.csv"))?;
        Ok(Self::from_reports(dir.to_path_buf(), method, scenario, seed, &reports))
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: Scenario,
    pub method: Method,
    pub seeds: usize,
    /// Mean evaluation savings, thousands of GBP.
    pub mean_k: f64,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std_k: f64,
    /// Against DQN in the same scenario.
    pub vs_dqn: Option<f64>,
}

/// Group runs by scenario and method and compare each to DQN. With
/// `require_baseline`, a scenario without a DQN run is an error.
pub fn compare(runs: &[RunSummary], require_baseline: bool) -> Result<Vec<ComparisonRow>, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::NoRuns(PathBuf::new()));
    }
    let mut groups: BTreeMap<(Scenario, Method), Vec<f64>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.scenario, r.method))
            .or_default()
            .push(r.eval_savings / 1000.0);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let mut rows = Vec::new();
    for (&(scenario, method), values) in &groups {
        let (mean_k, std_k) = stats(values);
        let base = groups
            .get(&(scenario, Method::Dqn(crate::agents::Algorithm::Dqn)))
            .map(|v| stats(v).0);
        if base.is_none() && require_baseline {
            return Err(HarnessError::MissingBaseline(scenario.to_string()));
        }
        rows.push(ComparisonRow {
            scenario,
            method,
            seeds: values.len(),
            mean_k,
            std_k,
            vs_dqn: base.map(|b| percent_difference(mean_k, b)),
        });
    }
    Ok(rows)
}

/// Run directories below `root`: `root` itself if it holds a run, otherwise
/// its immediate subdirectories that do.
pub fn find_runs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>, HarnessError> {
    let root = root.as_ref();
    let is_run = |p: &Path| p.join("episodes.csv").is_file() && p.join("config.snapshot").is_file();
    if is_run(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let p = entry?.path();
        if p.is_dir() && is_run(&p) {
            dirs.push(p);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(HarnessError::NoRuns(root.to_path_buf()));
    }
    Ok(dirs)
}

/// Load every run under each root and build the comparison table.
pub fn aggregate<P: AsRef<Path>>(roots: &[P], require_baseline: bool) -> Result<Vec<ComparisonRow>, HarnessError> {
    let mut runs = Vec::new();
    for root in roots {
        for dir in find_runs(root)? {
            runs.push(RunSummary::load(&dir)?);
        }
    }
    compare(&runs, require_baseline)
}

pub fn write_comparison(path: impl AsRef<Path>, rows: &[ComparisonRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "algorithm", "seeds", "savings_k_gbp", "std_k_gbp", "vs_dqn_pct"])?;
    for r in rows {
        w.write_record([
            r.scenario.to_string(),
            r.method.to_string(),
            r.seeds.to_string(),
            format!("{:.2}", r.mean_k),
            format!("{:.2}", r.std_k),
            r.vs_dqn.map(|v| format!("{v:.2}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table for terminals.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<8} {:>5} {:>12} {:>10} {:>10}",
        "scenario", "algo", "seeds", "savings(k)", "std(k)", "vs dqn"
    );
    for r in rows {
        let pct = r.vs_dqn.map(|v| format!("{v:+.2}%")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:<8} {:>5} {:>12.2} {:>10.2} {:>10}",
            r.scenario.name(),
            r.method.name(),
            r.seeds,
            r.mean_k,
            r.std_k,
            pct
        );
    }
    out
}

/// Shortest representation that parses back to the same bits.
fn f64_cell(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64_cell(s: &str) -> Result<f64, HarnessError> {
    s.parse()
        .map_err(|_| HarnessError::Format(format!("bad number {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use proptest::prelude::*;

    fn run(method: Method, scenario: Scenario, savings_k: f64) -> RunSummary {
        RunSummary {
            dir: PathBuf::new(),
            method,
            scenario,
            seed: 0,
            eval_savings: savings_k * 1000.0,
            cumulative: vec![],
        }
    }

    #[test]
    fn reference_pair_gives_expected_percentage() {
        let rows = compare(
            &[
                run(Method::Dqn(Algorithm::Dqn), Scenario::Basic5, 75.00),
                run(Method::Dqn(Algorithm::Rainbow), Scenario::Basic5, 79.46),
            ],
            true,
        )
        .unwrap();
        let rainbow = rows.iter().find(|r| r.method == Method::Dqn(Algorithm::Rainbow)).unwrap();
        assert!((rainbow.vs_dqn.unwrap() - 5.95).abs() < 0.01);
        let dqn = rows.iter().find(|r| r.method == Method::Dqn(Algorithm::Dqn)).unwrap();
        assert_eq!(dqn.vs_dqn, Some(0.0));
    }

    #[test]
    fn missing_baseline_and_empty_input() {
        let only = [run(Method::Lp, Scenario::Basic9, 80.0)];
        assert!(matches!(compare(&only, true), Err(HarnessError::MissingBaseline(_))));
        assert_eq!(compare(&only, false).unwrap()[0].vs_dqn, None);
        assert!(compare(&[], false).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(aggregate(&[dir.path()], false), Err(HarnessError::NoRuns(_))));
    }

    #[test]
    fn seed_statistics() {
        let d = Method::Dqn(Algorithm::Dqn);
        let rows = compare(
            &[run(d, Scenario::Basic5, 10.0), run(d, Scenario::Basic5, 14.0)],
            true,
        )
        .unwrap();
        assert_eq!(rows[0].seeds, 2);
        assert_eq!(rows[0].mean_k, 12.0);
        assert!((rows[0].std_k - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn episode_csv_round_trip() {
        let reports = vec![
            EpisodeReport {
                episode: 1,
                eval: false,
                total_reward: -0.1,
                savings: 123.456,
                punish_count: 2,
                mean_loss: None,
                epsilon: 0.9,
                steps: 168,
            },
            EpisodeReport {
                episode: 2,
                eval: true,
                total_reward: 1.0 / 3.0,
                savings: -5.0,
                punish_count: 0,
                mean_loss: Some(1e-7),
                epsilon: 0.0,
                steps: 168,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_episodes(&p, &reports).unwrap();
        assert_eq!(read_episodes(&p).unwrap(), reports);
    }

    proptest! {
        #[test]
        fn snapshot_csv_round_trips(
            actions in 1usize..5,
            atoms in 2usize..8,
            seed in any::<u64>(),
            charge in 0.0f64..5.0,
        ) {
            use rand::Rng as _;
            let mut rng = crate::rng::seeded(seed);
            let probabilities: Vec<Vec<f64>> = (0..actions)
                .map(|_| {
                    let raw: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / s).collect()
                })
                .collect();
            let snap = DistributionSnapshot {
                episode: 7,
                step: 42,
                support: (0..atoms).map(|i| -10.0 + 20.0 * i as f64 / (atoms - 1) as f64).collect(),
                chosen: rng.random_range(0..actions),
                probabilities,
                charge,
                price: 61.25,
                demand: 2.2,
            };
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join(snap.file_name());
            snap.write_csv(&p).unwrap();
            prop_assert_eq!(DistributionSnapshot::read_csv(&p).unwrap(), snap);
        }
    }
}
