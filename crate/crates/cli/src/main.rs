use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use microgrid_rl::data::{self, generate_synthetic, SyntheticConfig};
use microgrid_rl::forecast::{holdout_mape, persistence_mape, target_series, ForecastKind, ForecastSet};
use microgrid_rl::harness::{
    self, aggregate, evaluate_checkpoint, format_comparison, prepare_inputs, run_experiment, write_comparison,
    write_episodes, ExperimentConfig, Method, Settings,
};
use microgrid_rl::HOURS_PER_WEEK;

#[derive(Parser)]
#[command(name = "microgrid", version, about = "Microgrid battery arbitrage experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic hourly dataset as CSV.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        weeks: usize,
        #[arg(long, default_value_t = SyntheticConfig::default().seed)]
        seed: u64,
    },
    /// Run the train/eval protocol for every configured seed.
    Train(Common),
    /// Evaluate a saved policy over the evaluation weeks without learning.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Network file written by `train` (online.net or actor.net).
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Solve the linear program and replay its schedule.
    LpSolve(Common),
    /// Train the four forecasters, report holdout MAPE and save them.
    ForecastTrain(Common),
    /// Compare evaluation savings across run directories.
    Aggregate {
        /// Run directories or parents of run directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail if a scenario has no dqn runs.
        #[arg(long)]
        require_baseline: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// INI config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// One seed or a comma-separated list.
    #[arg(long)]
    seed: Option<String>,
    /// CSV dataset; overrides the synthetic generator.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra overrides as `section.key=value`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn resolve(&self, method: Option<Method>) -> Result<ExperimentConfig> {
        let mut s = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        if let Some(m) = method {
            s.set("experiment", "algorithm", m.name())?;
        }
        if let Some(a) = &self.algo {
            if method.is_some() {
                bail!("--algo is fixed by this command");
            }
            s.set("experiment", "algorithm", a.as_str())?;
        }
        if let Some(v) = &self.scenario {
            s.set("experiment", "scenario", v.as_str())?;
        }
        if let Some(v) = &self.seed {
            s.set("experiment", "seeds", v.as_str())?;
        }
        if let Some(p) = &self.data {
            s.set("data", "source", "csv")?;
            s.set("data", "path", p.display().to_string())?;
        }
        if let Some(p) = &self.out {
            s.set("experiment", "out", p.display().to_string())?;
        }
        for kv in &self.sets {
            let (key, value) = kv
                .split_once('=')
                .with_context(|| format!("--set {kv:?} is not section.key=value"))?;
            let (section, key) = key
                .split_once('.')
                .with_context(|| format!("--set {kv:?} lacks a section"))?;
            s.set(section, key, value)?;
        }
        Ok(s.resolve()?)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { out, weeks, seed } => {
            let series = generate_synthetic(&SyntheticConfig {
                weeks,
                seed,
                ..SyntheticConfig::default()
            })?;
            data::write_csv(&series, &out)?;
            println!("wrote {} hours to {}", series.len(), out.display());
        }
        Command::Train(common) => {
            let cfg = common.resolve(None)?;
            if cfg.method == Method::Lp {
                bail!("use lp-solve for the linear program");
            }
            report_runs(&run_experiment(&cfg)?);
        }
        Command::LpSolve(common) => {
            let cfg = common.resolve(Some(Method::Lp))?;
            report_runs(&run_experiment(&cfg)?);
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = common.resolve(None)?;
            let inputs = prepare_inputs(&cfg)?;
            let reports = evaluate_checkpoint(&cfg, &inputs, &checkpoint)?;
            let dir = cfg.out_dir.join(format!("eval-{}", cfg.stem()));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("config.snapshot"), cfg.to_ini())?;
            write_episodes(dir.join("episodes.csv"), &reports)?;
            let total: f64 = reports.iter().map(|r| r.savings).sum();
            println!(
                "{} weeks evaluated, savings {:.2}k GBP -> {}",
                reports.len(),
                total / 1000.0,
                dir.display()
            );
        }
        Command::ForecastTrain(common) => {
            let cfg = common.resolve(None)?;
            let series = harness::load_series(&cfg.data)?;
            let set = ForecastSet::train(&series, &cfg.forecast, &cfg.env, cfg.forecast_seed)?;
            let dir = cfg.out_dir.join("forecasters");
            set.save(&dir)?;
            let holdout = cfg.forecast.train_weeks * HOURS_PER_WEEK;
            println!("{:<8} {:>10} {:>14}", "target", "mape(%)", "persist-24(%)");
            for kind in ForecastKind::ALL {
                let m = holdout_mape(set.get(kind), &series, &cfg.env)?;
                let p = persistence_mape(&target_series(&series, kind, &cfg.env), holdout)?;
                println!("{:<8} {m:>10.2} {p:>14.2}", kind.name());
            }
            println!("saved to {}", dir.display());
        }
        Command::Aggregate {
            runs,
            out,
            require_baseline,
        } => {
            let rows = aggregate(&runs, require_baseline)?;
            print!("{}", format_comparison(&rows));
            if let Some(p) = out {
                write_comparison(&p, &rows)?;
            }
        }
    }
    Ok(())
}

fn report_runs(runs: &[harness::RunOutput]) {
    for r in runs {
        println!(
            "seed {}: evaluation savings {:.2}k GBP -> {}",
            r.seed,
            r.summary.eval_savings / 1000.0,
            r.dir.display()
        );
    }
}
