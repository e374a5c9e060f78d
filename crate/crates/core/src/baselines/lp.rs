//! Arbitrage model with constant efficiencies, solved as a linear program.

use std::path::Path;

use super::simplex::{self, LinearProgram};
use super::BaselineError;
use crate::env::{Env, GridConfig};

/// Constants of the simplified battery model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpConfig {
    pub eta_ess: f64,
    /// Transformer and inverter combined.
    pub eta_grid: f64,
    pub eta_sdc: f64,
    pub max_power: f64,
    pub capacity: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            eta_ess: 0.95,
            eta_grid: 0.92,
            eta_sdc: 0.999,
            max_power: 2.0,
            capacity: 5.0,
        }
    }
}

impl LpConfig {
    pub fn from_grid(grid: &GridConfig) -> Self {
        Self {
            max_power: grid.max_power_mw,
            capacity: grid.capacity_mwh,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), BaselineError> {
        let ok = |v: f64| v > 0.0 && v <= 1.0;
        if !(ok(self.eta_ess) && ok(self.eta_grid) && ok(self.eta_sdc)) {
            return Err(BaselineError::Config("efficiencies must lie in (0, 1]".into()));
        }
        if !(self.max_power > 0.0 && self.capacity > 0.0) {
            return Err(BaselineError::Config("power and capacity must be positive".into()));
        }
        Ok(())
    }

    /// Revenue of one hour: `P (x_dis η_grid η_ess - x_ch / η_grid)`.
    pub fn revenue(&self, price: f64, charge: f64, discharge: f64) -> f64 {
        price * (discharge * self.eta_grid * self.eta_ess - charge / self.eta_grid)
    }
}

/// Net battery power per hour, MW; positive charges.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub x: Vec<f64>,
}

impl Schedule {
    pub fn new(x: Vec<f64>, max_power: f64) -> Result<Self, BaselineError> {
        if let Some(v) = x.iter().find(|v| !v.is_finite() || v.abs() > max_power + 1e-9) {
            return Err(BaselineError::Config(format!(
                "schedule power {v} exceeds ±{max_power} MW"
            )));
        }
        Ok(Self {
            x: x.into_iter().map(|v| v.clamp(-max_power, max_power)).collect(),
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self { x: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV with header `hour,x_mw`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["hour", "x_mw"])?;
        for (h, x) in self.x.iter().enumerate() {
            w.write_record([h.to_string(), format!("{x:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut x = Vec::new();
        for (i, row) in r.deserialize::<(usize, f64)>().enumerate() {
            let (h, v) = row?;
            if h != i {
                return Err(BaselineError::Config(format!(
                    "schedule row {i} has hour {h}"
                )));
            }
            x.push(v);
        }
        Ok(Self { x })
    }
}

/// One block of the model: `T` hours of predicted prices and the charge
/// entering the block.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub prices: Vec<f64>,
    pub initial_charge: f64,
    pub config: LpConfig,
}

pub fn build_lp(
    prices: &[f64],
    config: &LpConfig,
    initial_charge: f64,
) -> Result<LpProblem, BaselineError> {
    config.validate()?;
    if prices.is_empty() {
        return Err(BaselineError::Config("horizon must be at least one hour".into()));
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(BaselineError::Config("prices must be finite".into()));
    }
    if !(0.0..=config.capacity).contains(&initial_charge) {
        return Err(BaselineError::Config(format!(
            "initial charge {initial_charge} outside [0, {}]",
            config.capacity
        )));
    }
    Ok(LpProblem {
        prices: prices.to_vec(),
        initial_charge,
        config: *config,
    })
}

impl LpProblem {
    pub fn horizon(&self) -> usize {
        self.prices.len()
    }

    /// Variables are `[x_ch(T), x_dis(T), c(T)]`; row `t` is
    /// `c_t - η_sdc c_{t-1} - η_ess x_ch_t + x_dis_t = [t = 0] η_sdc c_init`.
    pub fn program(&self) -> LinearProgram {
        let t_len = self.horizon();
        let cfg = &self.config;
        let mut columns = Vec::with_capacity(3 * t_len);
        for t in 0..t_len {
            columns.push(vec![(t, -cfg.eta_ess)]);
        }
        for t in 0..t_len {
            columns.push(vec![(t, 1.0)]);
        }
        for t in 0..t_len {
            let mut col = vec![(t, 1.0)];
            if t + 1 < t_len {
                col.push((t + 1, -cfg.eta_sdc));
            }
            columns.push(col);
        }
        let mut rhs = vec![0.0; t_len];
        rhs[0] = cfg.eta_sdc * self.initial_charge;
        let mut cost = Vec::with_capacity(3 * t_len);
        cost.extend(self.prices.iter().map(|p| -p / cfg.eta_grid));
        cost.extend(self.prices.iter().map(|p| p * cfg.eta_grid * cfg.eta_ess));
        cost.extend(std::iter::repeat_n(0.0, t_len));
        let mut upper = vec![cfg.max_power; 2 * t_len];
        upper.extend(std::iter::repeat_n(cfg.capacity, t_len));
        LinearProgram {
            columns,
            rhs,
            cost,
            upper,
        }
    }

    /// Largest violation of any constraint by `(ch, dis, levels)`.
    pub fn violation(&self, ch: &[f64], dis: &[f64], levels: &[f64]) -> f64 {
        let cfg = &self.config;
        let mut worst: f64 = 0.0;
        let mut prev = self.initial_charge;
        for t in 0..self.horizon() {
            for (v, hi) in [(ch[t], cfg.max_power), (dis[t], cfg.max_power), (levels[t], cfg.capacity)] {
                worst = worst.max(-v).max(v - hi);
            }
            let balance = prev * cfg.eta_sdc + ch[t] * cfg.eta_ess - dis[t];
            worst = worst.max((levels[t] - balance).abs());
            prev = levels[t];
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// Battery level after each hour.
    pub levels: Vec<f64>,
    pub objective: f64,
    pub schedule: Schedule,
}

impl LpSolution {
    pub fn final_charge(&self, initial: f64) -> f64 {
        self.levels.last().copied().unwrap_or(initial)
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, BaselineError> {
    let t_len = problem.horizon();
    let sol = simplex::solve(&problem.program())?;
    let charge = sol.x[..t_len].to_vec();
    let discharge = sol.x[t_len..2 * t_len].to_vec();
    let levels = sol.x[2 * t_len..].to_vec();
    let x = charge.iter().zip(&discharge).map(|(c, d)| c - d).collect();
    Ok(LpSolution {
        schedule: Schedule::new(x, problem.config.max_power)?,
        charge,
        discharge,
        levels,
        objective: sol.objective,
    })
}

/// Solve consecutive blocks of `block` hours, carrying the final charge of
/// each block into the next. `block >= prices.len()` solves the whole
/// horizon as one program.
pub fn solve_lp_blocks(
    prices: &[f64],
    block: usize,
    config: &LpConfig,
    initial_charge: f64,
) -> Result<LpSolution, BaselineError> {
    if block == 0 {
        return Err(BaselineError::Config("block length must be positive".into()));
    }
    let mut out = LpSolution {
        charge: Vec::new(),
        discharge: Vec::new(),
        levels: Vec::new(),
        objective: 0.0,
        schedule: Schedule::zeros(0),
    };
    let mut c = initial_charge;
    for chunk in prices.chunks(block) {
        let sol = solve_lp(&build_lp(chunk, config, c)?)?;
        c = sol.final_charge(c).clamp(0.0, config.capacity);
        out.objective += sol.objective;
        out.charge.extend(sol.charge);
        out.discharge.extend(sol.discharge);
        out.levels.extend(sol.levels);
        out.schedule.x.extend(sol.schedule.x);
    }
    Ok(out)
}

/// Result of driving a fixed schedule through a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// Unnormalized savings, GBP.
    pub savings: f64,
    pub reward: f64,
    /// Hours in which the request was clamped to the battery limits.
    pub clamped: usize,
    pub final_charge: f64,
}

/// Run `schedule` through the full environment from its current state.
pub fn replay_schedule(schedule: &Schedule, env: &mut Env) -> Result<ReplayReport, BaselineError> {
    let start = env.state().hour;
    let available = env.series().len().saturating_sub(start);
    if schedule.len() > available {
        return Err(BaselineError::LengthMismatch {
            schedule: schedule.len(),
            available,
        });
    }
    let mut report = ReplayReport {
        savings: 0.0,
        reward: 0.0,
        clamped: 0,
        final_charge: env.state().charge,
    };
    for &x in &schedule.x {
        let out = env.step_power(x)?;
        report.savings += out.info.savings_gbp;
        report.reward += out.reward;
        report.clamped += usize::from(out.info.clamped);
    }
    report.final_charge = env.state().charge;
    Ok(report)
}

/// Run `schedule` through the constant-efficiency model, clamping requests
/// that would leave `[0, C_max]`. Returns the model objective.
pub fn replay_simplified(
    schedule: &Schedule,
    prices: &[f64],
    config: &LpConfig,
    initial_charge: f64,
) -> Result<ReplayReport, BaselineError> {
    if schedule.len() != prices.len() {
        return Err(BaselineError::LengthMismatch {
            schedule: schedule.len(),
            available: prices.len(),
        });
    }
    let mut c = initial_charge;
    let mut report = ReplayReport {
        savings: 0.0,
        reward: 0.0,
        clamped: 0,
        final_charge: c,
    };
    for (&x, &p) in schedule.x.iter().zip(prices) {
        let carried = c * config.eta_sdc;
        let (ch, dis) = if x >= 0.0 {
            let room = (config.capacity - carried) / config.eta_ess;
            (x.min(room).max(0.0), 0.0)
        } else {
            (0.0, (-x).min(carried))
        };
        if (ch - x.max(0.0)).abs() > 1e-9 || (dis - (-x).max(0.0)).abs() > 1e-9 {
            report.clamped += 1;
        }
        c = (carried + ch * config.eta_ess - dis).clamp(0.0, config.capacity);
        report.savings += config.revenue(p, ch, dis);
    }
    report.reward = report.savings;
    report.final_charge = c;
    Ok(report)
}

pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Exhaustive search over `grid^T` schedules under the constant-efficiency
/// dynamics. Schedules that leave `[0, C_max]` are infeasible. Ties keep the
/// lexicographically first schedule in `grid` order.
pub fn brute_force_schedule(
    prices: &[f64],
    grid: &[f64],
    config: &LpConfig,
    initial_charge: f64,
) -> Result<(Schedule, f64), BaselineError> {
    config.validate()?;
    let count = (grid.len() as f64).powi(prices.len() as i32);
    if count > BRUTE_FORCE_LIMIT {
        return Err(BaselineError::CombinatorialLimit { count });
    }
    if grid.is_empty() || prices.is_empty() {
        return Err(BaselineError::Config("grid and horizon must be nonempty".into()));
    }
    if grid.iter().any(|x| x.abs() > config.max_power + 1e-12) {
        return Err(BaselineError::Config("grid exceeds the power limit".into()));
    }

    struct Search<'a> {
        prices: &'a [f64],
        grid: &'a [f64],
        cfg: &'a LpConfig,
        path: Vec<f64>,
        best: Option<(Vec<f64>, f64)>,
    }
    impl Search<'_> {
        fn go(&mut self, t: usize, c: f64, value: f64) {
            if t == self.prices.len() {
                if self.best.as_ref().is_none_or(|(_, v)| value > *v) {
                    self.best = Some((self.path.clone(), value));
                }
                return;
            }
            for &x in self.grid {
                let (ch, dis) = if x >= 0.0 { (x, 0.0) } else { (0.0, -x) };
                let next = c * self.cfg.eta_sdc + ch * self.cfg.eta_ess - dis;
                if !(-1e-12..=self.cfg.capacity + 1e-12).contains(&next) {
                    continue;
                }
                self.path.push(x);
                let r = self.cfg.revenue(self.prices[t], ch, dis);
                self.go(t + 1, next.clamp(0.0, self.cfg.capacity), value + r);
                self.path.pop();
            }
        }
    }

    let mut s = Search {
        prices,
        grid,
        cfg: config,
        path: Vec::with_capacity(prices.len()),
        best: None,
    };
    s.go(0, initial_charge, 0.0);
    let (x, v) = s
        .best
        .ok_or_else(|| BaselineError::Config("no feasible schedule on the grid".into()))?;
    Ok((Schedule { x }, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn cfg() -> LpConfig {
        LpConfig::default()
    }

    const GRID: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

    #[test]
    fn single_hour_does_nothing() {
        let sol = solve_lp(&build_lp(&[80.0], &cfg(), 0.0).unwrap()).unwrap();
        assert_eq!(sol.charge, vec![0.0]);
        assert_eq!(sol.discharge, vec![0.0]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn constant_prices_do_not_pay() {
        let sol = solve_lp(&build_lp(&[50.0; 12], &cfg(), 0.0).unwrap()).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.schedule.x.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn zero_prices_give_zero() {
        let sol = solve_lp(&build_lp(&[0.0; 6], &cfg(), 0.0).unwrap()).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn two_hour_round_trip() {
        let c = cfg();
        let p = [10.0, 100.0];
        let (bf, v) = brute_force_schedule(&p, &GRID, &c, 0.0).unwrap();
        // Charging 2 MW stores 1.9 MWh, of which 1.8981 survives, so only a
        // 1 MW grid discharge is feasible.
        assert_eq!(bf.x, vec![2.0, -1.0]);
        let expected = -10.0 * 2.0 / 0.92 + 100.0 * 1.0 * 0.92 * 0.95;
        assert!((v - expected).abs() < 1e-9);

        let sol = solve_lp(&build_lp(&p, &c, 0.0).unwrap()).unwrap();
        let dis = 2.0 * 0.95 * 0.999;
        let lp_expected = -10.0 * 2.0 / 0.92 + 100.0 * dis * 0.92 * 0.95;
        assert!((sol.objective - lp_expected).abs() < 1e-9);
        assert!(sol.objective >= v);
        assert!((sol.discharge[1] - dis).abs() < 1e-9);
    }

    #[test]
    fn brute_force_single_hour_and_limit() {
        let (s, v) = brute_force_schedule(&[30.0], &GRID, &cfg(), 0.0).unwrap();
        assert_eq!((s.x, v), (vec![0.0], 0.0));
        let (s, v) = brute_force_schedule(&[30.0], &GRID, &cfg(), 5.0).unwrap();
        assert_eq!(s.x, vec![-2.0]);
        assert!((v - 30.0 * 2.0 * 0.92 * 0.95).abs() < 1e-12);
        assert!(matches!(
            brute_force_schedule(&[1.0; 9], &GRID, &cfg(), 0.0),
            Err(BaselineError::CombinatorialLimit { .. })
        ));
    }

    #[test]
    fn random_instances_are_feasible_and_dominate_the_grid() {
        let mut rng = seeded(17);
        for _ in 0..30 {
            let t = rng.random_range(1..=6);
            let prices: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..300.0)).collect();
            let c0 = rng.random_range(0.0..5.0);
            let p = build_lp(&prices, &cfg(), c0).unwrap();
            let sol = solve_lp(&p).unwrap();
            assert!(p.violation(&sol.charge, &sol.discharge, &sol.levels) <= 1e-9);
            let (_, v) = brute_force_schedule(&prices, &GRID, &cfg(), c0).unwrap();
            assert!(sol.objective >= v - 1e-9, "{} < {v}", sol.objective);
            let replay = replay_simplified(&sol.schedule, &prices, &cfg(), c0).unwrap();
            assert!((replay.savings - sol.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn blocks_carry_charge() {
        let prices: Vec<f64> = (0..48).map(|h| if h % 24 < 12 { 20.0 } else { 150.0 }).collect();
        let whole = solve_lp_blocks(&prices, 48, &cfg(), 0.0).unwrap();
        let weekly = solve_lp_blocks(&prices, 24, &cfg(), 0.0).unwrap();
        assert_eq!(weekly.schedule.len(), 48);
        assert!(whole.objective >= weekly.objective - 1e-9);
        let replay = replay_simplified(&weekly.schedule, &prices, &cfg(), 0.0).unwrap();
        assert!((replay.savings - weekly.objective).abs() < 1e-6);
    }

    #[test]
    fn full_week_solves() {
        let prices: Vec<f64> = (0..168)
            .map(|h| 60.0 + 40.0 * ((h as f64) * std::f64::consts::TAU / 24.0).sin())
            .collect();
        let p = build_lp(&prices, &cfg(), 0.0).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert!(p.violation(&sol.charge, &sol.discharge, &sol.levels) <= 1e-9);
        assert!(sol.objective > 0.0);
    }

    #[test]
    fn schedule_csv_round_trip() {
        let s = Schedule::new(vec![1.5, -2.0, 0.0, 0.1 + 0.2], 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        assert_eq!(Schedule::read_csv(&path).unwrap(), s);
        assert!(Schedule::new(vec![2.5], 2.0).is_err());
    }

    #[test]
    fn simplified_replay_clamps() {
        let r = replay_simplified(&Schedule::new(vec![-2.0], 2.0).unwrap(), &[50.0], &cfg(), 0.0).unwrap();
        assert_eq!(r.clamped, 1);
        assert_eq!(r.savings, 0.0);
        assert!(replay_simplified(&Schedule::zeros(2), &[1.0], &cfg(), 0.0).is_err());
    }
}
