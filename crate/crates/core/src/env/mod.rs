//! Hourly microgrid simulator.
//!
//! A 5 MWh / 2 MW battery shares a DC bus with a PV farm; two wind turbines
//! and the campus demand sit on the AC side. Two inverters of different
//! ratings join the buses and transformers connect the wind turbines and the
//! utility grid. [`transition`] is the pure single-step model; [`Env`] walks
//! it over a [`TimeSeries`].

mod config;
pub mod efficiency;
mod ess;
mod power;
mod reward;

use std::sync::Arc;

use thiserror::Error;

use crate::data::{
    normalize_observation, DataError, Forecasts, HolidayCalendar, Observation, RawState,
    TimeSeries, TimeSeriesRecord,
};
use crate::HOURS_PER_WEEK;

pub use config::{GridConfig, WindTurbineParams, BETZ_LIMIT};
pub use efficiency::{
    converter_efficiency, select_inverter, ConverterCurve, Direction, EfficiencyModel,
    EssSurface, InverterChoice, EFFICIENCY_FLOOR,
};
pub use ess::{ess_step, EssOutcome};
pub use power::{pv_power, rated_wind_power, wind_power};
pub use reward::{compute_reward, Exogenous, StepInfo};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("action index {index} out of range for {size} actions")]
    InvalidAction { index: usize, size: usize },
    #[error("time series exhausted at hour {0}")]
    Exhausted(usize),
    #[error("week {week} out of range: data covers {weeks} weeks")]
    WeekOutOfRange { week: usize, weeks: usize },
    #[error("forecast table has {got} rows, series has {expected}")]
    ForecastLength { got: usize, expected: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Evenly spaced battery powers from `+X_max` (charge) to `-X_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    size: usize,
}

impl ActionSpace {
    /// `size` must be odd and at least 3 so that idle is always present.
    pub fn new(size: usize) -> Result<Self, EnvError> {
        if size < 3 || size % 2 == 0 {
            return Err(EnvError::Config(format!(
                "action space size must be odd and >= 3, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn idle(&self) -> usize {
        self.size / 2
    }

    pub fn power(&self, index: usize, max_power: f64) -> Result<f64, EnvError> {
        if index >= self.size {
            return Err(EnvError::InvalidAction {
                index,
                size: self.size,
            });
        }
        if index == self.idle() {
            return Ok(0.0);
        }
        let step = 2.0 * max_power / (self.size - 1) as f64;
        Ok(max_power - index as f64 * step)
    }

    pub fn powers(&self, max_power: f64) -> Vec<f64> {
        (0..self.size)
            .map(|i| self.power(i, max_power).expect("index in range"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub grid: GridConfig,
    pub wind: WindTurbineParams,
    pub efficiency: EfficiencyModel,
    pub action_count: usize,
    pub holidays: HolidayCalendar,
    /// Empty the battery at every [`Env::reset`] instead of carrying charge.
    pub reset_charge: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            wind: WindTurbineParams::default(),
            efficiency: EfficiencyModel::default(),
            action_count: 5,
            holidays: HolidayCalendar::default(),
            reset_charge: false,
        }
    }
}

/// Position in the series plus battery charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub hour: usize,
    pub charge: f64,
}

/// Exogenous flows for one record.
pub fn exogenous(record: &TimeSeriesRecord, cfg: &EnvConfig) -> Exogenous {
    Exogenous {
        demand: record.demand,
        price: record.price,
        pv: pv_power(record.solar_radiation, &cfg.grid),
        wt: wind_power(record.wind_speed, &cfg.wind) * cfg.wind_count(),
    }
}

impl EnvConfig {
    fn wind_count(&self) -> f64 {
        self.grid.wt_count as f64
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.grid.validate()?;
        self.wind.validate()?;
        ActionSpace::new(self.action_count)?;
        Ok(())
    }
}

/// One step of the model as a pure function of state, power and record.
pub fn transition(
    state: &EnvState,
    power: f64,
    record: &TimeSeriesRecord,
    cfg: &EnvConfig,
) -> (EnvState, f64, StepInfo) {
    let exo = exogenous(record, cfg);
    let outcome = ess_step(state.charge, power, &cfg.grid, &cfg.efficiency);
    let (reward, info) =
        compute_reward(&exo, &outcome, power, state.charge, &cfg.grid, &cfg.efficiency);
    let next = EnvState {
        hour: state.hour + 1,
        charge: outcome.charge_next,
    };
    (next, reward, info)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub info: StepInfo,
    /// The step consumed the final record; the observation repeats its
    /// exogenous values and the next call to `step` fails.
    pub series_end: bool,
}

/// Stateful walker over a time series. There are no terminal states:
/// episodes are weekly windows and the battery charge carries across them.
#[derive(Debug, Clone)]
pub struct Env {
    series: Arc<TimeSeries>,
    cfg: EnvConfig,
    actions: ActionSpace,
    forecasts: Option<Arc<Vec<Forecasts>>>,
    state: EnvState,
}

impl Env {
    pub fn new(series: Arc<TimeSeries>, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let actions = ActionSpace::new(cfg.action_count)?;
        for r in series.records() {
            if r.demand > cfg.grid.capacity_mwh {
                return Err(EnvError::Config(format!(
                    "demand {} MWh at {} exceeds the observation scale ({} MWh)",
                    r.demand, r.timestamp, cfg.grid.capacity_mwh
                )));
            }
            if r.price > cfg.grid.price_cap {
                return Err(EnvError::Config(format!(
                    "price {} at {} exceeds the price cap",
                    r.price, r.timestamp
                )));
            }
        }
        Ok(Self {
            series,
            cfg,
            actions,
            forecasts: None,
            state: EnvState {
                hour: 0,
                charge: 0.0,
            },
        })
    }

    /// Attach next-hour forecasts; row `t` holds the predictions for hour
    /// `t + 1` and is observed at hour `t`.
    pub fn with_forecasts(mut self, forecasts: Arc<Vec<Forecasts>>) -> Result<Self, EnvError> {
        if forecasts.len() != self.series.len() {
            return Err(EnvError::ForecastLength {
                got: forecasts.len(),
                expected: self.series.len(),
            });
        }
        self.forecasts = Some(forecasts);
        Ok(self)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn action_space(&self) -> ActionSpace {
        self.actions
    }

    pub fn observation_len(&self) -> usize {
        if self.forecasts.is_some() {
            Observation::FORECAST_LEN
        } else {
            Observation::BASIC_LEN
        }
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn weeks(&self) -> usize {
        self.series.weeks()
    }

    /// Jump to the first hour of `week`. Charge carries over unless the
    /// config asks for a reset.
    pub fn reset(&mut self, week: usize) -> Result<Observation, EnvError> {
        let weeks = self.series.weeks();
        if week >= weeks {
            return Err(EnvError::WeekOutOfRange { week, weeks });
        }
        self.state.hour = week * HOURS_PER_WEEK;
        if self.cfg.reset_charge {
            self.state.charge = 0.0;
        }
        self.observe()
    }

    /// Move to an arbitrary hour with a given charge.
    pub fn set_state(&mut self, state: EnvState) -> Result<Observation, EnvError> {
        if state.hour >= self.series.len() {
            return Err(EnvError::Exhausted(state.hour));
        }
        self.state = EnvState {
            hour: state.hour,
            charge: state.charge.clamp(0.0, self.cfg.grid.capacity_mwh),
        };
        self.observe()
    }

    pub fn observe(&self) -> Result<Observation, EnvError> {
        let hour = self.state.hour.min(self.series.len() - 1);
        self.observation_at(hour, self.state.charge)
    }

    fn observation_at(&self, hour: usize, charge: f64) -> Result<Observation, EnvError> {
        let record = &self.series.records()[hour];
        let exo = exogenous(record, &self.cfg);
        let raw = RawState {
            charge_mwh: charge,
            demand_mwh: exo.demand,
            price: exo.price,
            pv_mw: exo.pv,
            wt_mw: exo.wt,
        };
        let forecasts = self.forecasts.as_ref().map(|f| &f[hour]);
        Ok(normalize_observation(
            &raw,
            &self.cfg.grid,
            record.timestamp,
            &self.cfg.holidays,
            forecasts,
        )?)
    }

    /// Execute action `index` for the current hour.
    pub fn step(&mut self, index: usize) -> Result<StepOutcome, EnvError> {
        let power = self.actions.power(index, self.cfg.grid.max_power_mw)?;
        self.step_power(power)
    }

    /// Execute a continuous battery power (MW, positive charges), clipped to
    /// `±X_max`.
    pub fn step_power(&mut self, power: f64) -> Result<StepOutcome, EnvError> {
        let len = self.series.len();
        let hour = self.state.hour;
        if hour >= len {
            return Err(EnvError::Exhausted(hour));
        }
        let power = power.clamp(-self.cfg.grid.max_power_mw, self.cfg.grid.max_power_mw);
        let record = &self.series.records()[hour];
        let (next, reward, info) = transition(&self.state, power, record, &self.cfg);
        self.state = next;
        let series_end = next.hour >= len;
        let observation = self.observation_at(next.hour.min(len - 1), next.charge)?;
        Ok(StepOutcome {
            observation,
            reward,
            info,
            series_end,
        })
    }
}
