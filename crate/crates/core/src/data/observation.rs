use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};

use super::DataError;
use crate::env::GridConfig;

/// Physical values at one hour, before scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawState {
    pub charge_mwh: f64,
    pub demand_mwh: f64,
    pub price: f64,
    pub pv_mw: f64,
    pub wt_mw: f64,
}

/// Next-hour predictions, already on the observation scale.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Forecasts {
    pub demand: f64,
    pub pv: f64,
    pub wt: f64,
    pub price: f64,
}

/// Agent observation with every component in `[0, 1]`.
///
/// Layout: `charge, demand, price, pv, wt, hour_of_day, hour_of_week, workday`
/// followed, when forecasts are enabled, by
/// `demand_next, pv_next, wt_next, price_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub const BASIC_LEN: usize = 8;
    pub const FORECAST_LEN: usize = 12;

    pub const CHARGE: usize = 0;
    pub const DEMAND: usize = 1;
    pub const PRICE: usize = 2;
    pub const PV: usize = 3;
    pub const WT: usize = 4;
    pub const HOUR_OF_DAY: usize = 5;
    pub const HOUR_OF_WEEK: usize = 6;
    pub const WORKDAY: usize = 7;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_forecasts(&self) -> bool {
        self.0.len() == Self::FORECAST_LEN
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn scaled(field: &'static str, value: f64, max: f64) -> Result<f64, DataError> {
    const TOL: f64 = 1e-9;
    if !(value >= -TOL && value <= max + TOL) {
        return Err(DataError::ObservationBounds {
            field,
            value,
            min: 0.0,
            max,
        });
    }
    Ok((value / max).clamp(0.0, 1.0))
}

/// Monday 00:00 is hour 0, Sunday 23:00 is hour 167.
pub fn hour_of_week(ts: NaiveDateTime) -> usize {
    ts.weekday().num_days_from_monday() as usize * 24 + ts.hour() as usize
}

/// 0 on weekends and listed holidays, otherwise 1.
pub fn workday_flag(date: NaiveDate, holidays: &HolidayCalendar) -> u8 {
    match date.weekday() {
        Weekday::Sat | Weekday::Sun => 0,
        _ if holidays.contains(date) => 0,
        _ => 1,
    }
}

/// Scale a physical state into an [`Observation`].
///
/// Charge, demand and renewable outputs are divided by the battery capacity,
/// price by the price cap; hour-of-day and hour-of-week run from 0 to 1.
pub fn normalize_observation(
    raw: &RawState,
    grid: &GridConfig,
    timestamp: NaiveDateTime,
    holidays: &HolidayCalendar,
    forecasts: Option<&Forecasts>,
) -> Result<Observation, DataError> {
    let cap = grid.capacity_mwh;
    let mut v = Vec::with_capacity(Observation::FORECAST_LEN);
    v.push(scaled("charge", raw.charge_mwh, cap)?);
    v.push(scaled("demand", raw.demand_mwh, cap)?);
    v.push(scaled("price", raw.price, grid.price_cap)?);
    v.push(scaled("pv", raw.pv_mw, cap)?);
    v.push(scaled("wt", raw.wt_mw, cap)?);
    v.push(timestamp.hour() as f64 / 23.0);
    v.push(hour_of_week(timestamp) as f64 / 167.0);
    v.push(f64::from(workday_flag(timestamp.date(), holidays)));
    if let Some(f) = forecasts {
        v.push(scaled("demand_next", f.demand, 1.0)?);
        v.push(scaled("pv_next", f.pv, 1.0)?);
        v.push(scaled("wt_next", f.wt, 1.0)?);
        v.push(scaled("price_next", f.price, 1.0)?);
    }
    Ok(Observation(v))
}

/// Recover `(charge_mwh, demand_mwh, price)` from an observation.
pub fn denormalize(obs: &Observation, grid: &GridConfig) -> (f64, f64, f64) {
    let s = obs.as_slice();
    (
        s[Observation::CHARGE] * grid.capacity_mwh,
        s[Observation::DEMAND] * grid.capacity_mwh,
        s[Observation::PRICE] * grid.price_cap,
    )
}

/// Dry bulb temperature scaled from [-20, 40] °C onto [0, 1].
pub fn scale_temperature(temp_c: f64) -> f64 {
    ((temp_c + 20.0) / 60.0).clamp(0.0, 1.0)
}

pub fn scale_humidity(humidity: f64) -> f64 {
    humidity.clamp(0.0, 1.0)
}

/// Dates treated as non-working days in addition to weekends.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    /// One ISO date (`YYYY-MM-DD`) per line; blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut dates = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|_| {
                DataError::Holiday {
                    line: i + 1,
                    value: line.to_string(),
                }
            })?;
            dates.insert(date);
        }
        Ok(Self { dates })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}
