//! Seeded synthetic hourly data.
//!
//! Stands in for campus demand and day-ahead market data. The generator is
//! built from a handful of interpretable components:
//!
//! - demand: weekday/weekend base level, a midday harmonic, a heating term
//!   driven by temperature and AR(1) noise, floored at 0 and capped;
//! - price: a daily two-level shape around a mean level, AR(1) noise and rare
//!   multiplicative spikes, all scaled by a single volatility parameter and
//!   clamped to the price cap;
//! - wind: Weibull-distributed speeds with hourly persistence, obtained from
//!   two AR(1) Gaussians (`(X² + Y²)/2` is exponential for unit-variance
//!   Gaussians, and `scale * E^(1/shape)` is Weibull);
//! - solar: a daylight bell modulated by season and a persistent clearness
//!   index;
//! - temperature and humidity: seasonal and daily harmonics plus noise.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{DataError, TimeSeries, TimeSeriesRecord, PRICE_CAP};
use crate::rng::{seeded, Rng};
use crate::HOURS_PER_WEEK;

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub weeks: usize,
    pub seed: u64,
    /// First timestamp; defaults to a Monday so weeks align with episodes.
    pub start: NaiveDateTime,

    pub demand_base_mwh: f64,
    pub demand_daily_amplitude: f64,
    /// Multiplier applied to the base level on weekends.
    pub demand_weekend_factor: f64,
    /// Extra MWh per °C below 15 °C.
    pub demand_heating_coeff: f64,
    pub demand_noise: f64,
    pub demand_max_mwh: f64,

    pub price_mean: f64,
    /// Scales every deviation from `price_mean`; 0 gives a constant price.
    pub price_volatility: f64,
    pub price_daily_amplitude: f64,
    pub price_spike_probability: f64,
    pub price_spike_magnitude: f64,

    pub wind_weibull_shape: f64,
    pub wind_weibull_scale: f64,
    pub wind_persistence: f64,

    pub solar_peak_wm2: f64,
    pub solar_seasonal_amplitude: f64,
    pub clearness_persistence: f64,

    pub temp_mean_c: f64,
    pub temp_seasonal_amplitude: f64,
    pub temp_daily_amplitude: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            weeks: 200,
            seed: 2014,
            start: NaiveDate::from_ymd_opt(2014, 1, 6)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            demand_base_mwh: 1.8,
            demand_daily_amplitude: 0.6,
            demand_weekend_factor: 0.7,
            demand_heating_coeff: 0.03,
            demand_noise: 0.12,
            demand_max_mwh: 5.0,
            price_mean: 55.0,
            price_volatility: 0.3,
            price_daily_amplitude: 1.0,
            price_spike_probability: 0.01,
            price_spike_magnitude: 6.0,
            wind_weibull_shape: 2.0,
            wind_weibull_scale: 7.0,
            wind_persistence: 0.9,
            solar_peak_wm2: 1000.0,
            solar_seasonal_amplitude: 0.5,
            clearness_persistence: 0.8,
            temp_mean_c: 10.0,
            temp_seasonal_amplitude: 7.0,
            temp_daily_amplitude: 4.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::InvalidConfig(msg.to_string()));
        if self.weeks < 1 {
            return bad("weeks must be at least 1");
        }
        let positive = [
            ("demand_base_mwh", self.demand_base_mwh),
            ("demand_max_mwh", self.demand_max_mwh),
            ("price_mean", self.price_mean),
            ("wind_weibull_shape", self.wind_weibull_shape),
            ("wind_weibull_scale", self.wind_weibull_scale),
            ("solar_peak_wm2", self.solar_peak_wm2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DataError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("demand_daily_amplitude", self.demand_daily_amplitude),
            ("demand_weekend_factor", self.demand_weekend_factor),
            ("demand_heating_coeff", self.demand_heating_coeff),
            ("demand_noise", self.demand_noise),
            ("price_volatility", self.price_volatility),
            ("price_daily_amplitude", self.price_daily_amplitude),
            ("price_spike_magnitude", self.price_spike_magnitude),
            ("solar_seasonal_amplitude", self.solar_seasonal_amplitude),
            ("temp_seasonal_amplitude", self.temp_seasonal_amplitude),
            ("temp_daily_amplitude", self.temp_daily_amplitude),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DataError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        let unit = [
            ("price_spike_probability", self.price_spike_probability),
            ("wind_persistence", self.wind_persistence),
            ("clearness_persistence", self.clearness_persistence),
        ];
        for (name, v) in unit {
            if !(0.0..1.0).contains(&v) {
                return Err(DataError::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.solar_seasonal_amplitude > 1.0 {
            return bad("solar_seasonal_amplitude must be <= 1");
        }
        if self.start.minute() != 0 || self.start.second() != 0 {
            return bad("start must be on the hour");
        }
        Ok(())
    }
}

/// Stationary unit-variance AR(1) process.
struct Ar1 {
    rho: f64,
    innovation: f64,
    value: f64,
}

impl Ar1 {
    fn new(rho: f64, rng: &mut Rng) -> Self {
        Self {
            rho,
            innovation: (1.0 - rho * rho).sqrt(),
            value: rng.sample(StandardNormal),
        }
    }

    fn next(&mut self, rng: &mut Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.rho * self.value + self.innovation * z;
        self.value
    }
}

fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Generate `cfg.weeks * 168` hourly records. Identical configs give
/// bit-identical series.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<TimeSeries, DataError> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let hours = cfg.weeks * HOURS_PER_WEEK;

    let mut demand_noise = Ar1::new(0.7, &mut rng);
    let mut price_noise = Ar1::new(0.8, &mut rng);
    let mut temp_noise = Ar1::new(0.95, &mut rng);
    let mut humidity_noise = Ar1::new(0.9, &mut rng);
    let mut clearness = Ar1::new(cfg.clearness_persistence, &mut rng);
    let mut wind_x = Ar1::new(cfg.wind_persistence, &mut rng);
    let mut wind_y = Ar1::new(cfg.wind_persistence, &mut rng);

    let mut records = Vec::with_capacity(hours);
    for t in 0..hours {
        let ts = cfg.start + Duration::hours(t as i64);
        let hour = f64::from(ts.hour());
        let doy = f64::from(ts.ordinal0());
        let weekend = is_weekend(ts.date());

        let temp = cfg.temp_mean_c
            + cfg.temp_seasonal_amplitude * (2.0 * PI * (doy - 200.0) / 365.0).cos()
            + cfg.temp_daily_amplitude * (2.0 * PI * (hour - 15.0) / 24.0).cos()
            + 1.5 * temp_noise.next(&mut rng);

        let humidity = (0.75 - 0.15 * (2.0 * PI * (hour - 15.0) / 24.0).cos()
            + 0.05 * humidity_noise.next(&mut rng))
        .clamp(0.0, 1.0);

        let clear = 1.0 / (1.0 + (-(0.9 + 1.2 * clearness.next(&mut rng))).exp());
        let daylight = (PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let season = (1.0
            + cfg.solar_seasonal_amplitude * (2.0 * PI * (doy - 172.0) / 365.0).cos())
            / (1.0 + cfg.solar_seasonal_amplitude);
        let solar = cfg.solar_peak_wm2 * season * daylight * clear;

        let wx = wind_x.next(&mut rng);
        let wy = wind_y.next(&mut rng);
        let exp1 = 0.5 * (wx * wx + wy * wy);
        let wind = cfg.wind_weibull_scale * exp1.powf(1.0 / cfg.wind_weibull_shape);

        let base = if weekend {
            cfg.demand_base_mwh * cfg.demand_weekend_factor
        } else {
            cfg.demand_base_mwh
        };
        let daily = if weekend { 0.5 } else { 1.0 }
            * cfg.demand_daily_amplitude
            * (2.0 * PI * (hour - 13.0) / 24.0).cos();
        let heating = cfg.demand_heating_coeff * (15.0 - temp).max(0.0);
        let demand = (base + daily + heating + cfg.demand_noise * demand_noise.next(&mut rng))
            .clamp(0.0, cfg.demand_max_mwh);

        // Cheapest around 05:00, dearest around 17:00, softer on weekends.
        let shape = -(2.0 * PI * (hour - 5.0) / 24.0).cos() - if weekend { 0.4 } else { 0.0 };
        let noise = price_noise.next(&mut rng);
        let spike_draw: f64 = rng.random();
        let spike_size: f64 = rng.random_range(0.5..1.0);
        let spike = if spike_draw < cfg.price_spike_probability {
            1.0 + cfg.price_volatility * cfg.price_spike_magnitude * spike_size
        } else {
            1.0
        };
        let level = 1.0 + cfg.price_volatility * (cfg.price_daily_amplitude * shape + 0.5 * noise);
        let price = (cfg.price_mean * level.max(0.05) * spike).clamp(0.0, PRICE_CAP);

        records.push(TimeSeriesRecord {
            timestamp: ts,
            demand,
            price,
            wind_speed: wind,
            solar_radiation: solar,
            dry_bulb_temp: temp,
            humidity,
            clearness_index: clear,
        });
    }
    TimeSeries::new(records)
}
