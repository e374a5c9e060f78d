//! Next-hour forecasters for demand, price, PV and wind output.
//!
//! Each forecaster is a one-hidden-layer network fed the previous 24 hourly
//! values of its target on the observation scale. Demand and price also see
//! temperature, humidity and clearness at the latest observed hour. Training
//! uses only the first `train_weeks` weeks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::data::{scale_humidity, scale_temperature, Forecasts, TimeSeries};
use crate::env::{exogenous, EnvConfig};
use crate::nn::{self, Adam, Network, NetworkSpec, NnError};
use crate::rng::{derive_seed, seeded};
use crate::HOURS_PER_WEEK;

pub const WINDOW: usize = 24;
pub const MAPE_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("hour {t} has only {t} hours of history, {WINDOW} required")]
    InsufficientHistory { t: usize },
    #[error("hour {t} is beyond the series end ({len})")]
    OutOfRange { t: usize, len: usize },
    #[error("series has {weeks} weeks, training needs {needed}")]
    SeriesTooShort { weeks: usize, needed: usize },
    #[error("{predictions} predictions for {actuals} actuals")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("invalid forecast config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForecastKind {
    Demand,
    Price,
    Pv,
    Wind,
}

impl ForecastKind {
    pub const ALL: [ForecastKind; 4] = [
        ForecastKind::Demand,
        ForecastKind::Price,
        ForecastKind::Pv,
        ForecastKind::Wind,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ForecastKind::Demand => "demand",
            ForecastKind::Price => "price",
            ForecastKind::Pv => "pv",
            ForecastKind::Wind => "wind",
        }
    }

    pub fn uses_weather(&self) -> bool {
        matches!(self, ForecastKind::Demand | ForecastKind::Price)
    }

    pub fn feature_len(&self) -> usize {
        WINDOW + if self.uses_weather() { 3 } else { 0 }
    }
}

impl fmt::Display for ForecastKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ForecastKind {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ForecastKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ForecastError::Config(format!("unknown forecast target {s:?}")))
    }
}

/// Target values on the observation scale for every hour.
pub fn target_series(series: &TimeSeries, kind: ForecastKind, env: &EnvConfig) -> Vec<f64> {
    let cap = env.grid.capacity_mwh;
    series
        .records()
        .iter()
        .map(|r| {
            let exo = exogenous(r, env);
            let v = match kind {
                ForecastKind::Demand => exo.demand / cap,
                ForecastKind::Price => exo.price / env.grid.price_cap,
                ForecastKind::Pv => exo.pv / cap,
                ForecastKind::Wind => exo.wt / cap,
            };
            v.clamp(0.0, 1.0)
        })
        .collect()
}

/// Features for predicting hour `t`: targets at `t-24 .. t-1`, plus weather
/// at `t-1` for demand and price. `t` may equal the series length, which
/// predicts the hour after the last record.
pub fn build_features(
    series: &TimeSeries,
    targets: &[f64],
    t: usize,
    kind: ForecastKind,
) -> Result<Vec<f64>, ForecastError> {
    if t < WINDOW {
        return Err(ForecastError::InsufficientHistory { t });
    }
    if t > targets.len() {
        return Err(ForecastError::OutOfRange {
            t,
            len: targets.len(),
        });
    }
    let mut f = Vec::with_capacity(kind.feature_len());
    f.extend_from_slice(&targets[t - WINDOW..t]);
    if kind.uses_weather() {
        let r = &series.records()[t - 1];
        f.push(scale_temperature(r.dry_bulb_temp));
        f.push(scale_humidity(r.humidity));
        f.push(r.clearness_index.clamp(0.0, 1.0));
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub train_weeks: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 50,
            lr: 1e-3,
            batch_size: 64,
            train_weeks: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub kind: ForecastKind,
    pub train_weeks: usize,
    net: Network,
}

impl Forecaster {
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn from_network(kind: ForecastKind, train_weeks: usize, net: Network) -> Result<Self, ForecastError> {
        if net.spec().inputs != kind.feature_len() || net.spec().outputs() != 1 {
            return Err(ForecastError::Nn(NnError::ArchitectureMismatch));
        }
        Ok(Self {
            kind,
            train_weeks,
            net,
        })
    }

    /// First hour not seen in training.
    pub fn holdout_start(&self) -> usize {
        self.train_weeks * HOURS_PER_WEEK
    }

    fn raw(&self, features: &[f64]) -> Result<f64, ForecastError> {
        Ok(self.net.infer_one(features)?[0])
    }
}

/// Clamp a raw network output to the observation range.
pub fn clamp_prediction(raw: f64) -> f64 {
    if raw.is_nan() {
        0.0
    } else {
        raw.clamp(0.0, 1.0)
    }
}

pub fn predict_next(f: &Forecaster, features: &[f64]) -> Result<f64, ForecastError> {
    Ok(clamp_prediction(f.raw(features)?))
}

/// Regress the next-hour value with MSE on hours `24 .. 168·train_weeks`.
pub fn train_forecaster(
    series: &TimeSeries,
    kind: ForecastKind,
    cfg: &ForecastConfig,
    env: &EnvConfig,
    seed: u64,
) -> Result<Forecaster, ForecastError> {
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) || cfg.train_weeks == 0 {
        return Err(ForecastError::Config(
            "hidden, batch size, learning rate and train weeks must be positive".into(),
        ));
    }
    if series.weeks() < cfg.train_weeks {
        return Err(ForecastError::SeriesTooShort {
            weeks: series.weeks(),
            needed: cfg.train_weeks,
        });
    }
    let targets = target_series(series, kind, env);
    let end = cfg.train_weeks * HOURS_PER_WEEK;
    let width = kind.feature_len();
    let mut xs = Vec::with_capacity((end - WINDOW) * width);
    let mut ys = Vec::with_capacity(end - WINDOW);
    for t in WINDOW..end {
        xs.extend(build_features(series, &targets, t, kind)?);
        ys.push(targets[t]);
    }
    let x = Array2::from_shape_vec((ys.len(), width), xs).expect("feature matrix");

    let tag = format!("forecast_{}", kind.name());
    let mut rng = seeded(derive_seed(seed, &tag));
    let mut net = Network::new(NetworkSpec::mlp(width, &[cfg.hidden], 1), &mut rng)?;
    let mut opt = Adam::new(cfg.lr, &net);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(ndarray::Axis(0), chunk);
            let yb = Array2::from_shape_fn((chunk.len(), 1), |(i, _)| ys[chunk[i]]);
            net.zero_grad();
            let pred = net.forward(xb.view())?;
            let (_, dy) = nn::mse_loss(&pred, &yb);
            net.backward(dy.view())?;
            opt.step(&mut net);
        }
    }
    Ok(Forecaster {
        kind,
        train_weeks: cfg.train_weeks,
        net,
    })
}

/// `100 · mean(|p - a| / max(a, 1e-3))`.
pub fn mape(predictions: &[f64], actuals: &[f64]) -> Result<f64, ForecastError> {
    if predictions.len() != actuals.len() || actuals.is_empty() {
        return Err(ForecastError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    let total: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs() / a.max(MAPE_FLOOR))
        .sum();
    Ok(100.0 * total / actuals.len() as f64)
}

/// Predictions and actuals over the hours after the training window.
pub fn holdout_predictions(
    f: &Forecaster,
    series: &TimeSeries,
    env: &EnvConfig,
) -> Result<(Vec<f64>, Vec<f64>), ForecastError> {
    let targets = target_series(series, f.kind, env);
    let start = f.holdout_start().max(WINDOW);
    assert!(start >= f.train_weeks * HOURS_PER_WEEK, "holdout overlaps training");
    if start >= targets.len() {
        return Err(ForecastError::SeriesTooShort {
            weeks: series.weeks(),
            needed: f.train_weeks + 1,
        });
    }
    let mut preds = Vec::with_capacity(targets.len() - start);
    for t in start..targets.len() {
        preds.push(predict_next(f, &build_features(series, &targets, t, f.kind)?)?);
    }
    Ok((preds, targets[start..].to_vec()))
}

/// Holdout MAPE of a trained forecaster.
pub fn holdout_mape(f: &Forecaster, series: &TimeSeries, env: &EnvConfig) -> Result<f64, ForecastError> {
    let (p, a) = holdout_predictions(f, series, env)?;
    mape(&p, &a)
}

/// MAPE of predicting each hour by the value 24 hours earlier, over hours
/// `start ..`.
pub fn persistence_mape(targets: &[f64], start: usize) -> Result<f64, ForecastError> {
    let start = start.max(WINDOW);
    if start >= targets.len() {
        return Err(ForecastError::LengthMismatch {
            predictions: 0,
            actuals: 0,
        });
    }
    let preds: Vec<f64> = (start..targets.len()).map(|t| targets[t - WINDOW]).collect();
    mape(&preds, &targets[start..])
}

/// One forecaster per observed quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub demand: Forecaster,
    pub price: Forecaster,
    pub pv: Forecaster,
    pub wind: Forecaster,
}

impl ForecastSet {
    pub fn train(
        series: &TimeSeries,
        cfg: &ForecastConfig,
        env: &EnvConfig,
        seed: u64,
    ) -> Result<Self, ForecastError> {
        Ok(Self {
            demand: train_forecaster(series, ForecastKind::Demand, cfg, env, seed)?,
            price: train_forecaster(series, ForecastKind::Price, cfg, env, seed)?,
            pv: train_forecaster(series, ForecastKind::Pv, cfg, env, seed)?,
            wind: train_forecaster(series, ForecastKind::Wind, cfg, env, seed)?,
        })
    }

    pub fn get(&self, kind: ForecastKind) -> &Forecaster {
        match kind {
            ForecastKind::Demand => &self.demand,
            ForecastKind::Price => &self.price,
            ForecastKind::Pv => &self.pv,
            ForecastKind::Wind => &self.wind,
        }
    }

    /// Row `h` holds the predictions for hour `h + 1`, observable at hour
    /// `h`. Hours without a full window fall back to the current value.
    pub fn precompute(&self, series: &TimeSeries, env: &EnvConfig) -> Result<Vec<Forecasts>, ForecastError> {
        let mut columns = Vec::with_capacity(4);
        for kind in ForecastKind::ALL {
            let f = self.get(kind);
            let targets = target_series(series, kind, env);
            let mut col = Vec::with_capacity(targets.len());
            for h in 0..targets.len() {
                let t = h + 1;
                col.push(if t < WINDOW {
                    targets[h]
                } else {
                    predict_next(f, &build_features(series, &targets, t, kind)?)?
                });
            }
            columns.push(col);
        }
        Ok((0..series.len())
            .map(|h| Forecasts {
                demand: columns[0][h],
                price: columns[1][h],
                pv: columns[2][h],
                wt: columns[3][h],
            })
            .collect())
    }

    /// Write one parameter file per target into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), ForecastError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(NnError::from)?;
        for kind in ForecastKind::ALL {
            let f = self.get(kind);
            nn::save_network(&f.net, dir.join(format!("forecast_{}.net", kind.name())))?;
        }
        std::fs::write(
            dir.join("forecast.meta"),
            format!("train_weeks={}\n", self.demand.train_weeks),
        )
        .map_err(NnError::from)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ForecastError> {
        let dir = dir.as_ref();
        let meta = std::fs::read_to_string(dir.join("forecast.meta")).map_err(NnError::from)?;
        let train_weeks = meta
            .lines()
            .find_map(|l| l.strip_prefix("train_weeks="))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| ForecastError::Config("forecast.meta lacks train_weeks".into()))?;
        let load = |kind: ForecastKind| -> Result<Forecaster, ForecastError> {
            let net = nn::load_network(dir.join(format!("forecast_{}.net", kind.name())))?;
            Forecaster::from_network(kind, train_weeks, net)
        };
        Ok(Self {
            demand: load(ForecastKind::Demand)?,
            price: load(ForecastKind::Price)?,
            pv: load(ForecastKind::Pv)?,
            wind: load(ForecastKind::Wind)?,
        })
    }
}
