//! Hourly input data: demand, price and weather.
//!
//! Series are either ingested from CSV (see [`load_csv`] for the schema) or
//! produced by the seeded generator in [`synthetic`]. Both routes yield a
//! [`TimeSeries`] whose records are strictly hourly-contiguous.

mod observation;
pub mod synthetic;

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime, Timelike};
use thiserror::Error;

pub use observation::{
    denormalize, hour_of_week, normalize_observation, scale_humidity, scale_temperature,
    workday_flag, Forecasts, HolidayCalendar, Observation, RawState,
};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Day-ahead price cap in GBP/MWh. Prices above it are clamped on ingestion.
pub const PRICE_CAP: f64 = 250.0;

/// Column names, in the order written by [`write_csv`].
pub const CSV_COLUMNS: [&str; 8] = [
    "timestamp",
    "demand_mwh",
    "price_gbp_mwh",
    "wind_ms",
    "solar_wm2",
    "temp_c",
    "humidity",
    "clearness",
];

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at row {row}: {source}")]
    Csv {
        row: u64,
        #[source]
        source: csv::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {column} value `{value}`")]
    Parse {
        row: u64,
        column: &'static str,
        value: String,
    },
    #[error("row {row}: {column} = {value} is out of range")]
    OutOfRange {
        row: u64,
        column: &'static str,
        value: f64,
    },
    #[error("row {row}: data gap, hour {hour} ({expected}) is missing")]
    Gap {
        row: u64,
        hour: usize,
        expected: NaiveDateTime,
    },
    #[error("row {row}: timestamp {found} does not follow {previous}")]
    NonMonotonic {
        row: u64,
        previous: NaiveDateTime,
        found: NaiveDateTime,
    },
    #[error("row {row}: timestamp {found} is not on the hour")]
    OffHour { row: u64, found: NaiveDateTime },
    #[error("time series is empty")]
    Empty,
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("observation value {field} = {value} outside [{min}, {max}]")]
    ObservationBounds {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("holiday calendar line {line}: cannot parse date `{value}`")]
    Holiday { line: usize, value: String },
}

/// One hour of exogenous data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub timestamp: NaiveDateTime,
    /// MWh consumed during the hour.
    pub demand: f64,
    /// GBP/MWh, import and export alike.
    pub price: f64,
    /// m/s at hub height.
    pub wind_speed: f64,
    /// W/m².
    pub solar_radiation: f64,
    /// Dry bulb temperature, °C.
    pub dry_bulb_temp: f64,
    /// Relative humidity as a fraction.
    pub humidity: f64,
    /// Sky clearness index as a fraction.
    pub clearness_index: f64,
}

impl TimeSeriesRecord {
    fn validate(&self, row: u64) -> Result<(), DataError> {
        let checks: [(&'static str, f64, f64, f64); 6] = [
            ("demand_mwh", self.demand, 0.0, f64::INFINITY),
            ("price_gbp_mwh", self.price, 0.0, PRICE_CAP),
            ("wind_ms", self.wind_speed, 0.0, f64::INFINITY),
            ("solar_wm2", self.solar_radiation, 0.0, f64::INFINITY),
            ("humidity", self.humidity, 0.0, 1.0),
            ("clearness", self.clearness_index, 0.0, 1.0),
        ];
        for (column, value, lo, hi) in checks {
            if !(value >= lo && value <= hi) {
                return Err(DataError::OutOfRange { row, column, value });
            }
        }
        if !self.dry_bulb_temp.is_finite() {
            return Err(DataError::OutOfRange {
                row,
                column: "temp_c",
                value: self.dry_bulb_temp,
            });
        }
        Ok(())
    }
}

/// A non-empty, strictly hourly-contiguous sequence of records.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    records: Vec<TimeSeriesRecord>,
}

impl TimeSeries {
    /// Validates contiguity and value ranges. Row numbers in errors are
    /// 1-based record positions.
    pub fn new(records: Vec<TimeSeriesRecord>) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, rec) in records.iter().enumerate() {
            let row = i as u64 + 1;
            rec.validate(row)?;
            check_on_hour(row, rec.timestamp)?;
            if i > 0 {
                check_next(row, i, records[i - 1].timestamp, rec.timestamp, records[0].timestamp)?;
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TimeSeriesRecord] {
        &self.records
    }

    pub fn get(&self, hour: usize) -> Option<&TimeSeriesRecord> {
        self.records.get(hour)
    }

    /// Number of complete weeks covered.
    pub fn weeks(&self) -> usize {
        self.records.len() / crate::HOURS_PER_WEEK
    }

    pub fn start(&self) -> NaiveDateTime {
        self.records[0].timestamp
    }
}

fn check_on_hour(row: u64, ts: NaiveDateTime) -> Result<(), DataError> {
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(DataError::OffHour { row, found: ts });
    }
    Ok(())
}

fn check_next(
    row: u64,
    index: usize,
    previous: NaiveDateTime,
    found: NaiveDateTime,
    start: NaiveDateTime,
) -> Result<(), DataError> {
    let expected = previous + Duration::hours(1);
    if found == expected {
        Ok(())
    } else if found > expected {
        let hour = (expected - start).num_hours() as usize;
        debug_assert_eq!(hour, index);
        Err(DataError::Gap {
            row,
            hour,
            expected,
        })
    } else {
        Err(DataError::NonMonotonic {
            row,
            previous,
            found,
        })
    }
}

fn parse_timestamp(row: u64, raw: &str) -> Result<NaiveDateTime, DataError> {
    let raw = raw.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .ok_or_else(|| DataError::Parse {
            row,
            column: "timestamp",
            value: raw.to_string(),
        })
}

/// Load an hourly series from CSV.
///
/// Required header (any column order):
/// `timestamp,demand_mwh,price_gbp_mwh,wind_ms,solar_wm2,temp_c,humidity,clearness`.
/// Timestamps are ISO-8601 local hours such as `2014-01-01T00:00:00`. Prices
/// above [`PRICE_CAP`] are clamped to the cap. Row numbers in errors are file
/// line numbers.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<TimeSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| DataError::Csv { row: 1, source })?
        .clone();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }

    let mut records: Vec<TimeSeriesRecord> = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|source| DataError::Csv {
            row: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let row = rec.position().map_or(records.len() as u64 + 2, |p| p.line());
        let field = |i: usize| rec.get(columns[i]).unwrap_or("");
        let number = |i: usize| -> Result<f64, DataError> {
            let raw = field(i);
            raw.parse::<f64>().map_err(|_| DataError::Parse {
                row,
                column: CSV_COLUMNS[i],
                value: raw.to_string(),
            })
        };
        let timestamp = parse_timestamp(row, field(0))?;
        let record = TimeSeriesRecord {
            timestamp,
            demand: number(1)?,
            price: number(2)?.min(PRICE_CAP),
            wind_speed: number(3)?,
            solar_radiation: number(4)?,
            dry_bulb_temp: number(5)?,
            humidity: number(6)?,
            clearness_index: number(7)?,
        };
        record.validate(row)?;
        check_on_hour(row, timestamp)?;
        if let Some(prev) = records.last() {
            check_next(row, records.len(), prev.timestamp, timestamp, records[0].timestamp)?;
        }
        records.push(record);
    }
    TimeSeries::new(records)
}

/// Write a series in the [`load_csv`] schema.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(series, file)
}

pub fn write_csv_to<W: std::io::Write>(series: &TimeSeries, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |source| DataError::Csv { row: 0, source };
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in series.records() {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.demand.to_string(),
            r.price.to_string(),
            r.wind_speed.to_string(),
            r.solar_radiation.to_string(),
            r.dry_bulb_temp.to_string(),
            r.humidity.to_string(),
            r.clearness_index.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Csv {
        row: 0,
        source: e.into(),
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_with(rows: impl Iterator<Item = String>) -> String {
        let mut s = CSV_COLUMNS.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        s
    }

    fn row(hour: usize, price: f64) -> String {
        let ts = NaiveDateTime::parse_from_str("2014-01-06 00:00", "%Y-%m-%d %H:%M").unwrap()
            + Duration::hours(hour as i64);
        format!(
            "{},2.5,{price},6.0,120.0,8.5,0.8,0.4",
            ts.format("%Y-%m-%dT%H:%M:%S")
        )
    }

    #[test]
    fn loads_a_full_week() {
        let text = csv_with((0..168).map(|h| row(h, 40.0)));
        let series = read_csv(text.as_bytes()).unwrap();
        assert_eq!(series.len(), 168);
        assert_eq!(series.weeks(), 1);
        assert_eq!(series.get(3).unwrap().demand, 2.5);
    }

    #[test]
    fn clamps_prices_above_cap() {
        let text = csv_with((0..3).map(|h| row(h, if h == 1 { 300.0 } else { 40.0 })));
        let series = read_csv(text.as_bytes()).unwrap();
        assert_eq!(series.get(1).unwrap().price, 250.0);
    }

    #[test]
    fn gap_error_names_missing_hour() {
        let text = csv_with((0..10).filter(|&h| h != 5).map(|h| row(h, 40.0)));
        let err = read_csv(text.as_bytes()).unwrap_err();
        match &err {
            DataError::Gap { hour, row, .. } => {
                assert_eq!(*hour, 5);
                // header is line 1, hour 0 is line 2, the row after the gap is line 7
                assert_eq!(*row, 7);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("hour 5"));
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let rows = [row(0, 1.0), row(1, 1.0), row(1, 1.0)];
        let err = read_csv(csv_with(rows.into_iter()).as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::NonMonotonic { row: 4, .. }), "{err:?}");
    }

    #[test]
    fn missing_column_is_reported() {
        let text = "timestamp,demand_mwh\n2014-01-01T00:00:00,1.0\n";
        let err = read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(ref c) if c == "price_gbp_mwh"));
    }

    #[test]
    fn unparseable_value_reports_row() {
        let mut rows: Vec<String> = (0..3).map(|h| row(h, 40.0)).collect();
        rows[2] = rows[2].replacen("2.5", "abc", 1);
        let err = read_csv(csv_with(rows.into_iter()).as_bytes()).unwrap_err();
        assert!(
            matches!(err, DataError::Parse { row: 4, column: "demand_mwh", .. }),
            "{err:?}"
        );
    }

    #[test]
    fn negative_demand_is_out_of_range() {
        let mut rows: Vec<String> = (0..2).map(|h| row(h, 40.0)).collect();
        rows[1] = rows[1].replacen(",2.5,", ",-1,", 1);
        let err = read_csv(csv_with(rows.into_iter()).as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::OutOfRange { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn write_then_read_is_lossless() {
        let cfg = SyntheticConfig {
            weeks: 1,
            ..SyntheticConfig::default()
        };
        let series = generate_synthetic(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&series, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, series);
    }
}
