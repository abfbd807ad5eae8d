//! Hourly load and price series: CSV ingestion, validation, and calendar
//! partitioning into gap-free billing months.
//!
//! Timestamps are local standard time, hour-beginning (a point stamped 13:00
//! is the average over 13:00-14:00), with no daylight-saving shifts. Billing
//! months must be complete; gaps are a hard error, never interpolated.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use std::fmt;
use std::io::{Read, Write};
use thiserror::Error;

/// Quantity carried by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Hourly average demand in MW.
    Megawatt,
    /// Hourly energy price in $/MWh (may be negative).
    UsdPerMwh,
}

impl Unit {
    /// CSV value-column header for this unit.
    pub fn column_header(self) -> &'static str {
        match self {
            Unit::Megawatt => "load_mw",
            Unit::UsdPerMwh => "price_usd_per_mwh",
        }
    }

    fn from_column_header(header: &str) -> Option<Unit> {
        match header {
            "load_mw" => Some(Unit::Megawatt),
            "price_usd_per_mwh" => Some(Unit::UsdPerMwh),
            _ => None,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Megawatt => write!(f, "MW"),
            Unit::UsdPerMwh => write!(f, "USD_per_MWh"),
        }
    }
}

/// One metered hour: timestamp plus value in the series unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub timestamp: NaiveDateTime,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: timestamp {timestamp} does not increase over the previous row")]
    NonMonotonicTimestamp {
        row: usize,
        timestamp: NaiveDateTime,
    },
    #[error("row {row}: negative load {value}")]
    NegativeLoad { row: usize, value: f64 },
    #[error("unit mismatch: expected column `{expected}`, found `{found}`")]
    UnitMismatch {
        expected: &'static str,
        found: String,
    },
    #[error("{year}-{month:02} is incomplete: {missing} missing hour(s)")]
    IncompleteMonth {
        year: i32,
        month: u32,
        missing: usize,
    },
    #[error("series is empty")]
    EmptySeries,
    #[error("point {timestamp} falls outside {year}-{month:02}")]
    PointOutsideMonth {
        year: i32,
        month: u32,
        timestamp: NaiveDateTime,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Validated ordered hourly series. Timestamps strictly increase; load
/// values are non-negative. Construction is the only validation gate, so a
/// value of this type can be shared read-only across scenario evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    points: Vec<TimePoint>,
    unit: Unit,
}

impl HourlySeries {
    pub fn new(points: Vec<TimePoint>, unit: Unit) -> Result<Self, TimeseriesError> {
        for (i, window) in points.windows(2).enumerate() {
            if window[1].timestamp <= window[0].timestamp {
                return Err(TimeseriesError::NonMonotonicTimestamp {
                    row: i + 2,
                    timestamp: window[1].timestamp,
                });
            }
        }
        if unit == Unit::Megawatt {
            if let Some((i, p)) = points
                .iter()
                .enumerate()
                .find(|(_, p)| p.value < 0.0 || !p.value.is_finite())
            {
                return Err(TimeseriesError::NegativeLoad {
                    row: i + 1,
                    value: p.value,
                });
            }
        }
        Ok(HourlySeries { points, unit })
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A complete calendar month of hourly points: exactly `24 * days_in_month`
/// entries, one per hour, in order. Emptiness and gaps are unrepresentable,
/// which discharges the per-month preconditions of the billing and dispatch
/// operations.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthSlice {
    year: i32,
    month: u32,
    points: Vec<TimePoint>,
}

impl MonthSlice {
    /// Validates that `points` cover exactly every hour of `year-month`.
    pub fn new(year: i32, month: u32, points: Vec<TimePoint>) -> Result<Self, TimeseriesError> {
        let expected =
            hours_in_month(year, month).ok_or_else(|| TimeseriesError::MalformedRow {
                row: 0,
                message: format!("invalid calendar month {year}-{month:02}"),
            })?;
        for p in &points {
            if p.timestamp.year() != year || p.timestamp.month() != month {
                return Err(TimeseriesError::PointOutsideMonth {
                    year,
                    month,
                    timestamp: p.timestamp,
                });
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(TimeseriesError::NonMonotonicTimestamp {
                    row: i + 2,
                    timestamp: w[1].timestamp,
                });
            }
        }
        // Strictly increasing hour-aligned stamps inside one month: complete
        // iff the count matches the month's hour count.
        if points.len() != expected {
            return Err(TimeseriesError::IncompleteMonth {
                year,
                month,
                missing: expected.saturating_sub(points.len()),
            });
        }
        Ok(MonthSlice {
            year,
            month,
            points,
        })
    }

    /// Same month and timestamps, new hourly values. Used by dispatch to
    /// build the shaved trace without revalidating the calendar.
    pub(crate) fn with_values(&self, values: &[f64]) -> MonthSlice {
        assert_eq!(values.len(), self.points.len());
        let points = self
            .points
            .iter()
            .zip(values)
            .map(|(p, &v)| TimePoint {
                timestamp: p.timestamp,
                value: v,
            })
            .collect();
        MonthSlice {
            year: self.year,
            month: self.month,
            points,
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hourly values in order, unit per the source series.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.value)
    }

    /// Arithmetic mean of the month's hourly values.
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|p| p.value).sum::<f64>() / self.points.len() as f64
    }

    /// Maximum hourly value of the month.
    pub fn peak(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of hourly values; for a load series this is the month's MWh.
    pub fn total(&self) -> f64 {
        self.points.iter().map(|p| p.value).sum()
    }
}

/// Hours in the calendar month, or `None` for an invalid month number.
pub fn hours_in_month(year: i32, month: u32) -> Option<usize> {
    let first = NaiveDate::from_ymd_opt(year, month, 1)?;
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)?
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)?
    };
    Some((next - first).num_days() as usize * 24)
}

/// Parse a load or price CSV (`timestamp,<value-column>` with timestamps
/// `YYYY-MM-DDTHH:00`) into a validated series.
pub fn parse_series<R: Read>(
    reader: R,
    expected_unit: Unit,
) -> Result<HourlySeries, TimeseriesError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| TimeseriesError::MalformedRow {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || headers.get(0) != Some("timestamp") {
        return Err(TimeseriesError::MalformedRow {
            row: 0,
            message: format!(
                "expected header `timestamp,{}`",
                expected_unit.column_header()
            ),
        });
    }
    let value_header = headers.get(1).unwrap_or_default();
    match Unit::from_column_header(value_header) {
        Some(unit) if unit == expected_unit => {}
        _ => {
            return Err(TimeseriesError::UnitMismatch {
                expected: expected_unit.column_header(),
                found: value_header.to_string(),
            })
        }
    }

    let mut points = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 1; // 1-based over data rows
        let record = record.map_err(|e| TimeseriesError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(TimeseriesError::MalformedRow {
                row,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(record.get(0).unwrap())
            .map_err(|message| TimeseriesError::MalformedRow { row, message })?;
        let value: f64 =
            record
                .get(1)
                .unwrap()
                .parse()
                .map_err(|e| TimeseriesError::MalformedRow {
                    row,
                    message: format!("bad value: {e}"),
                })?;
        if !value.is_finite() {
            return Err(TimeseriesError::MalformedRow {
                row,
                message: format!("non-finite value {value}"),
            });
        }
        if expected_unit == Unit::Megawatt && value < 0.0 {
            return Err(TimeseriesError::NegativeLoad { row, value });
        }
        if let Some(prev) = points.last() {
            let prev: &TimePoint = prev;
            if timestamp <= prev.timestamp {
                return Err(TimeseriesError::NonMonotonicTimestamp { row, timestamp });
            }
        }
        points.push(TimePoint { timestamp, value });
    }

    HourlySeries::new(points, expected_unit)
}

fn parse_timestamp(text: &str) -> Result<NaiveDateTime, String> {
    let ts = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M")
        .map_err(|e| format!("bad timestamp `{text}`: {e}"))?;
    if ts.minute() != 0 || ts.second() != 0 {
        return Err(format!("timestamp `{text}` is not on the hour"));
    }
    Ok(ts)
}

/// Write a series back to its CSV schema. Values are emitted with Rust's
/// shortest round-trip float formatting, so `parse(serialize(s)) == s`.
pub fn serialize_series<W: Write>(
    series: &HourlySeries,
    mut writer: W,
) -> Result<(), TimeseriesError> {
    writeln!(writer, "timestamp,{}", series.unit().column_header())?;
    for p in series.points() {
        writeln!(
            writer,
            "{},{}",
            p.timestamp.format("%Y-%m-%dT%H:%M"),
            p.value
        )?;
    }
    Ok(())
}

/// Partition a series into complete calendar months. Any month that is
/// present but missing hours is an error naming the month and the count.
pub fn split_months(series: &HourlySeries) -> Result<Vec<MonthSlice>, TimeseriesError> {
    if series.is_empty() {
        return Err(TimeseriesError::EmptySeries);
    }
    let mut slices = Vec::new();
    let mut current: Vec<TimePoint> = Vec::new();
    let mut current_key: Option<(i32, u32)> = None;

    for p in series.points() {
        let key = (p.timestamp.year(), p.timestamp.month());
        if current_key != Some(key) {
            if let Some((y, m)) = current_key {
                slices.push(MonthSlice::new(y, m, std::mem::take(&mut current))?);
            }
            current_key = Some(key);
        }
        current.push(*p);
    }
    if let Some((y, m)) = current_key {
        slices.push(MonthSlice::new(y, m, current)?);
    }
    Ok(slices)
}

/// A month skipped by [`split_months_lenient`] because hours were missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedMonth {
    pub year: i32,
    pub month: u32,
    pub missing: usize,
}

/// Like [`split_months`] but incomplete months are skipped and reported
/// instead of failing the whole series. Used for price statistics, where a
/// partial month should produce a warning record rather than abort a run.
pub fn split_months_lenient(series: &HourlySeries) -> (Vec<MonthSlice>, Vec<SkippedMonth>) {
    let mut slices = Vec::new();
    let mut skipped = Vec::new();
    let mut current: Vec<TimePoint> = Vec::new();
    let mut current_key: Option<(i32, u32)> = None;

    let flush = |key: Option<(i32, u32)>,
                 points: Vec<TimePoint>,
                 slices: &mut Vec<MonthSlice>,
                 skipped: &mut Vec<SkippedMonth>| {
        if let Some((y, m)) = key {
            match MonthSlice::new(y, m, points) {
                Ok(slice) => slices.push(slice),
                Err(TimeseriesError::IncompleteMonth {
                    year,
                    month,
                    missing,
                }) => skipped.push(SkippedMonth {
                    year,
                    month,
                    missing,
                }),
                // Points grouped from a validated series cannot trip the
                // other constructor checks.
                Err(_) => unreachable!("validated series produced invalid month group"),
            }
        }
    };

    for p in series.points() {
        let key = (p.timestamp.year(), p.timestamp.month());
        if current_key != Some(key) {
            flush(
                current_key,
                std::mem::take(&mut current),
                &mut slices,
                &mut skipped,
            );
            current_key = Some(key);
        }
        current.push(*p);
    }
    flush(current_key, current, &mut slices, &mut skipped);
    (slices, skipped)
}
