//! Parsers for the raw input files.
//!
//! Two formats come in:
//!   - cases CSV, header `date,state,cases`: ISO-8601 dates and cumulative
//!     confirmed counts, one row per (state, day);
//!   - policy CSV, header `state,order_date`: one row per state, an empty
//!     date meaning the state never adopted the policy.
//!
//! A third schema, `unit,time,value` with integer times, round-trips
//! simulated panels.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel::{date_to_day, Observation, PanelDataset, TimeMode, TreatmentSchedule, UnitId};
use crate::scalar::Float;

/// Date-ordered cumulative counts for one unit.
///
/// Dates are strictly increasing. Counts are not assumed non-decreasing
/// (upstream revisions do happen); [`RawCaseSeries::revisions`] lists the
/// decreases so callers can flag them.
#[derive(Debug, Clone)]
pub struct RawCaseSeries {
    pub unit: UnitId,
    pub entries: Vec<(NaiveDate, u64)>,
}

impl RawCaseSeries {
    /// Dates on which the cumulative count dropped below the previous entry.
    pub fn revisions(&self) -> Vec<NaiveDate> {
        self.entries
            .windows(2)
            .filter(|w| w[1].1 < w[0].1)
            .map(|w| w[1].0)
            .collect()
    }

    /// First date on which the cumulative count reached `threshold`.
    pub fn first_crossing(&self, threshold: u64) -> Option<NaiveDate> {
        self.entries.iter().find(|(_, c)| *c >= threshold).map(|(d, _)| *d)
    }
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| Error::Parse {
        line,
        message: format!("expected ISO-8601 date (YYYY-MM-DD), got {s:?}"),
    })
}

/// Parses a cases CSV (`date,state,cases`) into one series per unit.
///
/// Gaps in dates are permitted and preserved as missing. Rows may arrive in
/// any order; output series are date-sorted and units label-sorted.
pub fn parse_cases(reader: impl Read) -> Result<Vec<RawCaseSeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let expected = ["date", "state", "cases"];
        let got: Vec<_> = headers.iter().map(str::trim).collect();
        if got != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `date,state,cases`, got {:?}", got.join(",")),
            });
        }
    }

    let mut by_unit: BTreeMap<UnitId, BTreeMap<NaiveDate, u64>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let date = parse_date(&record[0], line)?;
        let unit = UnitId::new(record[1].trim())
            .map_err(|_| Error::Parse { line, message: "empty state name".into() })?;
        let count: i64 = record[2].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected integer count, got {:?}", &record[2]),
        })?;
        if count < 0 {
            return Err(Error::InvalidCount { unit: unit.to_string(), line, value: count });
        }
        let series = by_unit.entry(unit.clone()).or_default();
        if series.insert(date, count as u64).is_some() {
            return Err(Error::DuplicateObservation { unit, time: date.to_string() });
        }
    }

    Ok(by_unit
        .into_iter()
        .map(|(unit, entries)| RawCaseSeries { unit, entries: entries.into_iter().collect() })
        .collect())
}

/// Parses a policy CSV (`state,order_date`) into a calendar-mode schedule.
/// An empty `order_date` field marks the unit never-treated.
pub fn parse_policy(reader: impl Read) -> Result<TreatmentSchedule> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let got: Vec<_> = headers.iter().map(str::trim).collect();
        if got != ["state", "order_date"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `state,order_date`, got {:?}", got.join(",")),
            });
        }
    }

    let mut schedule = TreatmentSchedule::new(TimeMode::Calendar);
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let unit = UnitId::new(record.get(0).unwrap_or("").trim())
            .map_err(|_| Error::Parse { line, message: "empty state name".into() })?;
        let raw_date = record.get(1).unwrap_or("").trim();
        let adoption = if raw_date.is_empty() {
            None
        } else {
            Some(date_to_day(parse_date(raw_date, line)?))
        };
        schedule.insert(unit, adoption)?;
    }
    if schedule.is_empty() {
        return Err(Error::EmptyInput("policy file has no rows".into()));
    }
    Ok(schedule)
}

/// Writes a panel as `unit,time,value` rows, unit- then time-sorted.
pub fn write_panel_csv<F: Float>(panel: &PanelDataset<F>, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "unit,time,value")?;
    for (unit, t, v) in panel.observations() {
        writeln!(w, "{unit},{t},{v}")?;
    }
    Ok(())
}

/// Reads a `unit,time,value` panel written by [`write_panel_csv`].
pub fn read_panel_csv<F: Float>(
    reader: impl Read,
    time_mode: TimeMode,
    outcome_label: &str,
) -> Result<PanelDataset<F>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let unit = UnitId::new(record[0].trim())
            .map_err(|_| Error::Parse { line, message: "empty unit".into() })?;
        let time: i64 = record[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected integer time, got {:?}", &record[1]),
        })?;
        let value: f64 = record[2].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected numeric value, got {:?}", &record[2]),
        })?;
        observations.push(Observation { unit, time, value: F::from_f64_lossy(value) });
    }
    PanelDataset::from_observations(time_mode, outcome_label, observations)
}
