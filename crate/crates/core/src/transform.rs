//! Outcome transforms and the case-time re-indexing.
//!
//! Undefined points (logs of zero counts, growth across date gaps) are
//! emitted as missing, never as sentinel values; estimators downstream
//! handle missingness anyway.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::RawCaseSeries;
use crate::panel::{date_to_day, PanelDataset, TimeMode, TreatmentSchedule, UnitId};
use crate::scalar::Float;

/// Outcome scale for a panel built from cumulative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    /// Natural log of the cumulative count; defined where count >= 1.
    LogCases,
    /// Day-over-day log-ratio ln(c_t / c_{t-1}); defined where both
    /// consecutive counts are >= 1 and the dates are adjacent.
    LogGrowth,
    /// The cumulative count itself.
    RawCases,
    /// Day-over-day difference c_t - c_{t-1} for adjacent dates.
    RawGrowth,
}

impl OutcomeKind {
    pub fn label(self) -> &'static str {
        match self {
            OutcomeKind::LogCases => "log-cases",
            OutcomeKind::LogGrowth => "log-growth",
            OutcomeKind::RawCases => "raw-cases",
            OutcomeKind::RawGrowth => "raw-growth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "log-cases" => Ok(OutcomeKind::LogCases),
            "log-growth" => Ok(OutcomeKind::LogGrowth),
            "raw-cases" => Ok(OutcomeKind::RawCases),
            "raw-growth" => Ok(OutcomeKind::RawGrowth),
            other => Err(Error::Config(format!(
                "unknown outcome {other:?}; expected log-cases, log-growth, raw-cases or raw-growth"
            ))),
        }
    }
}

/// Outcome transform plus the case-time threshold used with it.
#[derive(Debug, Clone, Copy)]
pub struct OutcomeSpec {
    pub kind: OutcomeKind,
    pub min_count_threshold: u64,
}

impl OutcomeSpec {
    pub fn new(kind: OutcomeKind, min_count_threshold: u64) -> Result<Self> {
        if min_count_threshold < 1 {
            return Err(Error::Config("min_count_threshold must be >= 1".into()));
        }
        Ok(OutcomeSpec { kind, min_count_threshold })
    }
}

impl Default for OutcomeSpec {
    fn default() -> Self {
        OutcomeSpec { kind: OutcomeKind::LogGrowth, min_count_threshold: 10 }
    }
}

/// Builds a calendar-mode panel on the requested outcome scale.
///
/// Units whose series yields no defined value are retained with zero
/// observations; `PanelDataset::units_without_observations` surfaces them
/// for the exclusion report.
pub fn transform_outcome<F: Float>(
    series: &[RawCaseSeries],
    spec: &OutcomeSpec,
) -> Result<PanelDataset<F>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("no case series to transform".into()));
    }
    let mut panel = PanelDataset::new(TimeMode::Calendar, spec.kind.label());
    for s in series {
        panel.ensure_unit(s.unit.clone());
        match spec.kind {
            OutcomeKind::LogCases => {
                for &(date, count) in &s.entries {
                    if count >= 1 {
                        let v = F::from_u64(count).expect("count").ln();
                        panel.insert(s.unit.clone(), date_to_day(date), v)?;
                    }
                }
            }
            OutcomeKind::RawCases => {
                for &(date, count) in &s.entries {
                    let v = F::from_u64(count).expect("count");
                    panel.insert(s.unit.clone(), date_to_day(date), v)?;
                }
            }
            OutcomeKind::LogGrowth => {
                for w in s.entries.windows(2) {
                    let (d0, c0) = w[0];
                    let (d1, c1) = w[1];
                    if d1 == d0.succ_opt().expect("date overflow") && c0 >= 1 && c1 >= 1 {
                        let v = (F::from_u64(c1).expect("count") / F::from_u64(c0).expect("count"))
                            .ln();
                        panel.insert(s.unit.clone(), date_to_day(d1), v)?;
                    }
                }
            }
            OutcomeKind::RawGrowth => {
                for w in s.entries.windows(2) {
                    let (d0, c0) = w[0];
                    let (d1, c1) = w[1];
                    if d1 == d0.succ_opt().expect("date overflow") {
                        let v = F::from_i64(c1 as i64 - c0 as i64).expect("count diff");
                        panel.insert(s.unit.clone(), date_to_day(d1), v)?;
                    }
                }
            }
        }
    }
    Ok(panel)
}

/// A unit dropped during case-time conversion, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct Exclusion {
    pub unit: UnitId,
    pub reason: String,
}

/// Result of re-indexing a panel and schedule into case time.
#[derive(Debug, Clone)]
pub struct CaseTimeResult<F> {
    pub panel: PanelDataset<F>,
    pub schedule: TreatmentSchedule,
    /// Day-offset of each retained unit's threshold crossing on the
    /// calendar axis (its case-time origin).
    pub origins: BTreeMap<UnitId, i64>,
    pub excluded: Vec<Exclusion>,
}

/// Re-expresses a calendar panel and schedule in case time: for each unit,
/// t = 0 is the first calendar date whose cumulative count reached
/// `threshold`. Units never reaching the threshold are excluded and listed.
pub fn to_case_time<F: Float>(
    panel: &PanelDataset<F>,
    raw: &[RawCaseSeries],
    schedule: &TreatmentSchedule,
    threshold: u64,
) -> Result<CaseTimeResult<F>> {
    schedule.check_mode(panel.time_mode())?;
    if panel.time_mode() != TimeMode::Calendar {
        return Err(Error::TimeModeMismatch("case-time conversion needs a calendar panel".into()));
    }
    if threshold < 1 {
        return Err(Error::Config("case threshold must be >= 1".into()));
    }
    let by_unit: BTreeMap<&UnitId, &RawCaseSeries> = raw.iter().map(|s| (&s.unit, s)).collect();

    let mut out = PanelDataset::new(TimeMode::CaseTime, panel.outcome_label());
    let mut out_schedule = TreatmentSchedule::new(TimeMode::CaseTime);
    let mut origins = BTreeMap::new();
    let mut excluded = Vec::new();

    for unit in panel.units() {
        let series = by_unit
            .get(unit)
            .copied()
            .ok_or_else(|| Error::MissingSeries(unit.clone()))?;
        let crossing: Option<NaiveDate> = series.first_crossing(threshold);
        let origin = match crossing {
            Some(d) => date_to_day(d),
            None => {
                let peak = series.entries.iter().map(|(_, c)| *c).max().unwrap_or(0);
                excluded.push(Exclusion {
                    unit: unit.clone(),
                    reason: format!(
                        "cumulative count never reached {threshold} (max {peak})"
                    ),
                });
                continue;
            }
        };
        origins.insert(unit.clone(), origin);
        out.ensure_unit(unit.clone());
        if let Some(values) = panel.unit_series(unit) {
            for (&t, &v) in values {
                out.insert(unit.clone(), t - origin, v)?;
            }
        }
        if let Some(adoption) = schedule.adoption(unit) {
            out_schedule.insert(unit.clone(), adoption.map(|a| a - origin))?;
        }
    }

    Ok(CaseTimeResult { panel: out, schedule: out_schedule, origins, excluded })
}

/// Converts a log-scale value to a growth fraction: exp(x) - 1.
/// Callers multiply by 100 to format as percent.
pub fn log_to_percent<F: Float>(x: F) -> F {
    x.exp() - F::one()
}
