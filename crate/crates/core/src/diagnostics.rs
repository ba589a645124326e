//! Parallel-trends diagnostics and adoption-timing summaries.
//!
//! The placebo screening here is descriptive: it summarizes how far the
//! pre-treatment estimates sit from zero but renders no verdict, and no
//! pre-test gates estimation. Near-zero placebos are a proxy check, not a
//! guarantee — the identifying assumption concerns counterfactual trends
//! the data cannot show, and low power does not validate it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::EventStudyEstimate;
use crate::panel::{TreatmentSchedule, UnitId};
use crate::scalar::Float;
use crate::transform::Exclusion;

/// One pre-treatment estimate with its t-like ratio.
#[derive(Debug, Clone, Serialize)]
pub struct PlaceboRow<F> {
    pub event_time: i64,
    pub estimate: F,
    pub se: Option<F>,
    /// estimate / se where the standard error is available and positive.
    pub ratio: Option<F>,
}

/// Summary of the placebo (k < 0) estimates, excluding the reference period.
#[derive(Debug, Clone, Serialize)]
pub struct PreTrendReport<F> {
    pub reference_offset: i64,
    pub rows: Vec<PlaceboRow<F>>,
    pub max_abs_placebo: F,
    /// How many placebo ratios exceed 2 in absolute value.
    pub n_large: usize,
    /// Unweighted least-squares slope of estimate on event time; absent
    /// with fewer than two placebo points.
    pub fitted_pre_slope: Option<F>,
}

/// Builds the pre-trend report from aggregated event-study estimates.
/// Only k < 0 rows other than the reference period are read.
pub fn pretrend_report<F: Float>(
    estimates: &[EventStudyEstimate<F>],
    reference_offset: i64,
) -> Result<PreTrendReport<F>> {
    let rows: Vec<PlaceboRow<F>> = estimates
        .iter()
        .filter(|e| e.event_time < 0 && e.event_time != reference_offset)
        .map(|e| PlaceboRow {
            event_time: e.event_time,
            estimate: e.estimate,
            se: e.se,
            ratio: e.se.filter(|s| *s > F::zero()).map(|s| e.estimate / s),
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::NoData("no placebo estimates".into()));
    }

    let max_abs_placebo = rows
        .iter()
        .map(|r| r.estimate.abs())
        .fold(F::zero(), |a, b| if b > a { b } else { a });
    let n_large = rows
        .iter()
        .filter(|r| r.ratio.is_some_and(|t| t.abs() > F::from_f64_lossy(2.0)))
        .count();

    let fitted_pre_slope = if rows.len() >= 2 {
        let n = F::from_count(rows.len());
        let kbar = rows.iter().map(|r| F::from_i64(r.event_time).expect("k")).sum::<F>() / n;
        let ybar = rows.iter().map(|r| r.estimate).sum::<F>() / n;
        let mut num = F::zero();
        let mut den = F::zero();
        for r in &rows {
            let dk = F::from_i64(r.event_time).expect("k") - kbar;
            num = num + dk * (r.estimate - ybar);
            den = den + dk * dk;
        }
        Some(num / den)
    } else {
        None
    };

    Ok(PreTrendReport { reference_offset, rows, max_abs_placebo, n_large, fitted_pre_slope })
}

/// Case-time adoption status of one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CaseTimeStatus {
    /// Adopted this many days after the unit's threshold crossing.
    Adopted(i64),
    /// In the case-time panel but never treated.
    Never,
    /// Dropped during case-time conversion, with the reason.
    Excluded(String),
}

/// One row of the adoption-timing table.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub unit: UnitId,
    /// Calendar adoption day, `None` for never-treated.
    pub calendar: Option<i64>,
    pub case_time: CaseTimeStatus,
}

/// Sort key for the timing table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingOrder {
    ByCalendar,
    ByCaseTime,
}

/// Per-unit adoption timing in both modes; one row per policy unit.
#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub rows: Vec<TimingRow>,
}

/// Joins the calendar and case-time schedules derived from one policy input
/// into a per-unit table, ordered by the requested key (never-treated and
/// excluded units sort last, by label).
pub fn timing_summary(
    schedule_calendar: &TreatmentSchedule,
    schedule_casetime: &TreatmentSchedule,
    exclusions: &[Exclusion],
    order: TimingOrder,
) -> TimingSummary {
    let mut rows: Vec<TimingRow> = schedule_calendar
        .entries()
        .map(|(unit, calendar)| {
            let case_time = if let Some(x) = exclusions.iter().find(|e| &e.unit == unit) {
                CaseTimeStatus::Excluded(x.reason.clone())
            } else {
                match schedule_casetime.adoption(unit) {
                    Some(Some(t)) => CaseTimeStatus::Adopted(t),
                    Some(None) => CaseTimeStatus::Never,
                    None => CaseTimeStatus::Excluded("no case data".into()),
                }
            };
            TimingRow { unit: unit.clone(), calendar, case_time }
        })
        .collect();

    rows.sort_by(|a, b| {
        let key = |r: &TimingRow| match order {
            TimingOrder::ByCalendar => (r.calendar.is_none(), r.calendar.unwrap_or(i64::MAX)),
            TimingOrder::ByCaseTime => match r.case_time {
                CaseTimeStatus::Adopted(t) => (false, t),
                _ => (true, i64::MAX),
            },
        };
        key(a).cmp(&key(b)).then_with(|| a.unit.cmp(&b.unit))
    });
    TimingSummary { rows }
}
