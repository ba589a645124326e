//! Core data model: units, time indices, outcome panels, treatment
//! schedules, and adoption cohorts.
//!
//! Time is an integer day offset. In [`TimeMode::Calendar`] the offset counts
//! days on a fixed common axis (convertible to/from `NaiveDate`); in
//! [`TimeMode::CaseTime`] it counts days since each unit crossed the case
//! threshold, so offsets may be negative. Mixing modes is a contract
//! violation and is rejected wherever two containers are joined.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Float;

/// Opaque unit identifier (e.g. a state name). Non-empty, unique per dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct UnitId(String);

impl UnitId {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(Error::EmptyInput("unit label".into()));
        }
        Ok(UnitId(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// How integer time offsets are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeMode {
    /// Days on the calendar axis; convertible to dates.
    Calendar,
    /// Days since the unit-specific threshold crossing; may be negative.
    CaseTime,
}

impl TimeMode {
    pub fn label(self) -> &'static str {
        match self {
            TimeMode::Calendar => "calendar",
            TimeMode::CaseTime => "case",
        }
    }
}

/// Calendar date -> day offset on the common calendar axis.
pub fn date_to_day(d: NaiveDate) -> i64 {
    d.num_days_from_ce() as i64
}

/// Day offset on the common calendar axis -> calendar date.
pub fn day_to_date(t: i64) -> Option<NaiveDate> {
    NaiveDate::from_num_days_from_ce_opt(t as i32)
}

/// A single (unit, time, value) outcome measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<F> {
    pub unit: UnitId,
    pub time: i64,
    pub value: F,
}

/// Rectangular unit x time outcome data with missingness (absent keys).
///
/// At most one observation per (unit, time); all values finite. Units may be
/// present with zero observations (e.g. a transform produced nothing for
/// them) so that exclusion reporting can see them.
#[derive(Debug, Clone)]
pub struct PanelDataset<F> {
    time_mode: TimeMode,
    outcome_label: String,
    data: BTreeMap<UnitId, BTreeMap<i64, F>>,
}

impl<F: Float> PanelDataset<F> {
    pub fn new(time_mode: TimeMode, outcome_label: impl Into<String>) -> Self {
        PanelDataset { time_mode, outcome_label: outcome_label.into(), data: BTreeMap::new() }
    }

    pub fn from_observations(
        time_mode: TimeMode,
        outcome_label: impl Into<String>,
        observations: impl IntoIterator<Item = Observation<F>>,
    ) -> Result<Self> {
        let mut panel = Self::new(time_mode, outcome_label);
        for obs in observations {
            panel.insert(obs.unit, obs.time, obs.value)?;
        }
        Ok(panel)
    }

    /// Inserts one observation; rejects duplicates and non-finite values.
    pub fn insert(&mut self, unit: UnitId, time: i64, value: F) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite { unit, time });
        }
        let series = self.data.entry(unit.clone()).or_default();
        if series.insert(time, value).is_some() {
            return Err(Error::DuplicateObservation { unit, time: time.to_string() });
        }
        Ok(())
    }

    /// Registers a unit without observations (kept for reporting).
    pub fn ensure_unit(&mut self, unit: UnitId) {
        self.data.entry(unit).or_default();
    }

    pub fn time_mode(&self) -> TimeMode {
        self.time_mode
    }

    pub fn outcome_label(&self) -> &str {
        &self.outcome_label
    }

    pub fn value(&self, unit: &UnitId, time: i64) -> Option<F> {
        self.data.get(unit).and_then(|s| s.get(&time)).copied()
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitId> {
        self.data.keys()
    }

    pub fn n_units(&self) -> usize {
        self.data.len()
    }

    pub fn n_observations(&self) -> usize {
        self.data.values().map(|s| s.len()).sum()
    }

    pub fn unit_series(&self, unit: &UnitId) -> Option<&BTreeMap<i64, F>> {
        self.data.get(unit)
    }

    /// Units registered in the panel that carry zero observations.
    pub fn units_without_observations(&self) -> Vec<UnitId> {
        self.data.iter().filter(|(_, s)| s.is_empty()).map(|(u, _)| u.clone()).collect()
    }

    /// Iterates all observations in (unit, time) order.
    pub fn observations(&self) -> impl Iterator<Item = (&UnitId, i64, F)> + '_ {
        self.data.iter().flat_map(|(u, s)| s.iter().map(move |(&t, &v)| (u, t, v)))
    }

    /// Observed time span across all units, if any observation exists.
    pub fn time_range(&self) -> Option<(i64, i64)> {
        let mut range: Option<(i64, i64)> = None;
        for series in self.data.values() {
            if let (Some((&lo, _)), Some((&hi, _))) =
                (series.first_key_value(), series.last_key_value())
            {
                range = Some(match range {
                    None => (lo, hi),
                    Some((a, b)) => (a.min(lo), b.max(hi)),
                });
            }
        }
        range
    }

    /// Applies `f` to every stored value (test and simulation support).
    pub fn map_values(&self, f: impl Fn(&UnitId, i64, F) -> F) -> Result<Self> {
        let mut out = Self::new(self.time_mode, self.outcome_label.clone());
        for (u, series) in &self.data {
            out.ensure_unit(u.clone());
            for (&t, &v) in series {
                out.insert(u.clone(), t, f(u, t, v))?;
            }
        }
        Ok(out)
    }
}

/// Per-unit adoption time; `None` is never-treated.
#[derive(Debug, Clone)]
pub struct TreatmentSchedule {
    time_mode: TimeMode,
    adoption: BTreeMap<UnitId, Option<i64>>,
}

impl TreatmentSchedule {
    pub fn new(time_mode: TimeMode) -> Self {
        TreatmentSchedule { time_mode, adoption: BTreeMap::new() }
    }

    pub fn insert(&mut self, unit: UnitId, adoption: Option<i64>) -> Result<()> {
        if self.adoption.insert(unit.clone(), adoption).is_some() {
            return Err(Error::DuplicateUnit(unit));
        }
        Ok(())
    }

    pub fn time_mode(&self) -> TimeMode {
        self.time_mode
    }

    pub fn adoption(&self, unit: &UnitId) -> Option<Option<i64>> {
        self.adoption.get(unit).copied()
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitId> {
        self.adoption.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&UnitId, Option<i64>)> + '_ {
        self.adoption.iter().map(|(u, &a)| (u, a))
    }

    pub fn len(&self) -> usize {
        self.adoption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adoption.is_empty()
    }

    /// Checks the mode matches a panel's before the two are joined.
    pub fn check_mode(&self, panel_mode: TimeMode) -> Result<()> {
        if self.time_mode != panel_mode {
            return Err(Error::TimeModeMismatch(format!(
                "schedule is {} but panel is {}",
                self.time_mode.label(),
                panel_mode.label()
            )));
        }
        Ok(())
    }

    /// Every panel unit must have a schedule entry; silent defaults would
    /// fabricate comparison units.
    pub fn check_covers<F: Float>(&self, panel: &PanelDataset<F>) -> Result<()> {
        self.check_mode(panel.time_mode())?;
        let missing: Vec<UnitId> =
            panel.units().filter(|u| !self.adoption.contains_key(u)).cloned().collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingUnits(missing))
        }
    }

    /// Restricts the schedule to the given units.
    pub fn retain_units(&self, keep: &BTreeSet<UnitId>) -> TreatmentSchedule {
        TreatmentSchedule {
            time_mode: self.time_mode,
            adoption: self
                .adoption
                .iter()
                .filter(|(u, _)| keep.contains(*u))
                .map(|(u, &a)| (u.clone(), a))
                .collect(),
        }
    }
}

/// Which units serve as comparisons for a treated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComparisonPolicy {
    /// Only units that never adopt (the default).
    NeverTreated,
    /// Never-treated plus units that have not yet adopted at the evaluated
    /// time; resolved per (cohort, event time) by the estimators.
    NotYetTreated,
}

impl ComparisonPolicy {
    pub fn label(self) -> &'static str {
        match self {
            ComparisonPolicy::NeverTreated => "never-treated",
            ComparisonPolicy::NotYetTreated => "not-yet-treated",
        }
    }
}

/// One adoption-date cohort.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub adoption: i64,
    /// Sorted, non-empty, disjoint from every other cohort.
    pub members: Vec<UnitId>,
}

impl Cohort {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Partition of treated units into cohorts plus the comparison pool.
#[derive(Debug, Clone)]
pub struct CohortSet {
    pub cohorts: Vec<Cohort>,
    pub comparison_pool: BTreeSet<UnitId>,
    pub policy: ComparisonPolicy,
    time_mode: TimeMode,
}

impl CohortSet {
    pub fn time_mode(&self) -> TimeMode {
        self.time_mode
    }

    pub fn n_treated(&self) -> usize {
        self.cohorts.iter().map(Cohort::size).sum()
    }

    pub fn cohort_at(&self, adoption: i64) -> Option<&Cohort> {
        self.cohorts.iter().find(|c| c.adoption == adoption)
    }
}

/// Groups treated units into adoption-date cohorts; never-treated units form
/// the comparison pool. Deterministic: cohorts sorted by adoption time,
/// members sorted by label.
pub fn build_cohorts(schedule: &TreatmentSchedule, policy: ComparisonPolicy) -> Result<CohortSet> {
    if schedule.is_empty() {
        return Err(Error::EmptyInput("treatment schedule".into()));
    }
    let mut by_adoption: BTreeMap<i64, Vec<UnitId>> = BTreeMap::new();
    let mut pool = BTreeSet::new();
    for (unit, adoption) in schedule.entries() {
        match adoption {
            Some(t) => by_adoption.entry(t).or_default().push(unit.clone()),
            None => {
                pool.insert(unit.clone());
            }
        }
    }
    if by_adoption.is_empty() {
        return Err(Error::NoTreatedUnits);
    }
    if policy == ComparisonPolicy::NeverTreated && pool.is_empty() {
        return Err(Error::EmptyComparisonPool);
    }
    let cohorts = by_adoption
        .into_iter()
        .map(|(adoption, mut members)| {
            members.sort();
            Cohort { adoption, members }
        })
        .collect();
    Ok(CohortSet { cohorts, comparison_pool: pool, policy, time_mode: schedule.time_mode() })
}
