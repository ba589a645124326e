//! The difference-in-differences estimators: 2x2 contrasts, per-cohort
//! event studies, cohort-weighted aggregation, and the overall ATT.
//!
//! Cell means pool observation-level values: each defined (unit, day)
//! carries equal weight. With balanced panels this coincides with averaging
//! per-unit means; with missingness it uses all data, and cell counts are
//! reported so users can see where the cells are thin.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{Cohort, CohortSet, ComparisonPolicy, PanelDataset, UnitId};
use crate::scalar::Float;

/// Pre/post estimation windows for a single 2x2 trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialWindow {
    pub pre_start: i64,
    pub pre_end: i64,
    pub post_start: i64,
    pub post_end: i64,
    pub reference_offset: i64,
}

impl TrialWindow {
    pub fn new(
        pre_start: i64,
        pre_end: i64,
        post_start: i64,
        post_end: i64,
        reference_offset: i64,
    ) -> Result<Self> {
        if !(pre_start <= pre_end && pre_end < post_start && post_start <= post_end) {
            return Err(Error::Config(format!(
                "window must satisfy pre_start <= pre_end < post_start <= post_end, \
                 got {pre_start}..{pre_end} / {post_start}..{post_end}"
            )));
        }
        if reference_offset >= 0 {
            return Err(Error::Config("reference offset must be negative".into()));
        }
        Ok(TrialWindow { pre_start, pre_end, post_start, post_end, reference_offset })
    }
}

/// Observation counts for the four cells of a 2x2 contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub treated_pre: usize,
    pub treated_post: usize,
    pub comparison_pre: usize,
    pub comparison_post: usize,
}

/// A single 2x2 difference-in-differences contrast.
#[derive(Debug, Clone, Serialize)]
pub struct TwoByTwo<F> {
    pub treated_pre: F,
    pub treated_post: F,
    pub comparison_pre: F,
    pub comparison_post: F,
    /// (treated_post - treated_pre) - (comparison_post - comparison_pre)
    pub did: F,
    pub counts: CellCounts,
}

/// One event-time row of a cohort's event study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventCell<F> {
    pub event_time: i64,
    pub estimate: F,
    /// Cohort units with a defined observation at this event time.
    pub n_treated: usize,
    /// Comparison units with a defined observation at this event time.
    pub n_comparison: usize,
}

/// A (cohort, event-time) estimate suppressed by the cell-size threshold.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedCell {
    pub event_time: i64,
    pub cell: String,
    pub count: usize,
}

/// Event-study estimates for one adoption cohort, relative to its own
/// reference period.
#[derive(Debug, Clone)]
pub struct CohortEventStudy<F> {
    pub adoption: i64,
    /// Number of treated units in the cohort (the aggregation weight).
    pub cohort_size: usize,
    pub reference_offset: i64,
    /// Rows sorted by event time; the row at the reference offset is 0.
    pub cells: Vec<EventCell<F>>,
    /// Event times with some data where a cell fell below the threshold.
    pub skipped: Vec<SkippedCell>,
}

impl<F: Float> CohortEventStudy<F> {
    pub fn cell_at(&self, k: i64) -> Option<&EventCell<F>> {
        self.cells.iter().find(|c| c.event_time == k)
    }
}

/// A cohort-aggregated event-study estimate at one event time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventStudyEstimate<F> {
    pub event_time: i64,
    pub estimate: F,
    /// Jackknife standard error; absent until attached, or when inference
    /// is unavailable at this event time.
    pub se: Option<F>,
    pub n_cohorts: usize,
    /// Total treated units across contributing cohorts.
    pub n_treated: usize,
    /// True for pre-treatment event times (k < 0).
    pub placebo: bool,
}

/// Estimation options shared by the event-study pipeline.
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Event time whose contrast is normalized to zero; must be negative.
    pub reference_offset: i64,
    /// Optional truncation of the event-time range (inclusive).
    pub k_range: Option<(i64, i64)>,
    /// Minimum observations per cell; cells below it are suppressed.
    pub min_cell_size: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { reference_offset: -1, k_range: None, min_cell_size: 1 }
    }
}

impl EstimateOptions {
    pub fn validate(&self) -> Result<()> {
        if self.reference_offset >= 0 {
            return Err(Error::Config("reference offset must be negative".into()));
        }
        if self.min_cell_size < 1 {
            return Err(Error::Config("min cell size must be >= 1".into()));
        }
        if let Some((lo, hi)) = self.k_range {
            if lo > hi {
                return Err(Error::Config(format!("empty event-time range {lo}..{hi}")));
            }
        }
        Ok(())
    }
}

/// Resolves the comparison units for a cohort at an event time.
///
/// Under `NeverTreated` the set is the fixed never-treated pool. Under
/// `NotYetTreated` it additionally includes treated units whose adoption
/// lies strictly after the evaluated time and after the cohort's own
/// adoption, so a comparison unit is untreated at both periods entering the
/// contrast and the cohort never serves as its own comparison.
#[derive(Debug, Clone)]
pub struct ComparisonResolver {
    policy: ComparisonPolicy,
    pool: BTreeSet<UnitId>,
    adoptions: Vec<(i64, UnitId)>,
}

impl ComparisonResolver {
    pub fn from_cohorts(set: &CohortSet) -> Self {
        let mut adoptions = Vec::new();
        for cohort in &set.cohorts {
            for unit in &cohort.members {
                adoptions.push((cohort.adoption, unit.clone()));
            }
        }
        ComparisonResolver { policy: set.policy, pool: set.comparison_pool.clone(), adoptions }
    }

    pub fn policy(&self) -> ComparisonPolicy {
        self.policy
    }

    pub fn units_at(&self, cohort_adoption: i64, k: i64) -> BTreeSet<UnitId> {
        match self.policy {
            ComparisonPolicy::NeverTreated => self.pool.clone(),
            ComparisonPolicy::NotYetTreated => {
                let cutoff = cohort_adoption + k.max(0);
                let mut units = self.pool.clone();
                units.extend(
                    self.adoptions
                        .iter()
                        .filter(|(a, _)| *a > cutoff)
                        .map(|(_, u)| u.clone()),
                );
                units
            }
        }
    }
}

/// Unweighted mean over all defined (unit, time) observations of `units`
/// in the inclusive window, with the observation count.
pub fn mean_outcome<F: Float>(
    panel: &PanelDataset<F>,
    units: &BTreeSet<UnitId>,
    window: (i64, i64),
) -> Result<(F, usize)> {
    let (lo, hi) = window;
    let mut sum = F::zero();
    let mut n = 0usize;
    for unit in units {
        if let Some(series) = panel.unit_series(unit) {
            for (_, &v) in series.range(lo..=hi) {
                sum = sum + v;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoData(format!("no observations in window {lo}..{hi}")));
    }
    Ok((sum / F::from_count(n), n))
}

fn cell_mean<F: Float>(
    panel: &PanelDataset<F>,
    units: &BTreeSet<UnitId>,
    window: (i64, i64),
    cell: &str,
) -> Result<(F, usize)> {
    mean_outcome(panel, units, window).map_err(|_| Error::NoData(cell.to_string()))
}

/// The canonical 2x2 estimator over explicit pre/post windows.
pub fn two_by_two<F: Float>(
    panel: &PanelDataset<F>,
    treated: &BTreeSet<UnitId>,
    comparison: &BTreeSet<UnitId>,
    window: &TrialWindow,
) -> Result<TwoByTwo<F>> {
    let pre = (window.pre_start, window.pre_end);
    let post = (window.post_start, window.post_end);
    let (tp, n_tp) = cell_mean(panel, treated, pre, "treated_pre")?;
    let (tq, n_tq) = cell_mean(panel, treated, post, "treated_post")?;
    let (cp, n_cp) = cell_mean(panel, comparison, pre, "comparison_pre")?;
    let (cq, n_cq) = cell_mean(panel, comparison, post, "comparison_post")?;
    Ok(TwoByTwo {
        treated_pre: tp,
        treated_post: tq,
        comparison_pre: cp,
        comparison_post: cq,
        did: (tq - tp) - (cq - cp),
        counts: CellCounts {
            treated_pre: n_tp,
            treated_post: n_tq,
            comparison_pre: n_cp,
            comparison_post: n_cq,
        },
    })
}

/// Single-event-time DiD for a cohort: contrast at `adoption + k` versus the
/// cohort's reference period. Used by the event-study loop and re-run by the
/// jackknife replicates. `Err(NoData)` marks an empty/thin cell at this k.
pub fn cohort_did_at_k<F: Float>(
    panel: &PanelDataset<F>,
    members: &BTreeSet<UnitId>,
    comparison: &BTreeSet<UnitId>,
    adoption: i64,
    k: i64,
    opts: &EstimateOptions,
) -> Result<EventCell<F>> {
    let at = |t: i64| (t, t);
    let t_eval = adoption + k;
    let t_ref = adoption + opts.reference_offset;
    let (tk, n_tk) = cell_mean(panel, members, at(t_eval), "treated_k")?;
    let (tr, n_tr) = cell_mean(panel, members, at(t_ref), "treated_reference")?;
    let (ck, n_ck) = cell_mean(panel, comparison, at(t_eval), "comparison_k")?;
    let (cr, n_cr) = cell_mean(panel, comparison, at(t_ref), "comparison_reference")?;
    for (n, cell) in [
        (n_tk, "treated_k"),
        (n_tr, "treated_reference"),
        (n_ck, "comparison_k"),
        (n_cr, "comparison_reference"),
    ] {
        if n < opts.min_cell_size {
            return Err(Error::NoData(cell.to_string()));
        }
    }
    Ok(EventCell {
        event_time: k,
        estimate: (tk - tr) - (ck - cr),
        n_treated: n_tk,
        n_comparison: n_ck,
    })
}

/// Event-study estimates for one cohort at every supported event time.
///
/// The event-time range defaults to the full span the panel supports for
/// this cohort, optionally truncated by `opts.k_range`. Event times where a
/// cell is empty or below the size threshold are omitted and recorded in
/// `skipped` (event times entirely outside the data are omitted silently).
pub fn cohort_event_study<F: Float>(
    panel: &PanelDataset<F>,
    cohort: &Cohort,
    resolver: &ComparisonResolver,
    opts: &EstimateOptions,
) -> Result<CohortEventStudy<F>> {
    opts.validate()?;
    let members: BTreeSet<UnitId> = cohort.members.iter().cloned().collect();
    let t_ref = cohort.adoption + opts.reference_offset;

    // The reference period must exist for the cohort itself; without it no
    // contrast is defined at any event time.
    let treated_ref = mean_outcome(panel, &members, (t_ref, t_ref));
    match treated_ref {
        Ok((_, n)) if n >= opts.min_cell_size => {}
        _ => {
            return Err(Error::MissingReference {
                adoption: cohort.adoption,
                offset: opts.reference_offset,
                side: "treated".into(),
            });
        }
    }
    if resolver.policy() == ComparisonPolicy::NeverTreated {
        let comparison = resolver.units_at(cohort.adoption, 0);
        match mean_outcome(panel, &comparison, (t_ref, t_ref)) {
            Ok((_, n)) if n >= opts.min_cell_size => {}
            _ => {
                return Err(Error::MissingReference {
                    adoption: cohort.adoption,
                    offset: opts.reference_offset,
                    side: "comparison".into(),
                });
            }
        }
    }

    let (panel_lo, panel_hi) = panel
        .time_range()
        .ok_or_else(|| Error::EmptyInput("panel has no observations".into()))?;
    let (mut k_lo, mut k_hi) = (panel_lo - cohort.adoption, panel_hi - cohort.adoption);
    if let Some((lo, hi)) = opts.k_range {
        k_lo = k_lo.max(lo);
        k_hi = k_hi.min(hi);
    }

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for k in k_lo..=k_hi {
        let comparison = resolver.units_at(cohort.adoption, k);
        match cohort_did_at_k(panel, &members, &comparison, cohort.adoption, k, opts) {
            Ok(cell) => cells.push(cell),
            Err(Error::NoData(cell)) => {
                // Distinguish suppression from plain out-of-support times:
                // only report when the treated side has data at this k.
                let t_eval = cohort.adoption + k;
                let count_at = |us: &BTreeSet<UnitId>, t: i64| {
                    mean_outcome(panel, us, (t, t)).map(|(_, n)| n).unwrap_or(0)
                };
                let treated_n = count_at(&members, t_eval);
                if treated_n > 0 {
                    let count = match cell.as_str() {
                        "treated_k" => treated_n,
                        "treated_reference" => count_at(&members, t_ref),
                        "comparison_k" => count_at(&comparison, t_eval),
                        _ => count_at(&comparison, t_ref),
                    };
                    skipped.push(SkippedCell { event_time: k, cell, count });
                }
            }
            Err(e) => return Err(e),
        }
    }

    Ok(CohortEventStudy {
        adoption: cohort.adoption,
        cohort_size: cohort.size(),
        reference_offset: opts.reference_offset,
        cells,
        skipped,
    })
}

/// Aggregates per-cohort event studies by event time, weighting each cohort
/// by its number of treated units. Weights are renormalized at each event
/// time over the cohorts observed there, so every aggregate is a convex
/// combination of the contributing cohort estimates.
pub fn aggregate_event_study<F: Float>(
    studies: &[CohortEventStudy<F>],
) -> Vec<EventStudyEstimate<F>> {
    let mut ks: BTreeSet<i64> = BTreeSet::new();
    for study in studies {
        ks.extend(study.cells.iter().map(|c| c.event_time));
    }
    let mut out = Vec::with_capacity(ks.len());
    for k in ks {
        let mut weighted = F::zero();
        let mut total_weight = F::zero();
        let mut n_cohorts = 0usize;
        let mut n_treated = 0usize;
        for study in studies {
            if let Some(cell) = study.cell_at(k) {
                let w = F::from_count(study.cohort_size);
                weighted = weighted + w * cell.estimate;
                total_weight = total_weight + w;
                n_cohorts += 1;
                n_treated += study.cohort_size;
            }
        }
        if n_cohorts == 0 {
            continue;
        }
        out.push(EventStudyEstimate {
            event_time: k,
            estimate: weighted / total_weight,
            se: None,
            n_cohorts,
            n_treated,
            placebo: k < 0,
        });
    }
    out
}

/// Post-period average treatment effect: mean over k >= 0 of the aggregated
/// estimates, weighted by the treated count at each event time.
pub fn overall_att<F: Float>(estimates: &[EventStudyEstimate<F>]) -> Result<F> {
    let mut weighted = F::zero();
    let mut total = F::zero();
    for est in estimates.iter().filter(|e| e.event_time >= 0) {
        let w = F::from_count(est.n_treated);
        weighted = weighted + w * est.estimate;
        total = total + w;
    }
    if total <= F::zero() {
        return Err(Error::NoData("no post-period estimates".into()));
    }
    Ok(weighted / total)
}

/// Per-cohort studies plus their aggregation, the full nested pipeline.
#[derive(Debug, Clone)]
pub struct NestedStudy<F> {
    pub cohort_studies: Vec<CohortEventStudy<F>>,
    pub aggregated: Vec<EventStudyEstimate<F>>,
}

fn check_modes<F: Float>(panel: &PanelDataset<F>, cohorts: &CohortSet) -> Result<()> {
    if cohorts.time_mode() != panel.time_mode() {
        return Err(Error::TimeModeMismatch(format!(
            "cohorts are {} but panel is {}",
            cohorts.time_mode().label(),
            panel.time_mode().label()
        )));
    }
    Ok(())
}

/// Runs the event study for every cohort and aggregates, in adoption order.
pub fn nested_event_study<F: Float>(
    panel: &PanelDataset<F>,
    cohorts: &CohortSet,
    opts: &EstimateOptions,
) -> Result<NestedStudy<F>> {
    check_modes(panel, cohorts)?;
    let resolver = ComparisonResolver::from_cohorts(cohorts);
    let mut studies = Vec::with_capacity(cohorts.cohorts.len());
    for cohort in &cohorts.cohorts {
        studies.push(cohort_event_study(panel, cohort, &resolver, opts)?);
    }
    let aggregated = aggregate_event_study(&studies);
    Ok(NestedStudy { cohort_studies: studies, aggregated })
}

/// Single-trial pipeline: the event study for one cohort, aggregated (a
/// single-cohort aggregation is the identity). Comparisons resolve against
/// the full cohort set, so not-yet-treated pools still see later adopters.
pub fn single_trial_study<F: Float>(
    panel: &PanelDataset<F>,
    cohorts: &CohortSet,
    adoption: i64,
    opts: &EstimateOptions,
) -> Result<NestedStudy<F>> {
    check_modes(panel, cohorts)?;
    let cohort = cohorts
        .cohort_at(adoption)
        .ok_or_else(|| Error::Config(format!("no cohort adopted at {adoption}")))?;
    let resolver = ComparisonResolver::from_cohorts(cohorts);
    let study = cohort_event_study(panel, cohort, &resolver, opts)?;
    let aggregated = aggregate_event_study(std::slice::from_ref(&study));
    Ok(NestedStudy { cohort_studies: vec![study], aggregated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_cohorts, TimeMode, TreatmentSchedule};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn uid(s: &str) -> UnitId {
        UnitId::new(s).unwrap()
    }

    fn units(names: &[&str]) -> BTreeSet<UnitId> {
        names.iter().map(|s| uid(s)).collect()
    }

    fn panel_from(rows: &[(&str, i64, f64)]) -> PanelDataset<f64> {
        let mut p = PanelDataset::new(TimeMode::Calendar, "test");
        for &(u, t, v) in rows {
            p.insert(uid(u), t, v).unwrap();
        }
        p
    }

    #[test]
    fn mean_is_constant_on_constant_panel() {
        let p = panel_from(&[("a", 0, 3.5), ("a", 1, 3.5), ("b", 0, 3.5)]);
        let (m, n) = mean_outcome(&p, &units(&["a", "b"]), (0, 1)).unwrap();
        assert_eq!(m, 3.5);
        assert_eq!(n, 3);
    }

    #[test]
    fn mean_with_no_units_is_nodata() {
        let p = panel_from(&[("a", 0, 1.0)]);
        assert!(matches!(mean_outcome(&p, &units(&[]), (0, 1)), Err(Error::NoData(_))));
    }

    #[test]
    fn mean_pools_observations_not_units() {
        // unit a has two observations, unit b one: pooled mean weights them equally
        let p = panel_from(&[("a", 0, 1.0), ("a", 1, 2.0), ("b", 0, 6.0)]);
        let (m, n) = mean_outcome(&p, &units(&["a", "b"]), (0, 1)).unwrap();
        assert_eq!(n, 3);
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_matches_hand_evaluated_cells() {
        // the four cell means fed as one-observation cells
        let p = panel_from(&[("t", 0, 0.31), ("t", 1, 0.09), ("c", 0, 0.24), ("c", 1, 0.10)]);
        let w = TrialWindow::new(0, 0, 1, 1, -1).unwrap();
        let r = two_by_two(&p, &units(&["t"]), &units(&["c"]), &w).unwrap();
        assert_abs_diff_eq!(r.did, -0.08, epsilon = 1e-12);
        assert_abs_diff_eq!(
            r.did,
            (r.treated_post - r.treated_pre) - (r.comparison_post - r.comparison_pre),
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_by_two_is_zero_when_cells_equal() {
        let p = panel_from(&[("t", 0, 2.0), ("t", 1, 2.0), ("c", 0, 2.0), ("c", 1, 2.0)]);
        let w = TrialWindow::new(0, 0, 1, 1, -1).unwrap();
        assert_eq!(two_by_two(&p, &units(&["t"]), &units(&["c"]), &w).unwrap().did, 0.0);
    }

    #[test]
    fn two_by_two_flat_comparison_identity() {
        let delta = 0.7;
        let p = panel_from(&[
            ("t", 0, 1.0),
            ("t", 1, 1.0 + delta),
            ("c", 0, 4.0),
            ("c", 1, 4.0),
        ]);
        let w = TrialWindow::new(0, 0, 1, 1, -1).unwrap();
        let r = two_by_two(&p, &units(&["t"]), &units(&["c"]), &w).unwrap();
        assert_abs_diff_eq!(r.did, delta, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_reports_the_empty_cell() {
        let p = panel_from(&[("t", 0, 1.0), ("c", 0, 1.0), ("c", 1, 1.0)]);
        let w = TrialWindow::new(0, 0, 1, 1, -1).unwrap();
        match two_by_two(&p, &units(&["t"]), &units(&["c"]), &w) {
            Err(Error::NoData(cell)) => assert_eq!(cell, "treated_post"),
            other => panic!("expected NoData, got {other:?}"),
        }
    }

    #[test]
    fn window_ordering_is_validated() {
        assert!(TrialWindow::new(0, 5, 5, 9, -1).is_err());
        assert!(TrialWindow::new(0, 5, 6, 9, 0).is_err());
        assert!(TrialWindow::new(0, 5, 6, 9, -1).is_ok());
    }

    fn small_cohorts(adoption: i64) -> (CohortSet, ComparisonResolver) {
        let mut s = TreatmentSchedule::new(TimeMode::Calendar);
        s.insert(uid("t1"), Some(adoption)).unwrap();
        s.insert(uid("t2"), Some(adoption)).unwrap();
        s.insert(uid("c1"), None).unwrap();
        s.insert(uid("c2"), None).unwrap();
        let set = build_cohorts(&s, ComparisonPolicy::NeverTreated).unwrap();
        let resolver = ComparisonResolver::from_cohorts(&set);
        (set, resolver)
    }

    #[test]
    fn estimate_at_reference_is_exactly_zero() {
        let mut rows = Vec::new();
        for t in 0..6 {
            rows.push(("t1", t, 1.0 + 0.3 * t as f64));
            rows.push(("t2", t, 2.0 + 0.3 * t as f64));
            rows.push(("c1", t, 0.5 + 0.1 * t as f64));
            rows.push(("c2", t, 1.5 - 0.2 * t as f64));
        }
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(3);
        let study =
            cohort_event_study(&p, &set.cohorts[0], &resolver, &EstimateOptions::default())
                .unwrap();
        assert_eq!(study.cell_at(-1).unwrap().estimate, 0.0);
    }

    #[test]
    fn constant_effect_recovered_at_every_event_time() {
        // shared time shocks + unit effects + effect tau from adoption on
        let tau = 0.5;
        let adoption = 3i64;
        let mut rows = Vec::new();
        for t in 0..6i64 {
            let shock = (t * t) as f64 * 0.25;
            for (u, fe, treated) in
                [("t1", 1.0, true), ("t2", -2.0, true), ("c1", 0.3, false), ("c2", 4.0, false)]
            {
                let effect = if treated && t >= adoption { tau } else { 0.0 };
                rows.push((u, t, fe + shock + effect));
            }
        }
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(adoption);
        let study =
            cohort_event_study(&p, &set.cohorts[0], &resolver, &EstimateOptions::default())
                .unwrap();
        for cell in &study.cells {
            let expected = if cell.event_time >= 0 { tau } else { 0.0 };
            assert_abs_diff_eq!(cell.estimate, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_built_panel_matches_direct_evaluation() {
        // 4 units x 6 periods, arbitrary values; expected estimates computed
        // from the cell means by hand below.
        let v: BTreeMap<(&str, i64), f64> = [
            (("t1", 0), 2.0), (("t1", 1), 3.0), (("t1", 2), 5.0), (("t1", 3), 9.0), (("t1", 4), 8.0), (("t1", 5), 11.0),
            (("t2", 0), 1.0), (("t2", 1), 1.5), (("t2", 2), 2.0), (("t2", 3), 6.0), (("t2", 4), 7.5), (("t2", 5), 7.0),
            (("c1", 0), 0.0), (("c1", 1), 2.0), (("c1", 2), 3.0), (("c1", 3), 4.0), (("c1", 4), 5.0), (("c1", 5), 5.5),
            (("c2", 0), 4.0), (("c2", 1), 4.5), (("c2", 2), 6.0), (("c2", 3), 6.5), (("c2", 4), 8.0), (("c2", 5), 9.0),
        ]
        .into_iter()
        .collect();
        let rows: Vec<(&str, i64, f64)> = v.iter().map(|(&(u, t), &x)| (u, t, x)).collect();
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(3);
        let study =
            cohort_event_study(&p, &set.cohorts[0], &resolver, &EstimateOptions::default())
                .unwrap();

        let tm = |t: i64| (v[&("t1", t)] + v[&("t2", t)]) / 2.0;
        let cm = |t: i64| (v[&("c1", t)] + v[&("c2", t)]) / 2.0;
        for k in -3..=2i64 {
            let expected = (tm(3 + k) - tm(2)) - (cm(3 + k) - cm(2));
            let got = study.cell_at(k).unwrap().estimate;
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_reference_is_fatal_for_the_cohort() {
        // no observations at t = 2 for treated units
        let rows = vec![
            ("t1", 0, 1.0),
            ("t1", 3, 2.0),
            ("t2", 0, 1.0),
            ("c1", 0, 1.0),
            ("c1", 2, 1.0),
            ("c1", 3, 1.0),
            ("c2", 2, 1.0),
        ];
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(3);
        assert!(matches!(
            cohort_event_study(&p, &set.cohorts[0], &resolver, &EstimateOptions::default()),
            Err(Error::MissingReference { side, .. }) if side == "treated"
        ));
    }

    #[test]
    fn thin_cells_are_skipped_and_reported() {
        let mut rows = Vec::new();
        for t in 0..5i64 {
            rows.push(("t1", t, 1.0));
            rows.push(("t2", t, 1.0));
            rows.push(("c1", t, 1.0));
            rows.push(("c2", t, 1.0));
        }
        rows.push(("t1", 5, 1.0)); // t2, c1, c2 missing at t = 5
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(3);
        let opts = EstimateOptions { min_cell_size: 2, ..Default::default() };
        let study = cohort_event_study(&p, &set.cohorts[0], &resolver, &opts).unwrap();
        assert!(study.cell_at(2).is_none());
        assert!(study.skipped.iter().any(|s| s.event_time == 2));
    }

    #[test]
    fn single_cohort_aggregation_is_identity() {
        let mut rows = Vec::new();
        for t in 0..6i64 {
            rows.push(("t1", t, (t as f64).sin()));
            rows.push(("t2", t, (t as f64).cos()));
            rows.push(("c1", t, 0.1 * t as f64));
            rows.push(("c2", t, -0.3 * t as f64));
        }
        let p = panel_from(&rows);
        let (set, resolver) = small_cohorts(3);
        let study =
            cohort_event_study(&p, &set.cohorts[0], &resolver, &EstimateOptions::default())
                .unwrap();
        let agg = aggregate_event_study(std::slice::from_ref(&study));
        assert_eq!(agg.len(), study.cells.len());
        for (a, c) in agg.iter().zip(&study.cells) {
            assert_eq!(a.event_time, c.event_time);
            assert_eq!(a.estimate, c.estimate);
            assert_eq!(a.n_cohorts, 1);
            assert_eq!(a.n_treated, 2);
            assert_eq!(a.placebo, a.event_time < 0);
        }
    }

    #[test]
    fn aggregation_weights_by_cohort_size() {
        let mk = |adoption: i64, size: usize, est: f64| CohortEventStudy {
            adoption,
            cohort_size: size,
            reference_offset: -1,
            cells: vec![EventCell { event_time: 2, estimate: est, n_treated: size, n_comparison: 3 }],
            skipped: vec![],
        };
        let agg = aggregate_event_study(&[mk(10, 5, 0.2), mk(12, 3, -0.2)]);
        assert_eq!(agg.len(), 1);
        assert_abs_diff_eq!(agg[0].estimate, 0.05, epsilon = 1e-15);
        assert_eq!(agg[0].n_treated, 8);
        assert_eq!(agg[0].n_cohorts, 2);
    }

    #[test]
    fn aggregation_of_equal_estimates_is_that_value() {
        let mk = |size: usize| CohortEventStudy {
            adoption: 5,
            cohort_size: size,
            reference_offset: -1,
            cells: vec![EventCell { event_time: 1, estimate: 0.37, n_treated: size, n_comparison: 2 }],
            skipped: vec![],
        };
        let agg = aggregate_event_study(&[mk(1), mk(7), mk(4)]);
        assert_abs_diff_eq!(agg[0].estimate, 0.37, epsilon = 1e-15);
    }

    #[test]
    fn overall_att_examples() {
        let est = |k: i64, e: f64, n: usize| EventStudyEstimate {
            event_time: k,
            estimate: e,
            se: None,
            n_cohorts: 1,
            n_treated: n,
            placebo: k < 0,
        };
        // single post estimate -> itself
        let single = vec![est(-2, 9.0, 4), est(0, 0.42, 4)];
        assert_abs_diff_eq!(overall_att(&single).unwrap(), 0.42, epsilon = 1e-15);
        // weighted mean
        let pair = vec![est(0, 0.1, 2), est(1, 0.3, 2)];
        assert_abs_diff_eq!(overall_att(&pair).unwrap(), 0.2, epsilon = 1e-15);
        // no post periods
        let none = vec![est(-3, 1.0, 2)];
        assert!(matches!(overall_att(&none), Err(Error::NoData(_))));
    }

    #[test]
    fn single_trial_under_not_yet_treated_sees_later_adopters() {
        // no never-treated units at all: the early cohort's only valid
        // comparisons are the late adopters, while they remain untreated
        let mut s = TreatmentSchedule::new(TimeMode::Calendar);
        s.insert(uid("e1"), Some(3)).unwrap();
        s.insert(uid("e2"), Some(3)).unwrap();
        s.insert(uid("l1"), Some(8)).unwrap();
        s.insert(uid("l2"), Some(8)).unwrap();
        let set = build_cohorts(&s, ComparisonPolicy::NotYetTreated).unwrap();

        let mut rows = Vec::new();
        for t in 0..9i64 {
            for (u, fe, adoption) in
                [("e1", 0.5, 3), ("e2", -0.5, 3), ("l1", 1.0, 8), ("l2", 2.0, 8)]
            {
                let effect = if t >= adoption { 0.5 } else { 0.0 };
                rows.push((u, t, fe + 0.25 * t as f64 + effect));
            }
        }
        let p = panel_from(&rows);
        let single = single_trial_study(&p, &set, 3, &EstimateOptions::default()).unwrap();
        let cells = &single.cohort_studies[0].cells;
        // contrasts exist only while the late cohort is still untreated
        assert_eq!(cells.iter().map(|c| c.event_time).max(), Some(4));
        for cell in cells {
            let expected = if cell.event_time >= 0 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(cell.estimate, expected, epsilon = 1e-12);
        }
        assert!(matches!(
            single_trial_study(&p, &set, 99, &EstimateOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn not_yet_treated_resolver_respects_adoption_order() {
        let mut s = TreatmentSchedule::new(TimeMode::Calendar);
        s.insert(uid("early"), Some(2)).unwrap();
        s.insert(uid("mid"), Some(5)).unwrap();
        s.insert(uid("late"), Some(9)).unwrap();
        s.insert(uid("never"), None).unwrap();
        let set = build_cohorts(&s, ComparisonPolicy::NotYetTreated).unwrap();
        let resolver = ComparisonResolver::from_cohorts(&set);

        // for the early cohort at k = 0 (time 2): mid and late not yet treated
        assert_eq!(resolver.units_at(2, 0), units(&["mid", "late", "never"]));
        // at k = 3 (time 5): mid adopts at 5, no longer a valid comparison
        assert_eq!(resolver.units_at(2, 3), units(&["late", "never"]));
        // pre-treatment event times never admit the cohort itself or units
        // treated at the reference period
        assert_eq!(resolver.units_at(5, -3), units(&["late", "never"]));
        // never-treated policy is constant in k
        let set_nt = build_cohorts(&s, ComparisonPolicy::NeverTreated).unwrap();
        let r = ComparisonResolver::from_cohorts(&set_nt);
        assert_eq!(r.units_at(2, 0), units(&["never"]));
        assert_eq!(r.units_at(2, 100), units(&["never"]));
    }
}
