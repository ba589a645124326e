//! Leave-one-unit-out jackknife standard errors.
//!
//! The delete-1 jackknife runs over every unit in scope, treated and
//! comparison alike, since both contribute sampling variability. Replicates
//! where the estimator degenerates (an emptied cell in a size-1 cohort, say)
//! are excluded with the replicate count adjusted rather than failing the
//! whole standard error. Summation runs in sorted unit order so results are
//! identical regardless of how many threads compute the replicates.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{cohort_did_at_k, ComparisonResolver, EstimateOptions, EventStudyEstimate};
use crate::panel::{CohortSet, PanelDataset, UnitId};
use crate::scalar::Float;

/// Point estimate with its jackknife standard error.
#[derive(Debug, Clone)]
pub struct JackknifeResult<F> {
    /// The full-sample estimate, untouched by resampling.
    pub point: F,
    /// Present only when at least two replicates succeeded.
    pub se: Option<F>,
    /// Number of successful replicates.
    pub n_replicates: usize,
    pub failed_replicates: Vec<(UnitId, String)>,
}

impl<F: Float> JackknifeResult<F> {
    /// The standard error, or `InferenceUnavailable` when too few
    /// replicates succeeded.
    pub fn require_se(&self) -> Result<F> {
        self.se.ok_or(Error::InferenceUnavailable { successful: self.n_replicates })
    }
}

/// Delete-1 jackknife of `estimator` over `units_in_scope`.
///
/// The estimator receives the panel and the set of units it may use; each
/// replicate drops one in-scope unit. The standard error is
/// sqrt((n-1)/n * sum_i (theta_i - mean)^2) over the n successful
/// replicates. The estimator must succeed on the full set.
pub fn jackknife<F, E>(
    estimator: E,
    panel: &PanelDataset<F>,
    units_in_scope: &BTreeSet<UnitId>,
) -> Result<JackknifeResult<F>>
where
    F: Float,
    E: Fn(&PanelDataset<F>, &BTreeSet<UnitId>) -> Result<F> + Sync,
{
    let point = estimator(panel, units_in_scope)?;

    let ordered: Vec<&UnitId> = units_in_scope.iter().collect();
    let outcomes: Vec<(UnitId, Result<F>)> = ordered
        .par_iter()
        .map(|unit| {
            let mut kept = units_in_scope.clone();
            kept.remove(*unit);
            ((*unit).clone(), estimator(panel, &kept))
        })
        .collect();

    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    for (unit, outcome) in outcomes {
        match outcome {
            Ok(theta) => replicates.push(theta),
            Err(e) => failed.push((unit, e.to_string())),
        }
    }

    let n = replicates.len();
    let se = if n >= 2 {
        let count = F::from_count(n);
        let mean = replicates.iter().copied().sum::<F>() / count;
        let ss = replicates.iter().map(|&t| (t - mean) * (t - mean)).sum::<F>();
        Some(((count - F::one()) / count * ss).sqrt())
    } else {
        None
    };

    Ok(JackknifeResult { point, se, n_replicates: n, failed_replicates: failed })
}

/// Recomputes the cohort-size-weighted aggregate at one event time using
/// only `kept` units: dropped cohort members shrink their cohort's weight
/// (or remove the cohort entirely), dropped comparisons leave the pool.
/// This is the statistic each jackknife replicate re-evaluates.
fn aggregated_did_at_k<F: Float>(
    panel: &PanelDataset<F>,
    cohorts: &[(i64, Vec<UnitId>)],
    resolver: &ComparisonResolver,
    opts: &EstimateOptions,
    k: i64,
    kept: &BTreeSet<UnitId>,
) -> Result<F> {
    let mut weighted = F::zero();
    let mut total = F::zero();
    let mut contributed = false;
    for (adoption, members) in cohorts {
        let members: BTreeSet<UnitId> =
            members.iter().filter(|u| kept.contains(*u)).cloned().collect();
        if members.is_empty() {
            continue;
        }
        let comparison: BTreeSet<UnitId> = resolver
            .units_at(*adoption, k)
            .into_iter()
            .filter(|u| kept.contains(u))
            .collect();
        match cohort_did_at_k(panel, &members, &comparison, *adoption, k, opts) {
            Ok(cell) => {
                let w = F::from_count(members.len());
                weighted = weighted + w * cell.estimate;
                total = total + w;
                contributed = true;
            }
            Err(Error::NoData(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if !contributed {
        return Err(Error::NoData(format!("no cohort contributes at event time {k}")));
    }
    Ok(weighted / total)
}

/// Attaches jackknife standard errors to aggregated event-study estimates.
///
/// For each event time the scope is the union of the contributing cohorts'
/// members and their comparison units; each replicate recomputes the
/// per-cohort contrasts and the aggregation at that event time without the
/// dropped unit. Event times where fewer than two replicates succeed keep a
/// missing standard error.
pub fn attach_ses<F: Float>(
    studies: &[crate::estimate::CohortEventStudy<F>],
    aggregated: Vec<EventStudyEstimate<F>>,
    panel: &PanelDataset<F>,
    cohorts: &CohortSet,
    opts: &EstimateOptions,
) -> Vec<EventStudyEstimate<F>> {
    let resolver = ComparisonResolver::from_cohorts(cohorts);
    aggregated
        .into_iter()
        .map(|mut est| {
            let k = est.event_time;
            // cohorts contributing at this event time, in adoption order
            let contributing: Vec<(i64, Vec<UnitId>)> = studies
                .iter()
                .filter(|s| s.cell_at(k).is_some())
                .filter_map(|s| {
                    cohorts.cohort_at(s.adoption).map(|c| (c.adoption, c.members.clone()))
                })
                .collect();
            let mut scope: BTreeSet<UnitId> = BTreeSet::new();
            for (adoption, members) in &contributing {
                scope.extend(members.iter().cloned());
                scope.extend(resolver.units_at(*adoption, k));
            }
            let estimator = |panel: &PanelDataset<F>, kept: &BTreeSet<UnitId>| {
                aggregated_did_at_k(panel, &contributing, &resolver, opts, k, kept)
            };
            est.se = match jackknife(estimator, panel, &scope) {
                Ok(result) => {
                    debug_assert!(
                        (result.point - est.estimate).abs() <= F::epsilon(),
                        "replicate pipeline must reproduce the full-sample estimate"
                    );
                    result.se
                }
                Err(_) => None,
            };
            est
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{aggregate_event_study, cohort_event_study, nested_event_study};
    use crate::panel::{build_cohorts, ComparisonPolicy, TimeMode, TreatmentSchedule};
    use approx::assert_abs_diff_eq;

    fn uid(s: &str) -> UnitId {
        UnitId::new(s).unwrap()
    }

    fn mean_estimator(panel: &PanelDataset<f64>, kept: &BTreeSet<UnitId>) -> Result<f64> {
        crate::estimate::mean_outcome(panel, kept, (0, 0)).map(|(m, _)| m)
    }

    fn panel_at_zero(values: &[(&str, f64)]) -> (PanelDataset<f64>, BTreeSet<UnitId>) {
        let mut p = PanelDataset::new(TimeMode::Calendar, "test");
        let mut scope = BTreeSet::new();
        for &(u, v) in values {
            p.insert(uid(u), 0, v).unwrap();
            scope.insert(uid(u));
        }
        (p, scope)
    }

    #[test]
    fn identical_units_give_zero_se() {
        let (p, scope) = panel_at_zero(&[("a", 2.0), ("b", 2.0), ("c", 2.0), ("d", 2.0)]);
        let r = jackknife(mean_estimator, &p, &scope).unwrap();
        assert_eq!(r.point, 2.0);
        assert_eq!(r.se, Some(0.0));
        assert_eq!(r.n_replicates, 4);
    }

    #[test]
    fn replicates_one_two_three_match_hand_formula() {
        // leave-one-out means are {1, 2, 3}: se = sqrt((2/3) * 2)
        let (p, scope) = panel_at_zero(&[("a", 4.0), ("b", 2.0), ("c", 0.0)]);
        let r = jackknife(mean_estimator, &p, &scope).unwrap();
        assert_abs_diff_eq!(r.se.unwrap(), 1.1547005383792515, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_unit_scope_matches_n2_specialization() {
        let (p, scope) = panel_at_zero(&[("a", 1.0), ("b", 4.0)]);
        let r = jackknife(mean_estimator, &p, &scope).unwrap();
        // theta_(a) = 4, theta_(b) = 1; with n = 2 the general formula
        // sqrt((1/2) * sum (theta_i - mean)^2) collapses to |4 - 1| / 2
        assert_abs_diff_eq!(r.se.unwrap(), 1.5, epsilon = 1e-12);
        assert_eq!(r.n_replicates, 2);
    }

    #[test]
    fn point_is_the_full_sample_estimate_exactly() {
        let (p, scope) = panel_at_zero(&[("a", 0.1), ("b", 0.7), ("c", -0.4)]);
        let full = mean_estimator(&p, &scope).unwrap();
        let r = jackknife(mean_estimator, &p, &scope).unwrap();
        assert_eq!(r.point, full);
    }

    #[test]
    fn failed_replicates_are_excluded_and_reported() {
        // estimator errors whenever unit "b" is absent
        let (p, scope) = panel_at_zero(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]);
        let needs_b = |panel: &PanelDataset<f64>, kept: &BTreeSet<UnitId>| {
            if !kept.contains(&uid("b")) {
                return Err(Error::NoData("treated cell emptied".into()));
            }
            mean_estimator(panel, kept)
        };
        let r = jackknife(needs_b, &p, &scope).unwrap();
        assert_eq!(r.n_replicates, 3);
        assert_eq!(r.failed_replicates.len(), 1);
        assert_eq!(r.failed_replicates[0].0, uid("b"));
        assert!(r.se.is_some());
    }

    #[test]
    fn too_few_replicates_leaves_se_missing() {
        let (p, scope) = panel_at_zero(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        let fragile = |panel: &PanelDataset<f64>, kept: &BTreeSet<UnitId>| {
            if kept.len() < 3 {
                return Err(Error::NoData("needs all units".into()));
            }
            mean_estimator(panel, kept)
        };
        let r = jackknife(fragile, &p, &scope).unwrap();
        assert_eq!(r.n_replicates, 0);
        assert!(r.se.is_none());
        assert!(matches!(r.require_se(), Err(Error::InferenceUnavailable { successful: 0 })));
    }

    #[test]
    fn units_outside_scope_are_ignored() {
        let (mut p, scope) = panel_at_zero(&[("a", 1.0), ("b", 5.0)]);
        let r1 = jackknife(mean_estimator, &p, &scope).unwrap();
        p.insert(uid("zz-outside"), 0, 1000.0).unwrap();
        let r2 = jackknife(mean_estimator, &p, &scope).unwrap();
        assert_eq!(r1.point, r2.point);
        assert_eq!(r1.se, r2.se);
    }

    #[test]
    fn scaling_outcomes_scales_point_and_se() {
        let (p, scope) = panel_at_zero(&[("a", 0.3), ("b", 1.9), ("c", -2.2), ("d", 0.8)]);
        let c = 3.75;
        let scaled = p.map_values(|_, _, v| c * v).unwrap();
        let r = jackknife(mean_estimator, &p, &scope).unwrap();
        let rs = jackknife(mean_estimator, &scaled, &scope).unwrap();
        assert_abs_diff_eq!(rs.point, c * r.point, epsilon = 1e-12);
        assert_abs_diff_eq!(rs.se.unwrap(), c * r.se.unwrap(), epsilon = 1e-12);
    }

    fn staggered_panel(noise: &[f64]) -> (PanelDataset<f64>, CohortSet) {
        // two cohorts (sizes 2 and 1) plus two never-treated units
        let mut schedule = TreatmentSchedule::new(TimeMode::Calendar);
        schedule.insert(uid("t1"), Some(4)).unwrap();
        schedule.insert(uid("t2"), Some(4)).unwrap();
        schedule.insert(uid("t3"), Some(6)).unwrap();
        schedule.insert(uid("c1"), None).unwrap();
        schedule.insert(uid("c2"), None).unwrap();
        let mut p = PanelDataset::new(TimeMode::Calendar, "test");
        let mut i = 0usize;
        for t in 0..10i64 {
            for (u, fe, adoption) in [
                ("t1", 0.5, Some(4)),
                ("t2", -0.25, Some(4)),
                ("t3", 1.0, Some(6)),
                ("c1", 0.0, None),
                ("c2", 2.0, None),
            ] {
                let effect = match adoption {
                    Some(a) if t >= a => 0.5,
                    _ => 0.0,
                };
                let eps = noise.get(i).copied().unwrap_or(0.0);
                i += 1;
                p.insert(uid(u), t, fe + 0.125 * t as f64 + effect + eps).unwrap();
            }
        }
        let cohorts = build_cohorts(&schedule, ComparisonPolicy::NeverTreated).unwrap();
        (p, cohorts)
    }

    #[test]
    fn zero_noise_panel_has_zero_ses_everywhere() {
        let (p, cohorts) = staggered_panel(&[]);
        let opts = EstimateOptions::default();
        let nested = nested_event_study(&p, &cohorts, &opts).unwrap();
        let with_se = attach_ses(&nested.cohort_studies, nested.aggregated, &p, &cohorts, &opts);
        assert!(!with_se.is_empty());
        for est in &with_se {
            let se = est.se.expect("se should attach");
            assert!(se.abs() <= 1e-12, "k={} se={}", est.event_time, se);
        }
    }

    #[test]
    fn attach_preserves_point_estimates() {
        let noise: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.03).collect();
        let (p, cohorts) = staggered_panel(&noise);
        let opts = EstimateOptions::default();
        let nested = nested_event_study(&p, &cohorts, &opts).unwrap();
        let before: Vec<(i64, f64)> =
            nested.aggregated.iter().map(|e| (e.event_time, e.estimate)).collect();
        let with_se = attach_ses(&nested.cohort_studies, nested.aggregated, &p, &cohorts, &opts);
        let after: Vec<(i64, f64)> =
            with_se.iter().map(|e| (e.event_time, e.estimate)).collect();
        assert_eq!(before, after);
        assert!(with_se.iter().any(|e| e.se.is_some_and(|s| s > 0.0)));
    }

    #[test]
    fn single_cohort_scope_is_cohort_plus_pool() {
        // dropping any of the 2 treated + 2 comparison units must still work,
        // and the replicate count equals the scope size
        let (p, cohorts) = staggered_panel(&[]);
        let opts = EstimateOptions::default();
        let resolver = ComparisonResolver::from_cohorts(&cohorts);
        let study = cohort_event_study(&p, &cohorts.cohorts[0], &resolver, &opts).unwrap();
        let agg = aggregate_event_study(std::slice::from_ref(&study));
        let members: Vec<(i64, Vec<UnitId>)> =
            vec![(cohorts.cohorts[0].adoption, cohorts.cohorts[0].members.clone())];
        let scope: BTreeSet<UnitId> = cohorts.cohorts[0]
            .members
            .iter()
            .cloned()
            .chain(cohorts.comparison_pool.iter().cloned())
            .collect();
        let est = |panel: &PanelDataset<f64>, kept: &BTreeSet<UnitId>| {
            aggregated_did_at_k(panel, &members, &resolver, &opts, 0, kept)
        };
        let r = jackknife(est, &p, &scope).unwrap();
        assert_eq!(r.n_replicates, 4);
        assert_abs_diff_eq!(
            r.point,
            agg.iter().find(|e| e.event_time == 0).unwrap().estimate,
            epsilon = 0.0
        );
    }
}
