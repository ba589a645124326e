//! Closed-form recovery checks: the estimators against the simulated truth.

use approx::assert_abs_diff_eq;

use paneltrial::diagnostics::pretrend_report;
use paneltrial::estimate::{nested_event_study, overall_att, EstimateOptions};
use paneltrial::jackknife::attach_ses;
use paneltrial::sim::{simulate, DgpConfig, EffectProfile};
use paneltrial::{build_cohorts, ComparisonPolicy};

/// Staggered adoption over dyadic effects so the closed forms are exact.
fn base_config() -> DgpConfig<f64> {
    let mut c = DgpConfig::<f64>::new(10, 16);
    c.adoption = vec![
        Some(5),
        Some(5),
        Some(8),
        Some(8),
        Some(8),
        Some(11),
        None,
        None,
        None,
        None,
    ];
    c.unit_effects = (0..10).map(|i| (i as f64) * 0.25 - 1.0).collect();
    c.time_effects = (0..16).map(|t| (t as f64) * 0.125 + if t % 3 == 0 { 0.5 } else { 0.0 }).collect();
    c
}

#[test]
fn exact_null_when_nothing_happens() {
    let sim = simulate(&base_config()).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
    let nested = nested_event_study(&sim.observed, &cohorts, &EstimateOptions::default()).unwrap();
    for est in &nested.aggregated {
        assert_eq!(est.estimate, 0.0, "k={}", est.event_time);
    }
}

#[test]
fn constant_effect_recovered_exactly_with_zero_ses() {
    let mut config = base_config();
    config.treatment_effect = EffectProfile::Constant(0.5);
    let sim = simulate(&config).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
    let opts = EstimateOptions::default();
    let nested = nested_event_study(&sim.observed, &cohorts, &opts).unwrap();
    for est in &nested.aggregated {
        let expected = if est.event_time >= 0 { 0.5 } else { 0.0 };
        assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-12);
        assert_eq!(est.placebo, est.event_time < 0);
    }
    let att = overall_att(&nested.aggregated).unwrap();
    assert_abs_diff_eq!(att, 0.5, epsilon = 1e-12);

    let with_se = attach_ses(&nested.cohort_studies, nested.aggregated, &sim.observed, &cohorts, &opts);
    for est in &with_se {
        let se = est.se.expect("se available on a clean balanced panel");
        assert!(se.abs() <= 1e-12, "k={} se={}", est.event_time, se);
    }
}

#[test]
fn estimates_track_the_simulated_truth_table() {
    let mut config = base_config();
    config.treatment_effect = EffectProfile::Table(vec![0.125, 0.25, 0.4375, 0.5]);
    let sim = simulate(&config).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
    let nested = nested_event_study(&sim.observed, &cohorts, &EstimateOptions::default()).unwrap();
    for (k, truth) in &sim.truth {
        let est = nested
            .aggregated
            .iter()
            .find(|e| e.event_time == *k)
            .unwrap_or_else(|| panic!("no estimate at k={k}"));
        assert_abs_diff_eq!(est.estimate, *truth, epsilon = 1e-12);
    }
}

#[test]
fn differential_trend_bias_has_the_closed_form() {
    let slope = 0.1;
    let mut config = base_config();
    config.differential_trend_slope = slope;
    let sim = simulate(&config).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
    let opts = EstimateOptions::default();
    let nested = nested_event_study(&sim.observed, &cohorts, &opts).unwrap();
    for est in &nested.aggregated {
        let expected = slope * (est.event_time - opts.reference_offset) as f64;
        assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-9);
    }
    // placebo estimates trace a line of the trend's slope through the
    // reference period
    let report = pretrend_report(&nested.aggregated, opts.reference_offset).unwrap();
    assert_abs_diff_eq!(report.fitted_pre_slope.unwrap(), slope, epsilon = 1e-9);
}

#[test]
fn anticipation_inside_the_reference_window_masks_the_effect() {
    let delta = 0.4;
    let mut config = base_config();
    config.treatment_effect = EffectProfile::Constant(delta);
    config.anticipation_lead = 2;
    let sim = simulate(&config).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
    let nested = nested_event_study(&sim.observed, &cohorts, &EstimateOptions::default()).unwrap();
    // with the reference period itself contaminated (k = -1 lies inside the
    // anticipation window), post-period and k = -2 contrasts are zero and the
    // full effect shows up as -delta on earlier placebos
    for est in &nested.aggregated {
        let expected = match est.event_time {
            k if k >= -2 => 0.0,
            _ => -delta,
        };
        assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-12);
    }
}

#[test]
fn noisy_recovery_is_unbiased_across_seeds() {
    let tau = 0.5;
    let n_reps = 40;
    let mut atts = Vec::with_capacity(n_reps);
    for seed in 0..n_reps {
        let mut config = DgpConfig::<f64>::new(20, 20);
        config.seed = seed as u64;
        config = config.with_seeded_effects(1.0, 0.5);
        config.adoption = (0..20)
            .map(|i| if i < 10 { Some(8 + (i % 4) as i64) } else { None })
            .collect();
        config.treatment_effect = EffectProfile::Constant(tau);
        config.noise_sd = 0.1;
        let sim = simulate(&config).unwrap();
        let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated).unwrap();
        let nested =
            nested_event_study(&sim.observed, &cohorts, &EstimateOptions::default()).unwrap();
        atts.push(overall_att(&nested.aggregated).unwrap());
    }
    let n = atts.len() as f64;
    let mean = atts.iter().sum::<f64>() / n;
    let var = atts.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mc_se = (var / n).sqrt();
    assert!(
        (mean - tau).abs() <= 4.0 * mc_se,
        "mean {mean} vs tau {tau} (mc se {mc_se})"
    );
}

#[test]
fn not_yet_treated_comparisons_recover_constant_effects_too() {
    // no never-treated units at all; later adopters serve as comparisons
    let mut config = DgpConfig::<f64>::new(6, 14);
    config.adoption = vec![Some(4), Some(4), Some(7), Some(7), Some(12), Some(12)];
    config.unit_effects = (0..6).map(|i| i as f64 * 0.5).collect();
    config.time_effects = (0..14).map(|t| t as f64 * 0.25).collect();
    config.treatment_effect = EffectProfile::Constant(0.75);
    let sim = simulate(&config).unwrap();
    let cohorts = build_cohorts(&sim.schedule, ComparisonPolicy::NotYetTreated).unwrap();
    let nested = nested_event_study(&sim.observed, &cohorts, &EstimateOptions::default()).unwrap();
    // contrasts exist only while a later adopter is still untreated
    for est in &nested.aggregated {
        let expected = if est.event_time >= 0 { 0.75 } else { 0.0 };
        assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-12);
    }
    let max_k = nested.aggregated.iter().map(|e| e.event_time).max().unwrap();
    assert!(max_k < 8, "no comparisons remain once the last cohort adopts");
}
