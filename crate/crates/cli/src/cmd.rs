//! Implementations of the four subcommands.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;

use paneltrial::diagnostics::{pretrend_report, timing_summary, TimingOrder};
use paneltrial::estimate::{
    nested_event_study, single_trial_study, two_by_two, EstimateOptions, NestedStudy, TrialWindow,
};
use paneltrial::ingest::{parse_cases, parse_policy, write_panel_csv, RawCaseSeries};
use paneltrial::jackknife::attach_ses;
use paneltrial::panel::{date_to_day, day_to_date};
use paneltrial::sim::simulate as run_simulation;
use paneltrial::transform::{to_case_time, transform_outcome, OutcomeKind, OutcomeSpec};
use paneltrial::{
    build_cohorts, ComparisonPolicy, Estimate, Panel, TimeMode, TreatmentSchedule,
    UnitId,
};

use crate::output::{self, Meta};
use crate::simconfig;
use crate::{EstimateArgs, InputArgs, SimulateArgs, Table1Args, TimingArgs};

fn parse_comparison(s: &str) -> Result<ComparisonPolicy> {
    match s {
        "never-treated" => Ok(ComparisonPolicy::NeverTreated),
        "not-yet-treated" => Ok(ComparisonPolicy::NotYetTreated),
        other => bail!("unknown comparison policy {other:?}; expected never-treated or not-yet-treated"),
    }
}

fn parse_iso_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .with_context(|| format!("expected ISO-8601 date (YYYY-MM-DD), got {s:?}"))
}

fn parse_window(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected START:END dates, got {s:?}"))?;
    Ok((date_to_day(parse_iso_date(a)?), date_to_day(parse_iso_date(b)?)))
}

struct Loaded {
    series: Vec<RawCaseSeries>,
    schedule: TreatmentSchedule,
    panel: Panel,
    report: Vec<String>,
}

fn load(input: &InputArgs, spec: &OutcomeSpec) -> Result<Loaded> {
    let cases = File::open(&input.cases)
        .with_context(|| format!("cannot open cases file {}", input.cases.display()))?;
    let series = parse_cases(cases)?;
    let policy = File::open(&input.policy)
        .with_context(|| format!("cannot open policy file {}", input.policy.display()))?;
    let schedule = parse_policy(policy)?;
    let panel: Panel = transform_outcome(&series, spec)?;
    schedule.check_covers(&panel)?;

    let mut report = Vec::new();
    for series in &series {
        for date in series.revisions() {
            report.push(format!(
                "{}: cumulative count decreased on {date} (upstream revision; kept)",
                series.unit
            ));
        }
    }
    for unit in panel.units_without_observations() {
        report.push(format!("{unit}: no defined observations on outcome {}", spec.kind.label()));
    }
    Ok(Loaded { series, schedule, panel, report })
}

/// Re-indexes to case time when requested; returns the panel, the schedule
/// restricted to panel units, and report lines.
fn resolve_mode(
    loaded: &Loaded,
    mode: TimeMode,
    threshold: u64,
) -> Result<(Panel, TreatmentSchedule, Vec<String>)> {
    match mode {
        TimeMode::Calendar => {
            let keep: BTreeSet<UnitId> = loaded.panel.units().cloned().collect();
            Ok((loaded.panel.clone(), loaded.schedule.retain_units(&keep), Vec::new()))
        }
        TimeMode::CaseTime => {
            let res = to_case_time(&loaded.panel, &loaded.series, &loaded.schedule, threshold)?;
            let lines = res
                .excluded
                .iter()
                .map(|x| format!("{}: excluded from case time: {}", x.unit, x.reason))
                .collect();
            Ok((res.panel, res.schedule, lines))
        }
    }
}

fn write_report(lines: &[String], path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        let mut f = File::create(path)
            .with_context(|| format!("cannot create report file {}", path.display()))?;
        for line in lines {
            writeln!(f, "{line}")?;
        }
    } else {
        for line in lines {
            eprintln!("note: {line}");
        }
    }
    Ok(())
}

/// Label for a cohort adoption time in the active mode.
fn time_label(mode: TimeMode, t: i64) -> String {
    match mode {
        TimeMode::Calendar => day_to_date(t).map_or_else(|| t.to_string(), |d| d.to_string()),
        TimeMode::CaseTime => t.to_string(),
    }
}

pub fn table1(args: Table1Args) -> Result<()> {
    // validate flags before touching any file
    let kind = OutcomeKind::parse(&args.outcome)?;
    let spec = OutcomeSpec::new(kind, 10)?;
    let policy = parse_comparison(&args.comparison)?;
    let cohort_day = date_to_day(parse_iso_date(&args.cohort)?);
    let (pre_start, pre_end) = parse_window(&args.pre)?;
    let (post_start, post_end) = parse_window(&args.post)?;
    let window = TrialWindow::new(pre_start, pre_end, post_start, post_end, args.reference_offset)?;

    let loaded = load(&args.input, &spec)?;
    let keep: BTreeSet<UnitId> = loaded.panel.units().cloned().collect();
    let schedule = loaded.schedule.retain_units(&keep);
    let cohorts = build_cohorts(&schedule, policy)?;
    let cohort = cohorts
        .cohort_at(cohort_day)
        .ok_or_else(|| anyhow!("no cohort adopted on {}", args.cohort))?;

    let members: BTreeSet<UnitId> = cohort.members.iter().cloned().collect();
    // under not-yet-treated, a valid comparison must stay untreated through
    // the post window
    let comparison: BTreeSet<UnitId> = match policy {
        ComparisonPolicy::NeverTreated => cohorts.comparison_pool.clone(),
        ComparisonPolicy::NotYetTreated => {
            let mut pool = cohorts.comparison_pool.clone();
            for c in &cohorts.cohorts {
                if c.adoption > post_end {
                    pool.extend(c.members.iter().cloned());
                }
            }
            pool
        }
    };
    let table = two_by_two(&loaded.panel, &members, &comparison, &window)?;

    let meta = Meta {
        outcome: kind.label(),
        time_mode: TimeMode::Calendar.label(),
        comparison: policy.label(),
        reference_offset: args.reference_offset,
    };
    let mut sink = output::open_sink(args.out.output.as_deref())?;
    output::write_table1(&mut sink, &table, &meta, args.out.format)?;
    write_report(&loaded.report, args.out.report.as_deref())?;
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    // validate flags before touching any file
    let kind = OutcomeKind::parse(&args.outcome)?;
    let spec = OutcomeSpec::new(kind, args.case_threshold)?;
    let mode = match args.time_mode.as_str() {
        "calendar" => TimeMode::Calendar,
        "case" => TimeMode::CaseTime,
        other => bail!("unknown time mode {other:?}; expected calendar or case"),
    };
    let policy = parse_comparison(&args.comparison)?;
    let k_range = match (args.k_min, args.k_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(i64::MIN), hi.unwrap_or(i64::MAX))),
    };
    let opts = EstimateOptions {
        reference_offset: args.reference_offset,
        k_range,
        min_cell_size: args.min_cell_size,
    };
    opts.validate()?;

    let loaded = load(&args.input, &spec)?;
    let mut report = loaded.report.clone();
    let (panel, schedule, mode_lines) = resolve_mode(&loaded, mode, args.case_threshold)?;
    report.extend(mode_lines);

    let cohorts = build_cohorts(&schedule, policy)?;
    let NestedStudy { cohort_studies, aggregated } = match &args.cohort {
        Some(key) => {
            let adoption = match mode {
                TimeMode::Calendar => date_to_day(parse_iso_date(key)?),
                TimeMode::CaseTime => key
                    .trim()
                    .parse()
                    .with_context(|| format!("expected integer case-time adoption, got {key:?}"))?,
            };
            single_trial_study(&panel, &cohorts, adoption, &opts)?
        }
        None => nested_event_study(&panel, &cohorts, &opts)?,
    };
    for study in &cohort_studies {
        for skip in &study.skipped {
            report.push(format!(
                "cohort {}: event time {} suppressed ({} has {} observation(s), need {})",
                time_label(mode, study.adoption),
                skip.event_time,
                skip.cell,
                skip.count,
                opts.min_cell_size
            ));
        }
    }

    let estimates: Vec<Estimate> = if args.no_se {
        aggregated
    } else {
        attach_ses(&cohort_studies, aggregated, &panel, &cohorts, &opts)
    };

    let meta = Meta {
        outcome: kind.label(),
        time_mode: mode.label(),
        comparison: policy.label(),
        reference_offset: args.reference_offset,
    };
    let mut sink = output::open_sink(args.out.output.as_deref())?;
    output::write_estimates(&mut sink, &estimates, &meta, args.out.format)?;

    if let Some(path) = &args.cohort_detail {
        let mut f = File::create(path)
            .with_context(|| format!("cannot create cohort detail file {}", path.display()))?;
        output::write_cohort_detail(&mut f, &cohort_studies, &meta, mode, args.out.format)?;
    }

    if args.diagnose || args.diagnose_json.is_some() {
        match pretrend_report(&estimates, args.reference_offset) {
            Ok(pretrend) => {
                if args.diagnose {
                    eprint!("{}", output::pretrend_text(&pretrend));
                }
                if let Some(path) = &args.diagnose_json {
                    let mut f = File::create(path).with_context(|| {
                        format!("cannot create diagnostics file {}", path.display())
                    })?;
                    output::write_pretrend_json(&mut f, &pretrend, &meta)?;
                }
            }
            Err(e) => report.push(format!("pre-trend report unavailable: {e}")),
        }
    }

    write_report(&report, args.out.report.as_deref())?;
    Ok(())
}

pub fn timing(args: TimingArgs) -> Result<()> {
    // raw-cases panel: defined wherever a row exists, so every unit with any
    // data participates in the case-time conversion
    let spec = OutcomeSpec::new(OutcomeKind::RawCases, args.threshold)?;
    let loaded = load(&args.input, &spec)?;
    let case = to_case_time(&loaded.panel, &loaded.series, &loaded.schedule, args.threshold)?;
    let order = match args.order.as_str() {
        "calendar" => TimingOrder::ByCalendar,
        "case" => TimingOrder::ByCaseTime,
        other => bail!("unknown order {other:?}; expected calendar or case"),
    };
    let summary = timing_summary(&loaded.schedule, &case.schedule, &case.excluded, order);

    let mut sink = output::open_sink(args.out.output.as_deref())?;
    output::write_timing(&mut sink, &summary, args.threshold, args.out.format)?;

    let mut report = loaded.report.clone();
    report.extend(
        case.excluded
            .iter()
            .map(|x| format!("{}: excluded from case time: {}", x.unit, x.reason)),
    );
    write_report(&report, args.out.report.as_deref())?;
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let config = simconfig::build_config(&args)?;
    let sim = run_simulation(&config)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create output directory {}", args.out_dir.display()))?;

    let mut panel_file = File::create(args.out_dir.join("panel.csv"))?;
    write_panel_csv(&sim.observed, &mut panel_file)?;

    let mut truth_file = File::create(args.out_dir.join("truth.csv"))?;
    writeln!(truth_file, "event_time,effect")?;
    for (k, v) in &sim.truth {
        writeln!(truth_file, "{k},{v}")?;
    }

    if args.and_estimate {
        // fall back to not-yet-treated comparisons when the draw has no
        // never-treated units
        let cohorts = match build_cohorts(&sim.schedule, ComparisonPolicy::NeverTreated) {
            Err(paneltrial::Error::EmptyComparisonPool) => {
                build_cohorts(&sim.schedule, ComparisonPolicy::NotYetTreated)?
            }
            other => other?,
        };
        let opts = EstimateOptions::default();
        let nested = nested_event_study(&sim.observed, &cohorts, &opts)?;
        let estimates =
            attach_ses(&nested.cohort_studies, nested.aggregated, &sim.observed, &cohorts, &opts);

        let meta = Meta {
            outcome: "simulated",
            time_mode: TimeMode::Calendar.label(),
            comparison: cohorts.policy.label(),
            reference_offset: opts.reference_offset,
        };
        let mut est_file = File::create(args.out_dir.join("estimates.csv"))?;
        output::write_estimates(&mut est_file, &estimates, &meta, crate::Format::Csv)?;

        let truth_at = |k: i64| {
            sim.truth
                .iter()
                .find(|(kk, _)| *kk == k)
                .map(|(_, v)| *v)
                .unwrap_or(0.0)
        };
        let mut cmp_file = File::create(args.out_dir.join("comparison.csv"))?;
        writeln!(cmp_file, "event_time,estimate,truth,abs_error")?;
        let mut max_err = 0.0f64;
        for est in &estimates {
            let truth = truth_at(est.event_time);
            let err = (est.estimate - truth).abs();
            max_err = max_err.max(err);
            writeln!(cmp_file, "{},{},{},{}", est.event_time, est.estimate, truth, err)?;
        }
        println!("max |estimate - truth| = {max_err}");
    }
    Ok(())
}
