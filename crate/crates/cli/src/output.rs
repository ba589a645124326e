//! Output writers. Every row is self-describing: it carries the outcome
//! label, time mode, comparison policy, and reference offset alongside the
//! numbers. Floats print in shortest-roundtrip form, so identical inputs
//! give byte-identical files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use paneltrial::diagnostics::{CaseTimeStatus, PreTrendReport, TimingSummary};
use paneltrial::estimate::CohortEventStudy;
use paneltrial::panel::day_to_date;
use paneltrial::transform::log_to_percent;
use paneltrial::{Estimate, Table, TimeMode};

use crate::Format;

pub struct Meta<'a> {
    pub outcome: &'a str,
    pub time_mode: &'a str,
    pub comparison: &'a str,
    pub reference_offset: i64,
}

pub fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create output file {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn json_array(w: &mut impl Write, rows: Vec<Value>) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, &Value::Array(rows))?;
    writeln!(w)?;
    Ok(())
}

pub fn write_estimates(
    w: &mut impl Write,
    estimates: &[Estimate],
    meta: &Meta,
    format: Format,
) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(
                w,
                "event_time,estimate,se,n_cohorts,n_treated,placebo,\
                 outcome,time_mode,comparison,reference_offset"
            )?;
            for e in estimates {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    e.event_time,
                    e.estimate,
                    opt_f64(e.se),
                    e.n_cohorts,
                    e.n_treated,
                    e.placebo,
                    meta.outcome,
                    meta.time_mode,
                    meta.comparison,
                    meta.reference_offset
                )?;
            }
        }
        Format::Json => {
            let rows = estimates
                .iter()
                .map(|e| {
                    json!({
                        "event_time": e.event_time,
                        "estimate": e.estimate,
                        "se": e.se,
                        "n_cohorts": e.n_cohorts,
                        "n_treated": e.n_treated,
                        "placebo": e.placebo,
                        "outcome": meta.outcome,
                        "time_mode": meta.time_mode,
                        "comparison": meta.comparison,
                        "reference_offset": meta.reference_offset,
                    })
                })
                .collect();
            json_array(w, rows)?;
        }
    }
    Ok(())
}

pub fn write_table1(w: &mut impl Write, table: &Table, meta: &Meta, format: Format) -> Result<()> {
    let pct = |x: f64| log_to_percent(x) * 100.0;
    let rows = [
        ("treated", table.treated_pre, table.treated_post),
        ("comparison", table.comparison_pre, table.comparison_post),
        (
            "difference",
            table.treated_pre - table.comparison_pre,
            table.treated_post - table.comparison_post,
        ),
    ];
    let diff = |pre: f64, post: f64| post - pre;
    match format {
        Format::Csv => {
            writeln!(
                w,
                "group,pre,post,difference,pre_pct,post_pct,difference_pct,\
                 outcome,time_mode,comparison,reference_offset"
            )?;
            for (group, pre, post) in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    group,
                    pre,
                    post,
                    diff(pre, post),
                    pct(pre),
                    pct(post),
                    pct(diff(pre, post)),
                    meta.outcome,
                    meta.time_mode,
                    meta.comparison,
                    meta.reference_offset
                )?;
            }
        }
        Format::Json => {
            let rows = rows
                .iter()
                .map(|(group, pre, post)| {
                    json!({
                        "group": group,
                        "pre": pre,
                        "post": post,
                        "difference": diff(*pre, *post),
                        "pre_pct": pct(*pre),
                        "post_pct": pct(*post),
                        "difference_pct": pct(diff(*pre, *post)),
                        "outcome": meta.outcome,
                        "time_mode": meta.time_mode,
                        "comparison": meta.comparison,
                        "reference_offset": meta.reference_offset,
                    })
                })
                .collect();
            json_array(w, rows)?;
        }
    }
    Ok(())
}

fn timing_fields(status: &CaseTimeStatus) -> (String, &'static str, String) {
    match status {
        CaseTimeStatus::Adopted(t) => (t.to_string(), "adopted", String::new()),
        CaseTimeStatus::Never => (String::new(), "never", String::new()),
        CaseTimeStatus::Excluded(reason) => (String::new(), "excluded", reason.clone()),
    }
}

pub fn write_timing(
    w: &mut impl Write,
    summary: &TimingSummary,
    threshold: u64,
    format: Format,
) -> Result<()> {
    let calendar_label = |t: Option<i64>| {
        t.and_then(day_to_date).map(|d| d.to_string()).unwrap_or_default()
    };
    match format {
        Format::Csv => {
            writeln!(w, "unit,calendar_adoption,case_adoption,case_status,detail,case_threshold")?;
            for row in &summary.rows {
                let (case_adoption, status, detail) = timing_fields(&row.case_time);
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    row.unit,
                    calendar_label(row.calendar),
                    case_adoption,
                    status,
                    detail,
                    threshold
                )?;
            }
        }
        Format::Json => {
            let rows = summary
                .rows
                .iter()
                .map(|row| {
                    let (case_adoption, status, detail) = timing_fields(&row.case_time);
                    json!({
                        "unit": row.unit.as_str(),
                        "calendar_adoption": row.calendar.and_then(day_to_date).map(|d| d.to_string()),
                        "case_adoption": if case_adoption.is_empty() { Value::Null } else { json!(case_adoption.parse::<i64>().unwrap()) },
                        "case_status": status,
                        "detail": if detail.is_empty() { Value::Null } else { json!(detail) },
                        "case_threshold": threshold,
                    })
                })
                .collect();
            json_array(w, rows)?;
        }
    }
    Ok(())
}

pub fn write_cohort_detail(
    w: &mut impl Write,
    studies: &[CohortEventStudy<f64>],
    meta: &Meta,
    mode: TimeMode,
    format: Format,
) -> Result<()> {
    let label = |t: i64| match mode {
        TimeMode::Calendar => day_to_date(t).map_or_else(|| t.to_string(), |d| d.to_string()),
        TimeMode::CaseTime => t.to_string(),
    };
    match format {
        Format::Csv => {
            writeln!(
                w,
                "cohort,cohort_size,event_time,estimate,n_treated,n_comparison,\
                 outcome,time_mode,comparison,reference_offset"
            )?;
            for study in studies {
                for cell in &study.cells {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{},{},{}",
                        label(study.adoption),
                        study.cohort_size,
                        cell.event_time,
                        cell.estimate,
                        cell.n_treated,
                        cell.n_comparison,
                        meta.outcome,
                        meta.time_mode,
                        meta.comparison,
                        meta.reference_offset
                    )?;
                }
            }
        }
        Format::Json => {
            let mut rows = Vec::new();
            for study in studies {
                for cell in &study.cells {
                    rows.push(json!({
                        "cohort": label(study.adoption),
                        "cohort_size": study.cohort_size,
                        "event_time": cell.event_time,
                        "estimate": cell.estimate,
                        "n_treated": cell.n_treated,
                        "n_comparison": cell.n_comparison,
                        "outcome": meta.outcome,
                        "time_mode": meta.time_mode,
                        "comparison": meta.comparison,
                        "reference_offset": meta.reference_offset,
                    }));
                }
            }
            json_array(w, rows)?;
        }
    }
    Ok(())
}

pub fn pretrend_text(report: &PreTrendReport<f64>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "pre-trend placebos ({} event times, reference k = {}):\n",
        report.rows.len(),
        report.reference_offset
    ));
    out.push_str(&format!("  max |placebo|   = {}\n", report.max_abs_placebo));
    match report.fitted_pre_slope {
        Some(slope) => out.push_str(&format!("  fitted slope    = {slope}\n")),
        None => out.push_str("  fitted slope    = (needs >= 2 placebo points)\n"),
    }
    out.push_str(&format!(
        "  |ratio| > 2     = {} of {}\n",
        report.n_large,
        report.rows.len()
    ));
    out.push_str(
        "  screening only: near-zero placebos support but cannot verify the\n  \
         parallel-trends assumption, and noisy placebos do not refute it\n",
    );
    out
}

pub fn write_pretrend_json(
    w: &mut impl Write,
    report: &PreTrendReport<f64>,
    meta: &Meta,
) -> Result<()> {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "event_time": r.event_time,
                "estimate": r.estimate,
                "se": r.se,
                "ratio": r.ratio,
            })
        })
        .collect();
    let doc = json!({
        "reference_offset": report.reference_offset,
        "max_abs_placebo": report.max_abs_placebo,
        "n_large": report.n_large,
        "fitted_pre_slope": report.fitted_pre_slope,
        "rows": rows,
        "outcome": meta.outcome,
        "time_mode": meta.time_mode,
        "comparison": meta.comparison,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}
