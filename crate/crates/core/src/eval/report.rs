//! Report emitters: JSON, aligned text table, CSV.

use std::fmt::Write;
use std::str::FromStr;

use super::{CategoryStats, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    TableText,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table-text" => Ok(ReportFormat::TableText),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!(
                "unknown report format {other:?} (expected json, table-text or csv)"
            )),
        }
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::TableText => table_text(report),
        ReportFormat::Csv => csv(report),
    }
}

fn rows(report: &EvalReport) -> impl Iterator<Item = (&'static str, &CategoryStats)> {
    // BTreeMap order is report row order.
    report
        .per_category
        .iter()
        .map(|(c, s)| (c.display_name(), s))
}

fn table_text(report: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>6} {:>9} {:>11}",
        "Question Type", "Count", "Raw (%)", "Mapped (%)"
    )
    .unwrap();
    for (name, s) in rows(report) {
        writeln!(
            out,
            "{:<20} {:>6} {:>9.2} {:>11.2}",
            name, s.count, s.accuracy_raw, s.accuracy_mapped
        )
        .unwrap();
    }
    let o = &report.overall;
    writeln!(out, "{}", "-".repeat(49)).unwrap();
    writeln!(
        out,
        "{:<20} {:>6} {:>9.2} {:>11.2}",
        "Overall", o.count, o.accuracy_raw, o.accuracy_mapped
    )
    .unwrap();
    if report.error_count > 0 {
        writeln!(out, "errors: {}", report.error_count).unwrap();
    }
    out
}

fn csv(report: &EvalReport) -> String {
    let mut out =
        String::from("category,count,correct_raw,correct_mapped,accuracy_raw,accuracy_mapped\n");
    let mut line = |name: &str, s: &CategoryStats| {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4}",
            name, s.count, s.correct_raw, s.correct_mapped, s.accuracy_raw, s.accuracy_mapped
        )
        .unwrap();
    };
    for (category, s) in &report.per_category {
        line(category.label(), s);
    }
    line("overall", &report.overall);
    out
}
