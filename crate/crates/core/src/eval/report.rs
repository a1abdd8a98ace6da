use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::{CvReport, Task};
use super::metrics::ClassMetrics;
use crate::corpus::{display_name, Intent, KeywordLabel, Label, SlotLabel};
use crate::error::{NluError, Result};

/// Row label of the support-weighted average, italic-marked.
pub const AVERAGE_LABEL: &str = "*AVERAGE*";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    SlotTable,
    KeywordTable,
    IntentModelTable,
    IntentWiseTable,
}

impl ReportStyle {
    pub const ALL: [ReportStyle; 4] = [
        ReportStyle::SlotTable,
        ReportStyle::KeywordTable,
        ReportStyle::IntentModelTable,
        ReportStyle::IntentWiseTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportStyle::SlotTable => "slot_table",
            ReportStyle::KeywordTable => "keyword_table",
            ReportStyle::IntentModelTable => "intent_model_table",
            ReportStyle::IntentWiseTable => "intent_wise_table",
        }
    }

    pub fn task(self) -> Task {
        match self {
            ReportStyle::SlotTable => Task::Slot,
            ReportStyle::KeywordTable => Task::Keyword,
            ReportStyle::IntentModelTable | ReportStyle::IntentWiseTable => Task::Intent,
        }
    }

    /// The natural style for a task.
    pub fn default_for(task: Task) -> ReportStyle {
        match task {
            Task::Slot => ReportStyle::SlotTable,
            Task::Keyword => ReportStyle::KeywordTable,
            Task::Intent => ReportStyle::IntentWiseTable,
        }
    }
}

impl FromStr for ReportStyle {
    type Err = NluError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| NluError::Config(format!("unknown report style '{s}'")))
    }
}

/// Scenario groups of the intent-wise table, in display order.
pub const SCENARIOS: [(&str, &[Intent]); 4] = [
    ("Finishing the Trip Use-cases", &[Intent::Stop, Intent::Park, Intent::PullOver, Intent::DropOff]),
    ("Set/Change Destination/Route", &[Intent::SetChangeDest, Intent::SetChangeRoute]),
    ("Set/Change Driving Behavior/Speed", &[Intent::GoFaster, Intent::GoSlower]),
    ("Others (Door, Music, A/C, etc.)", &[Intent::OpenDoor, Intent::Other]),
];

enum Row {
    Cells(Vec<String>),
    Rule,
}

fn layout(header: &[&str], rows: &[Row]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        if let Row::Cells(c) = r {
            for (w, cell) in widths.iter_mut().zip(c) {
                *w = (*w).max(cell.chars().count());
            }
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string()
    };
    let rule = widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-");
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>()));
    let _ = writeln!(out, "{rule}");
    for r in rows {
        match r {
            Row::Cells(c) => {
                let _ = writeln!(out, "{}", line(c));
            }
            Row::Rule => {
                let _ = writeln!(out, "{rule}");
            }
        }
    }
    out
}

fn f1_cell(m: Option<&ClassMetrics>) -> String {
    match m {
        Some(m) if m.support > 0 => format!("{:.3}", m.f1),
        _ => "-".to_string(),
    }
}

fn class<'a>(report: &'a CvReport, name: &str) -> Option<&'a ClassMetrics> {
    report.classes.iter().find(|c| c.label == name)
}

fn label_rows<L: Label>(report: &CvReport) -> Vec<Row> {
    let mut rows: Vec<Row> = L::ALL
        .iter()
        .map(|&l| Row::Cells(vec![display_name(l).to_string(), f1_cell(class(report, l.name()))]))
        .collect();
    rows.push(Row::Rule);
    rows.push(Row::Cells(vec![AVERAGE_LABEL.to_string(), format!("{:.3}", report.weighted_f1)]));
    rows
}

/// Renders one report as a fixed-width text table.
pub fn render_report(report: &CvReport, style: ReportStyle) -> Result<String> {
    if style.task() != report.task {
        return Err(NluError::Config(format!(
            "style {} needs a {:?} report, got {:?}",
            style.name(),
            style.task(),
            report.task
        )));
    }
    Ok(match style {
        ReportStyle::SlotTable => layout(&["Slot Type", "F1"], &label_rows::<SlotLabel>(report)),
        ReportStyle::KeywordTable => layout(&["Keyword Type", "F1"], &label_rows::<KeywordLabel>(report)),
        ReportStyle::IntentModelTable => return render_model_table(std::slice::from_ref(report)),
        ReportStyle::IntentWiseTable => {
            let mut rows = Vec::new();
            for (g, (scenario, intents)) in SCENARIOS.iter().enumerate() {
                if g > 0 {
                    rows.push(Row::Rule);
                }
                for (j, &i) in intents.iter().enumerate() {
                    let name = if j == 0 { scenario.to_string() } else { String::new() };
                    rows.push(Row::Cells(vec![name, display_name(i).to_string(), f1_cell(class(report, i.name()))]));
                }
            }
            rows.push(Row::Rule);
            rows.push(Row::Cells(vec![String::new(), AVERAGE_LABEL.to_string(), format!("{:.3}", report.weighted_f1)]));
            layout(&["Scenario", "Intent Type", "F1"], &rows)
        }
    })
}

/// One row per utterance-level model, grouped by architecture family.
pub fn render_model_table(reports: &[CvReport]) -> Result<String> {
    let mut rows = Vec::new();
    let mut last_family = None;
    for r in reports {
        if r.task != Task::Intent {
            return Err(NluError::Config(format!("{} is not an utterance-level model", r.spec)));
        }
        let family = r.spec.name().trim_end_matches(char::is_numeric);
        if last_family.is_some_and(|f| f != family) {
            rows.push(Row::Rule);
        }
        last_family = Some(family);
        rows.push(Row::Cells(vec![r.spec.title().to_string(), format!("{:.3}", r.weighted_f1)]));
    }
    Ok(layout(&["Utterance-level Intent Detection Models", "F1"], &rows))
}
