//! Plain-text results table with one row per model.

use serde::{Deserialize, Serialize};

use super::counting::CountingReport;
use super::describe::DescriptionScores;
use crate::metrics::format_percent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub meteor: Option<f64>,
    pub rouge_l: Option<f64>,
    pub counting_accuracy: Option<f64>,
    pub unparsed: Option<usize>,
}

impl EvalReport {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            meteor: None,
            rouge_l: None,
            counting_accuracy: None,
            unparsed: None,
        }
    }

    pub fn with_scores(mut self, meteor: f64, rouge_l: f64) -> Self {
        self.meteor = Some(meteor);
        self.rouge_l = Some(rouge_l);
        self
    }

    pub fn with_descriptions(self, scores: &DescriptionScores) -> Self {
        self.with_scores(scores.report.corpus_meteor, scores.report.corpus_rouge_l)
    }

    pub fn with_counting(mut self, report: &CountingReport) -> Self {
        self.counting_accuracy = Some(report.accuracy);
        self.unparsed = Some(report.unparsed);
        self
    }
}

/// Best-value markers for one column. Values are compared after rounding
/// to the two decimals shown, so displayed ties are all marked. A column
/// with fewer than two values has nothing to compare and is not marked.
fn column_cells(values: &[Option<f64>]) -> Vec<String> {
    let shown: Vec<Option<String>> = values.iter().map(|v| v.map(format_percent)).collect();
    let rounded: Vec<f64> = shown
        .iter()
        .flatten()
        .map(|s| s.parse().expect("formatted number"))
        .collect();
    let best = rounded.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    shown
        .into_iter()
        .map(|cell| match cell {
            None => "-".to_owned(),
            Some(s) if rounded.len() > 1 && s.parse::<f64>().expect("formatted number") == best => format!("{s}*"),
            Some(s) => s,
        })
        .collect()
}

/// Renders reports in input order. Percentages have two decimals and the
/// best value of each column carries a `*`. The counting column appears
/// only when some report has a counting accuracy.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut headers = vec!["Model".to_owned(), "METEOR (%)".to_owned(), "ROUGE-L (%)".to_owned()];
    let mut columns = vec![
        reports.iter().map(|r| r.model.clone()).collect::<Vec<_>>(),
        column_cells(&reports.iter().map(|r| r.meteor).collect::<Vec<_>>()),
        column_cells(&reports.iter().map(|r| r.rouge_l).collect::<Vec<_>>()),
    ];
    if reports.iter().any(|r| r.counting_accuracy.is_some()) {
        headers.push("Count Acc. (%)".to_owned());
        columns.push(column_cells(
            &reports.iter().map(|r| r.counting_accuracy).collect::<Vec<_>>(),
        ));
    }
    let widths: Vec<usize> = headers
        .iter()
        .zip(&columns)
        .map(|(h, col)| {
            col.iter()
                .map(|c| c.chars().count())
                .chain([h.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();

    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_owned()
    };
    let mut out = vec![line(headers.iter().map(String::as_str).collect())];
    out.push(line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    ));
    for row in 0..reports.len() {
        out.push(line(columns.iter().map(|col| col[row].as_str()).collect()));
    }
    out.join("\n") + "\n"
}
