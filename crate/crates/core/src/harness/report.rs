//! Scoring and report rendering.

use std::collections::HashMap;

use super::{DatasetRecord, HarnessError, PredictionRecord};
use crate::Accuracy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Normalized answer equals normalized gold.
    #[default]
    Exact,
    /// Normalized gold occurs inside the normalized answer.
    Substring,
}

/// Trims, collapses whitespace runs to one space, and lowercases.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn is_correct(answer: &str, gold: &str, mode: MatchMode) -> bool {
    let (answer, gold) = (normalize(answer), normalize(gold));
    match mode {
        MatchMode::Exact => answer == gold,
        MatchMode::Substring => !gold.is_empty() && answer.contains(&gold),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetScore {
    pub dataset: String,
    pub n: u64,
    pub correct: u64,
}

impl DatasetScore {
    pub fn accuracy(&self) -> Accuracy {
        Accuracy::new(self.correct, self.n.max(1))
    }
}

/// Per-dataset counts in first-appearance order, under one phase label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub phase: String,
    pub per_dataset: Vec<DatasetScore>,
}

impl EvalReport {
    pub fn new(phase: impl Into<String>) -> Self {
        Self {
            phase: phase.into(),
            per_dataset: Vec::new(),
        }
    }

    pub fn with_phase(mut self, phase: impl Into<String>) -> Self {
        self.phase = phase.into();
        self
    }

    pub fn record(&mut self, dataset: &str, correct: bool) {
        let row = match self.per_dataset.iter().position(|r| r.dataset == dataset) {
            Some(i) => &mut self.per_dataset[i],
            None => {
                self.per_dataset.push(DatasetScore {
                    dataset: dataset.to_string(),
                    n: 0,
                    correct: 0,
                });
                self.per_dataset.last_mut().expect("just pushed")
            }
        };
        row.n += 1;
        row.correct += u64::from(correct);
    }

    pub fn total(&self) -> u64 {
        self.per_dataset.iter().map(|r| r.n).sum()
    }

    pub fn total_correct(&self) -> u64 {
        self.per_dataset.iter().map(|r| r.correct).sum()
    }

    /// Example-weighted; `None` for an empty report.
    pub fn overall(&self) -> Option<Accuracy> {
        let n = self.total();
        (n > 0).then(|| Accuracy::new(self.total_correct(), n))
    }

    pub fn get(&self, dataset: &str) -> Option<&DatasetScore> {
        self.per_dataset.iter().find(|r| r.dataset == dataset)
    }
}

/// Scores predictions against records matched by id. Invalid predictions
/// count as wrong.
pub fn exact_match_accuracy(
    preds: &[PredictionRecord],
    records: &[DatasetRecord],
    mode: MatchMode,
    phase: &str,
) -> Result<EvalReport, HarnessError> {
    if preds.len() != records.len() {
        return Err(HarnessError::IdMismatch(format!(
            "{} predictions for {} records",
            preds.len(),
            records.len()
        )));
    }
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(HarnessError::IdMismatch(format!("duplicate prediction id {}", p.id)));
        }
    }
    let mut report = EvalReport::new(phase);
    for r in records {
        let p = by_id
            .get(r.id.as_str())
            .ok_or_else(|| HarnessError::IdMismatch(format!("no prediction for record {}", r.id)))?;
        report.record(&r.dataset, p.valid && is_correct(&p.answer, &r.gold, mode));
    }
    Ok(report)
}

/// Percentage rounded half-up to two decimals, trailing zeros dropped but
/// one decimal kept: `62.25`, `4.5`, `70.0`.
pub fn format_percent(accuracy: Accuracy) -> String {
    let num = u128::from(*accuracy.numer());
    let den = u128::from(*accuracy.denom());
    let hundredths = (num * 20_000 + den) / (2 * den);
    let (int, frac) = (hundredths / 100, hundredths % 100);
    if frac % 10 == 0 {
        format!("{int}.{}", frac / 10)
    } else {
        format!("{int}.{frac:02}")
    }
}

const HEADER: &str = "|  | **Eval Dataset** | **Accuracy** |\n|---|---|---:|\n";

/// Markdown table with one block per phase; each block lists its datasets
/// and ends with a bold overall row.
pub fn render_table(reports: &[&EvalReport]) -> String {
    let mut out = String::from(HEADER);
    for report in reports {
        let Some(overall) = report.overall() else {
            continue;
        };
        for (i, row) in report.per_dataset.iter().enumerate() {
            let label = if i == 0 { report.phase.as_str() } else { "" };
            out.push_str(&format!(
                "| {label} | `{}` | {}% |\n",
                row.dataset,
                format_percent(row.accuracy())
            ));
        }
        out.push_str(&format!(
            "|  | **{} Overall** | **{}%** |\n",
            report.phase,
            format_percent(overall)
        ));
    }
    out
}

pub fn render_report(report: &EvalReport) -> String {
    render_table(&[report])
}
