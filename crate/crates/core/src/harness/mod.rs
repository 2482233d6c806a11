//! Evaluation pipeline for document and chart question answering: load a
//! dataset, pick a schema and prompt per record, generate under the schema,
//! extract answers and score them.

mod pipeline;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::schema::json::JsonValue;
use crate::schema::{
    build_chart_schema, build_doc_schema, strip_index_prefix, SchemaError, SchemaKind, ToolSpec,
    Validator, Whitespace, REASONING_KEY,
};

pub use self::pipeline::{
    record_prompt, run_pipeline, run_records, write_predictions, Backend, PipelineConfig, PipelineOutput,
};
pub use self::report::{
    exact_match_accuracy, format_percent, normalize, render_report, render_table, DatasetScore,
    EvalReport, MatchMode,
};

/// Datasets whose records must name the requested entity.
pub const KEYED_DATASETS: &[&str] = &["mydoc"];

/// String cap for entity answers when a record gives none.
pub const DEFAULT_DOC_MAX_LENGTH: usize = 128;

pub const EXACT_INSTRUCTION: &str = "Give the answer exactly as it appears in the document.";
pub const CONCISE_INSTRUCTION: &str = "Give a concise answer to the question.";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    SchemaFieldMissing { line: usize, field: String },
    #[error("record {id}: dataset `{dataset}` needs an entity key")]
    MissingKey { id: String, dataset: String },
    #[error("predictions do not line up with records: {0}")]
    IdMismatch(String),
    #[error("record {id}: {stage}: {message}")]
    Stage {
        id: String,
        stage: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub dataset: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    pub gold: String,
}

impl DatasetRecord {
    pub fn is_keyed_dataset(&self) -> bool {
        KEYED_DATASETS.contains(&self.dataset.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Generated text exactly as produced.
    pub raw_output: String,
    pub reasoning: String,
    pub answer: String,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerMode {
    /// Verbatim answers copied from the document.
    Exact,
    #[default]
    Concise,
}

/// Parses JSONL text; blank lines are skipped, line numbers are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, HarnessError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| HarnessError::ParseError {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(map) = &value else {
            return Err(HarnessError::ParseError {
                line: line_no,
                message: "record is not a JSON object".into(),
            });
        };
        for field in ["id", "dataset", "question", "gold"] {
            if map.get(field).is_none_or(Value::is_null) {
                return Err(HarnessError::SchemaFieldMissing {
                    line: line_no,
                    field: field.into(),
                });
            }
        }
        let record: DatasetRecord =
            serde_json::from_value(value).map_err(|e| HarnessError::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.gold.trim().is_empty() {
            return Err(HarnessError::ParseError {
                line: line_no,
                message: "gold answer is empty".into(),
            });
        }
        if record.key.is_none() && record.is_keyed_dataset() {
            return Err(HarnessError::SchemaFieldMissing {
                line: line_no,
                field: "key".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

/// Entity-keyed records get the document template, everything else the
/// chart/infographic template.
pub fn select_schema(record: &DatasetRecord) -> Result<ToolSpec, HarnessError> {
    let schema_error = |e: SchemaError| HarnessError::Stage {
        id: record.id.clone(),
        stage: "schema",
        message: e.to_string(),
    };
    if let Some(key) = &record.key {
        let max_length = record.max_length.unwrap_or(DEFAULT_DOC_MAX_LENGTH);
        return build_doc_schema(key, max_length).map_err(schema_error);
    }
    if record.is_keyed_dataset() {
        return Err(HarnessError::MissingKey {
            id: record.id.clone(),
            dataset: record.dataset.clone(),
        });
    }
    let (name, description) = match record.dataset.as_str() {
        "mychart" => ("chart_explainer_tool", "Chart Explainer Tool"),
        "myinfographic" => ("infographic_explainer_tool", "Infographic Explainer Tool"),
        _ => ("visual_qa_tool", "Visual Question Answering Tool"),
    };
    build_chart_schema(name, description).map_err(schema_error)
}

/// Fixed textual template; the image reference, if any, is passed through
/// as an opaque line.
pub fn build_prompt(record: &DatasetRecord, mode: AnswerMode) -> Result<String, HarnessError> {
    if mode == AnswerMode::Exact && record.key.is_none() {
        return Err(HarnessError::MissingKey {
            id: record.id.clone(),
            dataset: record.dataset.clone(),
        });
    }
    let spec = select_schema(record)?;
    let mut out = String::new();
    if let Some(image) = &record.image_ref {
        out.push_str(&format!("Image: {image}\n\n"));
    }
    if let Some(context) = &record.context_text {
        out.push_str("Document:\n");
        out.push_str(context);
        out.push_str("\n\n");
    }
    out.push_str(&format!("Question: {}\n", record.question));
    out.push_str(match mode {
        AnswerMode::Exact => EXACT_INSTRUCTION,
        AnswerMode::Concise => CONCISE_INSTRUCTION,
    });
    out.push_str(&format!(
        "\n\nCall `{}` ({}) with a JSON object whose keys appear in this order:\n",
        spec.name(),
        spec.description()
    ));
    for p in spec.object().properties() {
        let ty = match p.schema.kind {
            SchemaKind::Object(_) => "object",
            SchemaKind::String { .. } => "string",
            SchemaKind::Integer => "integer",
        };
        out.push_str(&format!("- \"{}\" ({ty})", p.key));
        if let Some(d) = &p.schema.description {
            out.push_str(&format!(": {d}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `(reasoning, answer, valid)` from canonical output text.
pub fn extract_answer(schema: &ToolSpec, raw_output: &str) -> (String, String, bool) {
    extract_answer_with(schema, raw_output, Whitespace::Canonical)
}

/// As [`extract_answer`], accepting the given surface forms.
pub fn extract_answer_with(
    schema: &ToolSpec,
    raw_output: &str,
    whitespace: Whitespace,
) -> (String, String, bool) {
    let invalid = || (String::new(), String::new(), false);
    let (report, value) = Validator::new(schema.parameters())
        .whitespace(whitespace)
        .check(raw_output);
    let (true, Some(JsonValue::Object(members))) = (report.valid(), value) else {
        return invalid();
    };
    let mut reasoning = None;
    let mut answer = None;
    for (key, value) in &members {
        let name = key.decoded.as_str();
        if name == REASONING_KEY {
            if let JsonValue::String(s) = value {
                reasoning = Some(s.decoded.clone());
            }
        } else if name.starts_with("2_") && !strip_index_prefix(name).is_empty() {
            answer = match value {
                JsonValue::String(s) => Some(s.decoded.clone()),
                JsonValue::Number(raw) => Some(canonical_integer(raw)),
                _ => None,
            };
        }
    }
    match (reasoning, answer) {
        (Some(r), Some(a)) => (r, a, true),
        _ => invalid(),
    }
}

fn canonical_integer(raw: &str) -> String {
    let digits = raw.strip_prefix('-').unwrap_or(raw);
    if digits.bytes().all(|b| b == b'0') {
        "0".into()
    } else {
        raw.to_string()
    }
}
