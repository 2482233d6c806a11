//! End-to-end evaluation: records in, predictions and a report out.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::report::{exact_match_accuracy, EvalReport, MatchMode};
use super::{
    build_prompt, extract_answer, extract_answer_with, load_dataset, select_schema, AnswerMode,
    DatasetRecord, HarnessError, PredictionRecord,
};
use crate::automaton::{Dfa, TokenIndex, Vocabulary};
use crate::backends::{AdversarialProvider, RemoteClient};
use crate::decoder::{decode, DecodeConfig, LogitsProvider, Prompt};
use crate::regex::schema_to_regex;
use crate::schema::{ToolSpec, Whitespace};
use crate::Score;

/// Where generations come from.
pub enum Backend<'a, F: Score> {
    /// Constrained decoding with the given provider.
    Local(&'a dyn LogitsProvider<F>),
    /// Constrained decoding against a provider that prefers disallowed tokens.
    Adversarial { seed: u64 },
    /// A remote server given the schema as a grammar; its output is re-validated.
    Remote(&'a RemoteClient),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// `Exact` applies to entity-keyed records; others are always concise.
    pub mode: AnswerMode,
    pub decode: DecodeConfig,
    pub vocab: Arc<Vocabulary>,
    /// Worker threads; at least one is used.
    pub parallelism: usize,
    pub match_mode: MatchMode,
    /// Label of the report block.
    pub phase: String,
    /// Surface forms accepted from a remote backend.
    pub remote_whitespace: Whitespace,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: AnswerMode::Exact,
            decode: DecodeConfig::greedy(0, 512),
            vocab: Arc::new(Vocabulary::default_ascii()),
            parallelism: 1,
            match_mode: MatchMode::Exact,
            phase: "Eval".into(),
            remote_whitespace: Whitespace::Any,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutput {
    pub predictions: Vec<PredictionRecord>,
    pub report: EvalReport,
}

struct Job {
    spec: ToolSpec,
    prompt: Prompt,
    index: Option<Arc<TokenIndex>>,
}

/// The prompt the pipeline sends for `record`. `Exact` only applies to
/// records with an entity key; the rest fall back to `Concise`.
pub fn record_prompt(record: &DatasetRecord, mode: AnswerMode) -> Result<Prompt, HarnessError> {
    let mode = if record.key.is_none() { AnswerMode::Concise } else { mode };
    let mut prompt = Prompt::text(build_prompt(record, mode)?);
    if let Some(image) = &record.image_ref {
        prompt = prompt.with_attachment(image.clone());
    }
    Ok(prompt)
}

fn prepare<F: Score>(
    records: &[DatasetRecord],
    backend: &Backend<'_, F>,
    config: &PipelineConfig,
) -> Result<Vec<Job>, HarnessError> {
    let needs_index = !matches!(backend, Backend::Remote(_));
    let mut cache: HashMap<String, Arc<TokenIndex>> = HashMap::new();
    let mut jobs = Vec::with_capacity(records.len());
    for record in records {
        let spec = select_schema(record)?;
        let prompt = record_prompt(record, config.mode)?;
        let index = if needs_index {
            let key = serde_json::to_string(spec.parameters()).expect("schema serialization is infallible");
            let index = match cache.get(&key) {
                Some(index) => index.clone(),
                None => {
                    let dfa = Dfa::from_regex(&schema_to_regex(spec.parameters())).map_err(|e| {
                        HarnessError::Stage {
                            id: record.id.clone(),
                            stage: "compile",
                            message: e.to_string(),
                        }
                    })?;
                    let index = Arc::new(TokenIndex::build_shared(dfa, config.vocab.clone()));
                    cache.insert(key, index.clone());
                    index
                }
            };
            Some(index)
        } else {
            None
        };
        jobs.push(Job { spec, prompt, index });
    }
    Ok(jobs)
}

fn invalid(id: &str, raw_output: String, error: String) -> PredictionRecord {
    PredictionRecord {
        id: id.to_string(),
        raw_output,
        reasoning: String::new(),
        answer: String::new(),
        valid: false,
        error: Some(error),
    }
}

fn run_one<F: Score>(
    record: &DatasetRecord,
    job: &Job,
    backend: &Backend<'_, F>,
    config: &PipelineConfig,
) -> PredictionRecord {
    let (raw_output, whitespace) = match backend {
        Backend::Remote(client) => match client.generate_for(&job.prompt.text, &job.spec) {
            Ok(text) => (text, config.remote_whitespace),
            Err(e) => return invalid(&record.id, String::new(), format!("remote: {e}")),
        },
        Backend::Local(provider) => {
            let index = job.index.as_ref().expect("local jobs carry an index");
            match decode(*provider, &job.prompt, index, &config.decode) {
                Ok(out) => (out.text, Whitespace::Canonical),
                Err(e) => return invalid(&record.id, String::new(), format!("decode: {e}")),
            }
        }
        Backend::Adversarial { seed } => {
            let index = job.index.as_ref().expect("local jobs carry an index");
            let provider = AdversarialProvider::<F>::new(index.clone(), *seed);
            match decode(&provider, &job.prompt, index, &config.decode) {
                Ok(out) => (out.text, Whitespace::Canonical),
                Err(e) => return invalid(&record.id, String::new(), format!("decode: {e}")),
            }
        }
    };
    let (reasoning, answer, valid) = if whitespace == Whitespace::Canonical {
        extract_answer(&job.spec, &raw_output)
    } else {
        extract_answer_with(&job.spec, &raw_output, whitespace)
    };
    PredictionRecord {
        id: record.id.clone(),
        error: (!valid).then(|| "output does not validate against the schema".to_string()),
        raw_output,
        reasoning,
        answer,
        valid,
    }
}

/// Generates and scores every record. Predictions come back in input order
/// whatever the parallelism.
pub fn run_records<F: Score>(
    records: &[DatasetRecord],
    backend: &Backend<'_, F>,
    config: &PipelineConfig,
) -> Result<PipelineOutput, HarnessError> {
    config.decode.validate().map_err(|e| HarnessError::Stage {
        id: "-".into(),
        stage: "config",
        message: e.to_string(),
    })?;
    let jobs = prepare(records, backend, config)?;
    let serial = matches!(backend, Backend::Local(p) if !p.supports_concurrent_calls());
    let workers = if serial { 1 } else { config.parallelism.clamp(1, records.len().max(1)) };
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<PredictionRecord>> = vec![None; records.len()];
    let finished: Vec<Vec<(usize, PredictionRecord)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= records.len() {
                            break done;
                        }
                        done.push((i, run_one(&records[i], &jobs[i], backend, config)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    for (i, p) in finished.into_iter().flatten() {
        slots[i] = Some(p);
    }
    let predictions: Vec<PredictionRecord> =
        slots.into_iter().map(|p| p.expect("every record processed")).collect();
    let report = exact_match_accuracy(&predictions, records, config.match_mode, &config.phase)?;
    Ok(PipelineOutput { predictions, report })
}

/// One JSON object per line, in the given order.
pub fn write_predictions(
    path: impl AsRef<Path>,
    predictions: &[PredictionRecord],
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io_error = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for p in predictions {
        serde_json::to_writer(&mut out, p).expect("prediction serialization is infallible");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(io_error)?;
    file.write_all(&out).map_err(io_error)?;
    Ok(())
}

/// Loads the dataset, runs it, and writes the predictions file.
pub fn run_pipeline<F: Score>(
    dataset_path: impl AsRef<Path>,
    predictions_path: impl AsRef<Path>,
    backend: &Backend<'_, F>,
    config: &PipelineConfig,
) -> Result<PipelineOutput, HarnessError> {
    let records = load_dataset(dataset_path)?;
    let output = run_records(&records, backend, config)?;
    write_predictions(predictions_path, &output.predictions)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::MockProvider;
    use crate::harness::render_report;

    fn records() -> Vec<DatasetRecord> {
        let text = concat!(
            r#"{"id": "1", "dataset": "mydoc", "question": "Which page?", "key": "page", "gold": "3"}"#,
            "\n",
            r#"{"id": "2", "dataset": "mychart", "question": "Peak year?", "gold": "2020"}"#,
            "\n",
            r#"{"id": "3", "dataset": "mydoc", "question": "Name?", "key": "name", "max_length": 4, "gold": "Ann"}"#,
        );
        super::super::parse_dataset(text).unwrap()
    }

    #[test]
    fn empty_dataset() {
        let provider = MockProvider::<f32>::new(0, Vocabulary::default_ascii().len());
        let out = run_records(&[], &Backend::Local(&provider), &PipelineConfig::default()).unwrap();
        assert!(out.predictions.is_empty());
        assert_eq!(render_report(&out.report).lines().count(), 2);
    }

    #[test]
    fn adversarial_outputs_are_valid_and_ordered() {
        let config = PipelineConfig {
            parallelism: 3,
            decode: DecodeConfig::greedy(0, 4096),
            ..PipelineConfig::default()
        };
        let out = run_records::<f64>(&records(), &Backend::Adversarial { seed: 9 }, &config).unwrap();
        let ids: Vec<&str> = out.predictions.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3"]);
        for p in &out.predictions {
            assert!(p.valid, "{p:?}");
        }
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let vocab = Vocabulary::default_ascii();
        let provider = MockProvider::<f32>::new(4, vocab.len());
        let base = PipelineConfig {
            decode: DecodeConfig::greedy(4, 4096),
            ..PipelineConfig::default()
        };
        let serial = run_records(&records(), &Backend::Local(&provider), &base).unwrap();
        let parallel = run_records(
            &records(),
            &Backend::Local(&provider),
            &PipelineConfig { parallelism: 4, ..base },
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }
}
