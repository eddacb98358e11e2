//! Batch question generation over a contexts file.

use serde::{Deserialize, Serialize};
use turqg_core::corpus::AnswerSpan;
use turqg_core::format::QgFormat;
use turqg_core::pipeline::{generate_qa_pairs, DroppedAnswer, GeneratedPair, Generator};
use turqg_core::tokenizer::RuleSet;

/// One line of a contexts file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRecord {
    pub key: String,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<AnswerSpan>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemFailure {
    pub context_key: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationRun {
    pub pairs: Vec<GeneratedPair>,
    pub failures: Vec<ItemFailure>,
    pub dropped: Vec<(String, DroppedAnswer)>,
}

impl GenerationRun {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs the two-stage pipeline on every record in order. A failure on one
/// context or answer is recorded and does not stop the others.
pub fn generate_all<G>(records: &[ContextRecord], format: QgFormat, generator: &G, rules: &RuleSet) -> GenerationRun
where
    G: Generator,
    G::Error: std::fmt::Display,
{
    let mut run = GenerationRun::default();
    for rec in records {
        if let Some(bad) = rec.answers.iter().flatten().find(|a| !a.is_valid_in(&rec.context)) {
            run.failures.push(ItemFailure {
                context_key: rec.key.clone(),
                answer: Some(bad.text.clone()),
                error: format!("answer span at {} does not match the context", bad.start),
            });
            continue;
        }
        match generate_qa_pairs(&rec.key, &rec.context, rec.answers.as_deref(), format, generator, rules) {
            Ok(outcome) => {
                log::debug!(
                    "{}: {} pairs, {} extraction inputs, {} dropped",
                    rec.key,
                    outcome.pairs.len(),
                    outcome.extraction_inputs,
                    outcome.dropped.len()
                );
                for d in outcome.dropped {
                    log::info!("{}: dropped non-verbatim answer {:?}", rec.key, d.text);
                    run.dropped.push((rec.key.clone(), d));
                }
                run.pairs.extend(outcome.pairs);
                run.failures.extend(outcome.failures.into_iter().map(|f| ItemFailure {
                    context_key: rec.key.clone(),
                    answer: Some(f.answer.text),
                    error: f.error.to_string(),
                }));
            }
            Err(e) => run.failures.push(ItemFailure {
                context_key: rec.key.clone(),
                answer: None,
                error: e.to_string(),
            }),
        }
    }
    run
}
