//! Two-stage question generation: extract candidate answers sentence by
//! sentence from a highlighted context, then generate one answer-aware
//! question per surviving answer.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;
use crate::format::{ae_input, qg_input, split_answer_list, FormatError, QgFormat};
use crate::text::{self, IndexedText};
use crate::tokenizer::{split_sentences, RuleSet, SentenceSpan};

/// A text-to-text generation backend.
///
/// Implementations must return exactly one result per input, in input
/// order. They are free to batch or parallelize internally.
pub trait Generator {
    type Error;

    fn generate(&self, inputs: &[String]) -> Vec<Result<String, Self::Error>>;
}

impl<G: Generator + ?Sized> Generator for &G {
    type Error = G::Error;

    fn generate(&self, inputs: &[String]) -> Vec<Result<String, Self::Error>> {
        (**self).generate(inputs)
    }
}

/// Adapts a per-input closure into a [`Generator`].
pub struct FnGenerator<F>(pub F);

impl<F, E> Generator for FnGenerator<F>
where
    F: Fn(&str) -> Result<String, E>,
{
    type Error = E;

    fn generate(&self, inputs: &[String]) -> Vec<Result<String, E>> {
        inputs.iter().map(|i| (self.0)(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError<E> {
    #[error("backend error: {0}")]
    Backend(E),
    #[error("backend returned {got} outputs for {expected} inputs")]
    OutputCount { expected: usize, got: usize },
    #[error("backend returned an empty generation")]
    EmptyOutput,
    #[error("context is empty")]
    EmptyContext,
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Extracted,
    Provided,
}

/// An answer found by the extraction stage, located in its source sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedAnswer {
    pub sentence: SentenceSpan,
    pub span: AnswerSpan,
}

/// A generated answer that was not usable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedAnswer {
    pub sentence: SentenceSpan,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extraction {
    /// Surviving answers in sentence order, then answer-offset order.
    pub answers: Vec<ExtractedAnswer>,
    /// Generated items that do not occur verbatim in their sentence.
    pub dropped: Vec<DroppedAnswer>,
    /// Number of sentences sent to the backend.
    pub sentences: usize,
}

fn collect_outputs<E>(
    inputs: &[String],
    outputs: Vec<Result<String, E>>,
) -> Result<Vec<Result<String, E>>, PipelineError<E>> {
    if outputs.len() != inputs.len() {
        return Err(PipelineError::OutputCount {
            expected: inputs.len(),
            got: outputs.len(),
        });
    }
    Ok(outputs)
}

/// Runs answer extraction over every sentence of `context`.
///
/// Each generated list is split on the separator token; items are trimmed,
/// empty items ignored, and only items found verbatim inside the
/// highlighted sentence are kept, deduplicated per sentence. Each kept
/// answer is located at its first occurrence in the sentence.
pub fn extract_answers<G: Generator>(
    context: &str,
    generator: &G,
    rules: &RuleSet,
) -> Result<Extraction, PipelineError<G::Error>> {
    if context.trim().is_empty() {
        return Err(PipelineError::EmptyContext);
    }
    let spans = split_sentences(context, rules);
    let inputs = spans
        .iter()
        .map(|&s| ae_input(context, s))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = collect_outputs(&inputs, generator.generate(&inputs))?;

    let indexed = IndexedText::new(context);
    let mut extraction = Extraction {
        sentences: spans.len(),
        ..Extraction::default()
    };
    for (sentence, output) in spans.iter().zip(outputs) {
        let output = output.map_err(PipelineError::Backend)?;
        let sentence_text = indexed.slice(sentence.start, sentence.end).expect("span inside context");
        let mut seen = BTreeSet::new();
        let mut found = Vec::new();
        for item in split_answer_list(&output) {
            if !seen.insert(item) {
                continue;
            }
            match text::find_chars(sentence_text, item, 0) {
                Some(offset) => found.push(ExtractedAnswer {
                    sentence: *sentence,
                    span: AnswerSpan::new(item, sentence.start + offset),
                }),
                None => extraction.dropped.push(DroppedAnswer {
                    sentence: *sentence,
                    text: item.into(),
                }),
            }
        }
        found.sort_by_key(|a| a.span.start);
        extraction.answers.append(&mut found);
    }
    Ok(extraction)
}

fn clean_question<E>(output: Result<String, E>) -> Result<String, PipelineError<E>> {
    let output = output.map_err(PipelineError::Backend)?;
    let trimmed = output.trim();
    if trimmed.is_empty() {
        return Err(PipelineError::EmptyOutput);
    }
    Ok(trimmed.into())
}

/// Generates one question for `answer`, trimmed of surrounding whitespace.
pub fn generate_question<G: Generator>(
    context: &str,
    answer: &AnswerSpan,
    format: QgFormat,
    generator: &G,
) -> Result<String, PipelineError<G::Error>> {
    let inputs = [qg_input(context, answer, format)?];
    let mut outputs = collect_outputs(&inputs, generator.generate(&inputs))?;
    clean_question(outputs.remove(0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub context_key: String,
    pub answer: String,
    pub answer_span: Option<AnswerSpan>,
    pub question: String,
    pub provenance: Provenance,
}

/// An answer whose question could not be generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairFailure<E> {
    pub answer: AnswerSpan,
    pub error: PipelineError<E>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairsOutcome<E> {
    pub pairs: Vec<GeneratedPair>,
    pub failures: Vec<PairFailure<E>>,
    pub dropped: Vec<DroppedAnswer>,
    /// Backend inputs sent for answer extraction (0 when answers were given).
    pub extraction_inputs: usize,
    /// Backend inputs sent for question generation.
    pub generation_inputs: usize,
}

impl<E> PairsOutcome<E> {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Produces question/answer pairs for one context.
///
/// With `answers` given, extraction is skipped and every answer must be a
/// valid span of `context`. Without, answers come from
/// [`extract_answers`]. Question-generation failures are collected per
/// answer; extraction failures abort the whole context.
pub fn generate_qa_pairs<G: Generator>(
    context_key: &str,
    context: &str,
    answers: Option<&[AnswerSpan]>,
    format: QgFormat,
    generator: &G,
    rules: &RuleSet,
) -> Result<PairsOutcome<G::Error>, PipelineError<G::Error>> {
    if context.trim().is_empty() {
        return Err(PipelineError::EmptyContext);
    }
    let (spans, provenance, dropped, extraction_inputs) = match answers {
        Some(given) => (given.to_vec(), Provenance::Provided, Vec::new(), 0),
        None => {
            let extraction = extract_answers(context, generator, rules)?;
            let spans = extraction.answers.into_iter().map(|a| a.span).collect();
            (spans, Provenance::Extracted, extraction.dropped, extraction.sentences)
        }
    };

    let inputs = spans
        .iter()
        .map(|a| qg_input(context, a, format))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = if inputs.is_empty() {
        Vec::new()
    } else {
        collect_outputs(&inputs, generator.generate(&inputs))?
    };

    let mut outcome = PairsOutcome {
        pairs: Vec::new(),
        failures: Vec::new(),
        dropped,
        extraction_inputs,
        generation_inputs: inputs.len(),
    };
    for (span, output) in spans.into_iter().zip(outputs) {
        match clean_question(output) {
            Ok(question) => outcome.pairs.push(GeneratedPair {
                context_key: context_key.into(),
                answer: span.text.clone(),
                answer_span: Some(span),
                question,
                provenance,
            }),
            Err(error) => outcome.failures.push(PairFailure { answer: span, error }),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::tokens;
    use alloc::string::ToString;
    use core::cell::Cell;

    /// Echoes the highlighted text, like the mock server fallback.
    fn echo(input: &str) -> Result<String, ()> {
        let open = input.find(tokens::HIGHLIGHT_OPEN).ok_or(())? + tokens::HIGHLIGHT_OPEN.len();
        let close = open + input[open..].find(tokens::HIGHLIGHT_CLOSE).ok_or(())?;
        Ok(input[open..close].trim_end_matches(['.', '!', '?']).to_string())
    }

    #[test]
    fn extraction_filters_and_dedupes() {
        let g = FnGenerator(|_: &str| Ok::<_, ()>("İstanbul'da <sep> İstanbul'da <sep> Ankara".to_string()));
        let ex = extract_answers("Antlaşma İstanbul'da imzalandı.", &g, &RuleSet::builtin()).unwrap();
        assert_eq!(ex.answers.len(), 1);
        assert_eq!(ex.answers[0].span, AnswerSpan::new("İstanbul'da", 9));
        assert_eq!(ex.dropped, [DroppedAnswer { sentence: SentenceSpan::new(0, 31), text: "Ankara".into() }]);
    }

    #[test]
    fn extraction_with_echo_backend() {
        let ex = extract_answers("Ali geldi. Ayşe gitti.", &FnGenerator(echo), &RuleSet::builtin()).unwrap();
        let texts: Vec<_> = ex.answers.iter().map(|a| a.span.text.as_str()).collect();
        assert_eq!(texts, ["Ali geldi", "Ayşe gitti"]);
        assert_eq!(ex.sentences, 2);
    }

    #[test]
    fn question_is_trimmed_and_must_be_nonempty() {
        let a = AnswerSpan::new("b", 2);
        let padded = FnGenerator(|_: &str| Ok::<_, ()>("  Ne?\n".to_string()));
        assert_eq!(generate_question("a b c", &a, QgFormat::Both, &padded).unwrap(), "Ne?");
        let empty = FnGenerator(|_: &str| Ok::<_, ()>("   ".to_string()));
        assert_eq!(
            generate_question("a b c", &a, QgFormat::Both, &empty),
            Err(PipelineError::EmptyOutput)
        );
    }

    #[test]
    fn provided_answers_skip_extraction() {
        let calls = Cell::new(0);
        let g = FnGenerator(|input: &str| {
            calls.set(calls.get() + 1);
            assert!(input.starts_with(tokens::ANSWER));
            Ok::<_, ()>("Soru?".to_string())
        });
        let given = [AnswerSpan::new("Ali", 0), AnswerSpan::new("Ayşe", 11)];
        let out = generate_qa_pairs("k", "Ali geldi. Ayşe gitti.", Some(&given), QgFormat::Both, &g, &RuleSet::builtin())
            .unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert!(out.pairs.iter().all(|p| p.provenance == Provenance::Provided));
        assert_eq!(calls.get(), 2);
        assert_eq!(out.extraction_inputs, 0);
    }

    #[test]
    fn failures_are_collected_per_answer() {
        let g = FnGenerator(|input: &str| if input.contains("Ayşe <hl>") { Err("boom") } else { Ok("Kim?".to_string()) });
        let given = [AnswerSpan::new("Ali", 0), AnswerSpan::new("Ayşe", 11)];
        let out = generate_qa_pairs("k", "Ali geldi. Ayşe gitti.", Some(&given), QgFormat::Both, &g, &RuleSet::empty())
            .unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].error, PipelineError::Backend("boom"));
        assert!(out.is_partial());
    }

    #[test]
    fn nothing_extractable_gives_no_pairs() {
        let g = FnGenerator(|_: &str| Ok::<_, ()>("yok".to_string()));
        let out = generate_qa_pairs("k", "Ali geldi.", None, QgFormat::Highlight, &g, &RuleSet::builtin()).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.generation_inputs, 0);
        assert_eq!(out.extraction_inputs, 1);
    }

    struct Short;
    impl Generator for Short {
        type Error = ();
        fn generate(&self, inputs: &[String]) -> Vec<Result<String, ()>> {
            inputs.iter().skip(1).map(|_| Ok("x".into())).collect()
        }
    }

    #[test]
    fn output_count_mismatch_is_an_error() {
        assert_eq!(
            extract_answers("A geldi. B gitti.", &Short, &RuleSet::empty()),
            Err(PipelineError::OutputCount { expected: 2, got: 1 })
        );
    }

    #[test]
    fn empty_context_is_rejected() {
        assert_eq!(
            generate_qa_pairs("k", "  ", None, QgFormat::Both, &FnGenerator(echo), &RuleSet::empty()),
            Err(PipelineError::EmptyContext)
        );
    }
}
