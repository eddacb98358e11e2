//! Text-to-text sample construction for question answering, answer-aware
//! question generation and answer extraction.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerSpan, Corpus, Paragraph, ParagraphKey, QaRecord};
use crate::text::{self, IndexedText};
use crate::tokenizer::{find_covering_sentence, split_sentences, RuleSet, SentenceSpan};

/// Literal token and prefix spellings used in every sample.
pub mod tokens {
    pub const HIGHLIGHT: &str = "<hl>";
    pub const SEPARATOR: &str = "<sep>";
    /// Inserted before a highlighted range.
    pub const HIGHLIGHT_OPEN: &str = "<hl> ";
    /// Inserted after a highlighted range.
    pub const HIGHLIGHT_CLOSE: &str = " <hl>";
    /// Joins answer-extraction targets.
    pub const SEPARATOR_JOIN: &str = " <sep> ";

    pub const QUESTION: &str = "question: ";
    pub const CONTEXT: &str = "context: ";
    pub const GENERATE_QUESTION: &str = "generate question: ";
    pub const ANSWER: &str = "answer: ";
    pub const EXTRACT_ANSWER: &str = "extract answer: ";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qa,
    Qg,
    AnswerExtraction,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Qa, TaskKind::Qg, TaskKind::AnswerExtraction];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Qa => "qa",
            TaskKind::Qg => "qg",
            TaskKind::AnswerExtraction => "answer_extraction",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{value}`")]
pub struct UnknownName {
    pub what: &'static str,
    pub value: String,
}

impl FromStr for TaskKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" => Ok(TaskKind::Qa),
            "qg" => Ok(TaskKind::Qg),
            "ae" | "answer_extraction" => Ok(TaskKind::AnswerExtraction),
            other => Err(UnknownName {
                what: "task",
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QgFormat {
    Prepend,
    Highlight,
    Both,
}

impl QgFormat {
    pub const ALL: [QgFormat; 3] = [QgFormat::Prepend, QgFormat::Highlight, QgFormat::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            QgFormat::Prepend => "prepend",
            QgFormat::Highlight => "highlight",
            QgFormat::Both => "both",
        }
    }
}

impl fmt::Display for QgFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QgFormat {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prepend" => Ok(QgFormat::Prepend),
            "highlight" => Ok(QgFormat::Highlight),
            "both" => Ok(QgFormat::Both),
            other => Err(UnknownName {
                what: "QG format",
                value: other.into(),
            }),
        }
    }
}

/// One text-to-text sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormattedSample {
    pub task: TaskKind,
    pub format: Option<QgFormat>,
    pub input: String,
    pub target: String,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("record `{id}` has no answers")]
    NoAnswer { id: String },
    #[error("answer `{text}` at codepoint {start} does not match its context")]
    InvalidSpan { text: String, start: usize },
    #[error("sentence range {start}..{end} lies outside a context of {len} codepoints")]
    InvalidSentence { start: usize, end: usize, len: usize },
}

/// `context` with the highlight token wrapped around codepoints
/// `[start, end)`.
pub fn highlight(context: &str, start: usize, end: usize) -> Option<String> {
    let indexed = IndexedText::new(context);
    if start > end || end > indexed.len() {
        return None;
    }
    let (from, to) = (indexed.byte_at(start), indexed.byte_at(end));
    let mut out = String::with_capacity(context.len() + 10);
    out.push_str(&context[..from]);
    out.push_str(tokens::HIGHLIGHT_OPEN);
    out.push_str(&context[from..to]);
    out.push_str(tokens::HIGHLIGHT_CLOSE);
    out.push_str(&context[to..]);
    Some(out)
}

/// Removes one highlighted pair inserted by [`highlight`]. Text without a
/// complete pair is returned unchanged.
pub fn strip_highlight(text: &str) -> String {
    let Some(open) = text.find(tokens::HIGHLIGHT_OPEN) else {
        return text.to_string();
    };
    let after_open = open + tokens::HIGHLIGHT_OPEN.len();
    let Some(close) = text[after_open..].find(tokens::HIGHLIGHT_CLOSE) else {
        return text.to_string();
    };
    let close = after_open + close;
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..open]);
    out.push_str(&text[after_open..close]);
    out.push_str(&text[close + tokens::HIGHLIGHT_CLOSE.len()..]);
    out
}

fn checked_answer<'a>(context: &str, answer: &'a AnswerSpan) -> Result<&'a AnswerSpan, FormatError> {
    if answer.is_valid_in(context) {
        Ok(answer)
    } else {
        Err(FormatError::InvalidSpan {
            text: answer.text.clone(),
            start: answer.start,
        })
    }
}

fn first_answer(record: &QaRecord) -> Result<&AnswerSpan, FormatError> {
    record.answers.first().ok_or_else(|| FormatError::NoAnswer {
        id: record.id.clone(),
    })
}

pub fn qa_input(question: &str, context: &str) -> String {
    format!("{}{} {}{}", tokens::QUESTION, question, tokens::CONTEXT, context)
}

/// Question-generation input for `answer` in `context`.
pub fn qg_input(context: &str, answer: &AnswerSpan, format: QgFormat) -> Result<String, FormatError> {
    let answer = checked_answer(context, answer)?;
    let highlighted = || highlight(context, answer.start, answer.end()).expect("validated span");
    Ok(match format {
        QgFormat::Highlight => format!("{}{}", tokens::GENERATE_QUESTION, highlighted()),
        QgFormat::Prepend => format!(
            "{}{} {}{}",
            tokens::ANSWER,
            answer.text,
            tokens::CONTEXT,
            context
        ),
        QgFormat::Both => format!(
            "{}{} {}{}",
            tokens::ANSWER,
            answer.text,
            tokens::CONTEXT,
            highlighted()
        ),
    })
}

/// Answer-extraction input with `sentence` highlighted.
pub fn ae_input(context: &str, sentence: SentenceSpan) -> Result<String, FormatError> {
    let highlighted = highlight(context, sentence.start, sentence.end).ok_or(FormatError::InvalidSentence {
        start: sentence.start,
        end: sentence.end,
        len: text::char_len(context),
    })?;
    Ok(format!("{}{}", tokens::EXTRACT_ANSWER, highlighted))
}

/// Question-answering sample; the target is the first reference answer.
pub fn format_qa(record: &QaRecord, context: &str) -> Result<FormattedSample, FormatError> {
    let answer = first_answer(record)?;
    Ok(FormattedSample {
        task: TaskKind::Qa,
        format: None,
        input: qa_input(&record.question, context),
        target: answer.text.clone(),
        source_id: record.id.clone(),
    })
}

/// Question-generation sample for the record's first answer.
pub fn format_qg(record: &QaRecord, context: &str, format: QgFormat) -> Result<FormattedSample, FormatError> {
    let answer = first_answer(record)?;
    Ok(FormattedSample {
        task: TaskKind::Qg,
        format: Some(format),
        input: qg_input(context, answer, format)?,
        target: record.question.clone(),
        source_id: record.id.clone(),
    })
}

/// Answers of `paragraph` grouped by covering sentence, in sentence order.
/// Within a group, answers are ordered by start offset and deduplicated by
/// exact text.
pub fn answers_by_sentence<'p>(
    paragraph: &'p Paragraph,
    spans: &[SentenceSpan],
) -> Result<Vec<(SentenceSpan, Vec<&'p AnswerSpan>)>, FormatError> {
    let mut located: Vec<(SentenceSpan, &AnswerSpan)> = Vec::new();
    for record in &paragraph.qas {
        for answer in &record.answers {
            let answer = checked_answer(&paragraph.context, answer)?;
            let sentence = find_covering_sentence(spans, answer).map_err(|_| FormatError::InvalidSpan {
                text: answer.text.clone(),
                start: answer.start,
            })?;
            located.push((sentence, answer));
        }
    }
    located.sort_by_key(|(s, a)| (*s, a.start));

    let mut groups: Vec<(SentenceSpan, Vec<&AnswerSpan>)> = Vec::new();
    for (sentence, answer) in located {
        match groups.last_mut() {
            Some((s, items)) if *s == sentence => {
                if !items.iter().any(|a| a.text == answer.text) {
                    items.push(answer);
                }
            }
            _ => groups.push((sentence, alloc::vec![answer])),
        }
    }
    Ok(groups)
}

/// Answer-extraction sample for one sentence of a paragraph, or `None` when
/// no answer of the paragraph falls in that sentence.
pub fn format_answer_extraction(
    paragraph: &Paragraph,
    sentence: SentenceSpan,
    spans: &[SentenceSpan],
    key: ParagraphKey,
) -> Result<Option<FormattedSample>, FormatError> {
    let groups = answers_by_sentence(paragraph, spans)?;
    let Some((_, answers)) = groups.into_iter().find(|(s, _)| *s == sentence) else {
        return Ok(None);
    };
    Ok(Some(ae_sample(&paragraph.context, sentence, &answers, key)?))
}

fn ae_sample(
    context: &str,
    sentence: SentenceSpan,
    answers: &[&AnswerSpan],
    key: ParagraphKey,
) -> Result<FormattedSample, FormatError> {
    let target = answers
        .iter()
        .map(|a| a.text.as_str())
        .collect::<Vec<_>>()
        .join(tokens::SEPARATOR_JOIN);
    Ok(FormattedSample {
        task: TaskKind::AnswerExtraction,
        format: None,
        input: ae_input(context, sentence)?,
        target,
        source_id: format!("{}:{}-{}", key, sentence.start, sentence.end),
    })
}

/// Splits an answer-extraction target into its answer texts.
pub fn split_answer_list(target: &str) -> Vec<&str> {
    target
        .split(tokens::SEPARATOR)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Selected tasks for [`build_multitask_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskSet(BTreeSet<TaskKind>);

impl TaskSet {
    pub fn all() -> Self {
        TaskKind::ALL.into_iter().collect()
    }

    pub fn contains(&self, task: TaskKind) -> bool {
        self.0.contains(&task)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = TaskKind> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<TaskKind> for TaskSet {
    fn from_iter<I: IntoIterator<Item = TaskKind>>(iter: I) -> Self {
        TaskSet(iter.into_iter().collect())
    }
}

impl FromStr for TaskSet {
    type Err = UnknownName;

    /// Comma-separated task names, e.g. `qa,qg,ae`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

/// Builds the multi-task sample list for a validated corpus.
///
/// Emits one QA and one QG sample per record (for the selected tasks) and
/// one answer-extraction sample per sentence that holds at least one
/// answer, then shuffles the whole list with a ChaCha8 stream seeded by
/// `seed`.
pub fn build_multitask_dataset(
    corpus: &Corpus,
    tasks: &TaskSet,
    format: QgFormat,
    seed: u64,
    rules: &RuleSet,
) -> Result<Vec<FormattedSample>, FormatError> {
    let mut samples = Vec::new();
    for (key, paragraph) in corpus.paragraphs() {
        for record in &paragraph.qas {
            if tasks.contains(TaskKind::Qa) {
                samples.push(format_qa(record, &paragraph.context)?);
            }
            if tasks.contains(TaskKind::Qg) {
                samples.push(format_qg(record, &paragraph.context, format)?);
            }
        }
        if tasks.contains(TaskKind::AnswerExtraction) && !paragraph.qas.is_empty() {
            let spans = split_sentences(&paragraph.context, rules);
            for (sentence, answers) in answers_by_sentence(paragraph, &spans)? {
                samples.push(ae_sample(&paragraph.context, sentence, &answers, key)?);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.shuffle(&mut rng);
    Ok(samples)
}

/// Source texts recovered from a sample input by removing its prefixes and
/// highlight tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposedInput {
    pub context: String,
    pub question: Option<String>,
    pub answer: Option<String>,
    pub highlighted: Option<String>,
}

/// Inverse of the input templates. Returns `None` if `input` does not have
/// the shape produced for `task` and `format`.
pub fn decompose_input(task: TaskKind, format: Option<QgFormat>, input: &str) -> Option<DecomposedInput> {
    fn highlighted_part(text: &str) -> Option<String> {
        let open = text.find(tokens::HIGHLIGHT_OPEN)? + tokens::HIGHLIGHT_OPEN.len();
        let close = open + text[open..].find(tokens::HIGHLIGHT_CLOSE)?;
        Some(text[open..close].to_string())
    }
    let context_sep = format!(" {}", tokens::CONTEXT);
    match (task, format) {
        (TaskKind::Qa, None) => {
            let rest = input.strip_prefix(tokens::QUESTION)?;
            let (question, context) = rest.split_once(&context_sep)?;
            Some(DecomposedInput {
                context: context.into(),
                question: Some(question.into()),
                answer: None,
                highlighted: None,
            })
        }
        (TaskKind::Qg, Some(QgFormat::Highlight)) => {
            let rest = input.strip_prefix(tokens::GENERATE_QUESTION)?;
            Some(DecomposedInput {
                context: strip_highlight(rest),
                question: None,
                answer: None,
                highlighted: Some(highlighted_part(rest)?),
            })
        }
        (TaskKind::Qg, Some(f @ (QgFormat::Prepend | QgFormat::Both))) => {
            let rest = input.strip_prefix(tokens::ANSWER)?;
            let (answer, context) = rest.split_once(&context_sep)?;
            let (context, highlighted) = if f == QgFormat::Both {
                (strip_highlight(context), Some(highlighted_part(context)?))
            } else {
                (context.into(), None)
            };
            Some(DecomposedInput {
                context,
                question: None,
                answer: Some(answer.into()),
                highlighted,
            })
        }
        (TaskKind::AnswerExtraction, None) => {
            let rest = input.strip_prefix(tokens::EXTRACT_ANSWER)?;
            Some(DecomposedInput {
                context: strip_highlight(rest),
                question: None,
                answer: None,
                highlighted: Some(highlighted_part(rest)?),
            })
        }
        _ => None,
    }
}

/// Number of highlight tokens in `text`.
pub fn highlight_count(text: &str) -> usize {
    text.matches(tokens::HIGHLIGHT).count()
}
