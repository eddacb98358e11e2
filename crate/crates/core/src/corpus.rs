//! SQuAD-shaped corpus model, answer-span repair and corpus statistics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::{self, IndexedText};

/// Codepoint radius searched around a declared answer start before falling
/// back to a whole-context search.
pub const REPAIR_WINDOW: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown split `{0}` (expected `train` or `val`)")]
pub struct UnknownSplit(pub String);

impl FromStr for Split {
    type Err = UnknownSplit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" | "validation" => Ok(Split::Val),
            other => Err(UnknownSplit(other.into())),
        }
    }
}

/// An answer located in its paragraph context by codepoint offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub start: usize,
    #[serde(default)]
    pub repaired: bool,
}

impl AnswerSpan {
    pub fn new(text: impl Into<String>, start: usize) -> Self {
        Self {
            text: text.into(),
            start,
            repaired: false,
        }
    }

    /// Length of the answer text in codepoints.
    pub fn char_len(&self) -> usize {
        text::char_len(&self.text)
    }

    /// Exclusive codepoint end offset.
    pub fn end(&self) -> usize {
        self.start + self.char_len()
    }

    /// Whether `context[start..end]` equals the answer text.
    pub fn is_valid_in(&self, context: &str) -> bool {
        !self.text.is_empty()
            && text::slice_chars(context, self.start, self.end()) == Some(self.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<AnswerSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    pub qas: Vec<QaRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub split: Split,
    pub articles: Vec<Article>,
}

/// Location of a paragraph inside a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParagraphKey {
    pub article: usize,
    pub paragraph: usize,
}

impl fmt::Display for ParagraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}p{}", self.article, self.paragraph)
    }
}

/// One QA record together with its paragraph, from a flat walk of a corpus.
#[derive(Debug, Clone, Copy)]
pub struct RecordRef<'a> {
    pub key: ParagraphKey,
    pub paragraph: &'a Paragraph,
    pub record: &'a QaRecord,
}

impl Corpus {
    pub fn new(name: impl Into<String>, split: Split) -> Self {
        Self {
            name: name.into(),
            split,
            articles: Vec::new(),
        }
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = (ParagraphKey, &Paragraph)> {
        self.articles.iter().enumerate().flat_map(|(a, article)| {
            article.paragraphs.iter().enumerate().map(move |(p, para)| {
                (
                    ParagraphKey {
                        article: a,
                        paragraph: p,
                    },
                    para,
                )
            })
        })
    }

    pub fn records(&self) -> impl Iterator<Item = RecordRef<'_>> {
        self.paragraphs().flat_map(|(key, paragraph)| {
            paragraph.qas.iter().map(move |record| RecordRef {
                key,
                paragraph,
                record,
            })
        })
    }
}

/// What happened to one answer (or record) during repair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RepairAction {
    /// Found within [`REPAIR_WINDOW`] codepoints of the declared start.
    Shifted { from: usize, to: usize },
    /// Found only by searching the whole context.
    Relocated { from: usize, to: usize },
    /// Answer text not present in the context; record dropped.
    Dropped { start: usize },
    /// Record without a question or without answers; dropped.
    Malformed { reason: String },
    /// A record with the same id appeared earlier; this one was dropped.
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairEntry {
    pub qa_id: String,
    /// Index of the affected answer within its record, when the action
    /// concerns a single answer.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_text: Option<String>,
    #[serde(flatten)]
    pub action: RepairAction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairLog {
    pub entries: Vec<RepairEntry>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn dropped_records(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| {
                matches!(
                    e.action,
                    RepairAction::Dropped { .. }
                        | RepairAction::Malformed { .. }
                        | RepairAction::DuplicateId
                )
            })
            .count()
    }

    pub fn repaired_answers(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| {
                matches!(
                    e.action,
                    RepairAction::Shifted { .. } | RepairAction::Relocated { .. }
                )
            })
            .count()
    }
}

enum Located {
    Exact,
    Window(usize),
    Anywhere(usize),
    Missing,
}

fn locate(context: &IndexedText<'_>, answer: &AnswerSpan) -> Located {
    let len = answer.char_len();
    if len == 0 || len > context.len() {
        return Located::Missing;
    }
    let matches_at = |start: usize| context.slice(start, start + len) == Some(answer.text.as_str());
    if matches_at(answer.start) {
        return Located::Exact;
    }
    // Nearest offset first; on equal distance the earlier offset wins.
    for distance in 1..=REPAIR_WINDOW {
        if let Some(before) = answer.start.checked_sub(distance) {
            if matches_at(before) {
                return Located::Window(before);
            }
        }
        if matches_at(answer.start + distance) {
            return Located::Window(answer.start + distance);
        }
    }
    match text::find_chars(context.as_str(), &answer.text, 0) {
        Some(at) => Located::Anywhere(at),
        None => Located::Missing,
    }
}

/// Checks every answer span against its context and repairs or drops the
/// ones that do not line up.
///
/// Repair order per answer: exact match at the declared start, then the
/// nearest match within [`REPAIR_WINDOW`] codepoints, then the first
/// occurrence anywhere in the context. Records with an answer that cannot
/// be located, with no question or no answers, or with an id seen earlier
/// in the corpus are dropped. Every change is logged.
pub fn validate_and_repair_spans(mut corpus: Corpus) -> (Corpus, RepairLog) {
    let mut log = RepairLog::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for article in &mut corpus.articles {
        for paragraph in &mut article.paragraphs {
            let context = IndexedText::new(&paragraph.context);
            let qas = core::mem::take(&mut paragraph.qas);
            let mut kept = Vec::with_capacity(qas.len());

            'records: for mut record in qas {
                if seen.contains(&record.id) {
                    log.entries.push(RepairEntry {
                        qa_id: record.id,
                        answer_index: None,
                        answer_text: None,
                        action: RepairAction::DuplicateId,
                    });
                    continue;
                }
                let malformed = if record.question.trim().is_empty() {
                    Some("empty question")
                } else if record.answers.is_empty() {
                    Some("no answers")
                } else {
                    None
                };
                if let Some(reason) = malformed {
                    seen.insert(record.id.clone());
                    log.entries.push(RepairEntry {
                        qa_id: record.id,
                        answer_index: None,
                        answer_text: None,
                        action: RepairAction::Malformed {
                            reason: reason.into(),
                        },
                    });
                    continue;
                }

                let mut pending = Vec::new();
                for (i, answer) in record.answers.iter_mut().enumerate() {
                    let action = match locate(&context, answer) {
                        Located::Exact => continue,
                        Located::Window(to) => RepairAction::Shifted {
                            from: answer.start,
                            to,
                        },
                        Located::Anywhere(to) => RepairAction::Relocated {
                            from: answer.start,
                            to,
                        },
                        Located::Missing => {
                            seen.insert(record.id.clone());
                            log.entries.push(RepairEntry {
                                qa_id: record.id.clone(),
                                answer_index: Some(i),
                                answer_text: Some(answer.text.clone()),
                                action: RepairAction::Dropped {
                                    start: answer.start,
                                },
                            });
                            continue 'records;
                        }
                    };
                    if let RepairAction::Shifted { to, .. } | RepairAction::Relocated { to, .. } =
                        action
                    {
                        answer.start = to;
                        answer.repaired = true;
                    }
                    pending.push(RepairEntry {
                        qa_id: record.id.clone(),
                        answer_index: Some(i),
                        answer_text: Some(answer.text.clone()),
                        action,
                    });
                }
                log.entries.append(&mut pending);
                seen.insert(record.id.clone());
                kept.push(record);
            }
            paragraph.qas = kept;
        }
    }
    (corpus, log)
}

/// Corpus-level counts and averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    pub split: Split,
    pub paragraphs: usize,
    pub qa_pairs: usize,
    pub answers: usize,
    /// Mean paragraph context length in codepoints.
    pub mean_context_chars: f64,
    /// Mean answer length in whitespace-separated tokens.
    pub mean_answer_tokens: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut paragraphs = 0usize;
    let mut qa_pairs = 0usize;
    let mut answers = 0usize;
    let mut context_chars = 0usize;
    let mut answer_tokens = 0usize;
    for article in &corpus.articles {
        for paragraph in &article.paragraphs {
            paragraphs += 1;
            context_chars += text::char_len(&paragraph.context);
            for record in &paragraph.qas {
                qa_pairs += 1;
                for answer in &record.answers {
                    answers += 1;
                    answer_tokens += answer.text.split_whitespace().count();
                }
            }
        }
    }
    let mean = |total: usize, n: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    StatsReport {
        name: corpus.name.clone(),
        split: corpus.split,
        paragraphs,
        qa_pairs,
        answers,
        mean_context_chars: mean(context_chars, paragraphs),
        mean_answer_tokens: mean(answer_tokens, answers),
    }
}
