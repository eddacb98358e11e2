//! Rule-based Turkish sentence splitting.
//!
//! Splitting is mask-then-split: every rule in a [`RuleSet`] is matched
//! against the text and each sentence terminator inside a match is masked.
//! The remaining terminators end a sentence when they (plus any trailing
//! terminators and closing quotes or brackets) are followed by whitespace
//! or the end of the text. Line breaks always end a sentence.
//!
//! Spans are half-open codepoint ranges into the original text, trimmed of
//! surrounding whitespace.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use regex_automata::meta::Regex;
use regex_automata::Input;
use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;
use crate::text::IndexedText;

/// Rules shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../rules/default.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Abbreviation,
    DateRange,
    Patronymic,
    Initial,
    Ordinal,
    Custom,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Abbreviation => "abbreviation",
            RuleKind::DateRange => "date-range",
            RuleKind::Patronymic => "patronymic",
            RuleKind::Initial => "initial",
            RuleKind::Ordinal => "ordinal",
            RuleKind::Custom => "custom",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "abbreviation" => RuleKind::Abbreviation,
            "date-range" => RuleKind::DateRange,
            "patronymic" => RuleKind::Patronymic,
            "initial" => RuleKind::Initial,
            "ordinal" => RuleKind::Ordinal,
            "custom" => RuleKind::Custom,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("line {line}: expected `kind<TAB>id<TAB>pattern`")]
    Syntax { line: usize },
    #[error("line {line}: unknown rule kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("rule `{id}`: pattern does not compile: {message}")]
    Pattern { id: String, message: String },
    #[error("rule `{id}` is defined more than once")]
    DuplicateId { id: String },
}

/// A pattern whose matches protect the terminators they contain.
#[derive(Debug, Clone)]
pub struct ProtectionRule {
    pub id: String,
    pub kind: RuleKind,
    pub pattern: String,
    regex: Regex,
}

impl ProtectionRule {
    pub fn new(id: impl Into<String>, kind: RuleKind, pattern: impl Into<String>) -> Result<Self, RuleError> {
        let id = id.into();
        let pattern = pattern.into();
        let regex = Regex::new(&pattern).map_err(|e| RuleError::Pattern {
            id: id.clone(),
            message: e.to_string(),
        })?;
        Ok(Self {
            id,
            kind,
            pattern,
            regex,
        })
    }

    /// Byte ranges of every match, including overlapping ones.
    fn matches<'t>(&'t self, text: &'t str) -> impl Iterator<Item = (usize, usize)> + 't {
        let mut at = 0;
        core::iter::from_fn(move || {
            while at <= text.len() {
                let m = self.regex.search(&Input::new(text).span(at..text.len()))?;
                // Resume one codepoint past the match start so overlapping
                // matches are still seen.
                let step = text[m.start()..].chars().next().map_or(1, char::len_utf8);
                at = m.start() + step;
                if m.end() > m.start() {
                    return Some((m.start(), m.end()));
                }
            }
            None
        })
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }
}

/// An ordered, immutable set of protection rules.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<ProtectionRule>,
}

impl RuleSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses the line-oriented rule format: `kind<TAB>id<TAB>pattern`,
    /// with `#` comments and blank lines ignored.
    pub fn parse(source: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        let mut ids = BTreeSet::new();
        for (n, raw) in source.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (Some(kind), Some(id), Some(pattern)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(RuleError::Syntax { line: n + 1 });
            };
            if id.is_empty() || pattern.is_empty() {
                return Err(RuleError::Syntax { line: n + 1 });
            }
            let kind = kind.parse().map_err(|_| RuleError::UnknownKind {
                line: n + 1,
                kind: kind.into(),
            })?;
            if !ids.insert(id.to_string()) {
                return Err(RuleError::DuplicateId { id: id.into() });
            }
            rules.push(ProtectionRule::new(id, kind, pattern)?);
        }
        Ok(Self { rules })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rule file is valid")
    }

    pub fn rules(&self) -> &[ProtectionRule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&ProtectionRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Characters that may end a sentence.
pub fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_line_break(c: char) -> bool {
    matches!(c, '\n' | '\r' | '\u{0B}' | '\u{0C}' | '\u{85}' | '\u{2028}' | '\u{2029}')
}

/// Closing quotes and brackets that stay with the sentence they close.
fn is_closer(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | ')' | ']' | '}' | '»' | '›' | '”' | '’'
    )
}

/// Codepoint mask of terminators protected by at least one rule.
fn protected_mask(indexed: &IndexedText<'_>, chars: &[char], rules: &RuleSet) -> Vec<bool> {
    let mut mask = vec![false; chars.len()];
    let text = indexed.as_str();
    for rule in &rules.rules {
        for (from, to) in rule.matches(text) {
            let first = indexed.char_at_byte(from);
            let last = indexed.char_at_byte(to);
            for i in first..last {
                if is_terminator(chars[i]) {
                    mask[i] = true;
                }
            }
        }
    }
    mask
}

/// Splits `text` into sentence spans.
pub fn split_sentences(text: &str, rules: &RuleSet) -> Vec<SentenceSpan> {
    let indexed = IndexedText::new(text);
    let chars: Vec<char> = text.chars().collect();
    let protected = protected_mask(&indexed, &chars, rules);
    let n = chars.len();

    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    let mut last = 0usize;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if is_line_break(c) {
            if let Some(start) = open.take() {
                spans.push(SentenceSpan::new(start, last + 1));
            }
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = *open.get_or_insert(i);
        if is_terminator(c) && !protected[i] {
            let mut j = i + 1;
            while j < n && is_terminator(chars[j]) {
                j += 1;
            }
            while j < n && is_closer(chars[j]) {
                j += 1;
            }
            if j == n || chars[j].is_whitespace() {
                spans.push(SentenceSpan::new(start, j));
                open = None;
            } else {
                last = j - 1;
            }
            i = j;
            continue;
        }
        last = i;
        i += 1;
    }
    if let Some(start) = open {
        spans.push(SentenceSpan::new(start, last + 1));
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("answer at codepoint {start} lies outside every sentence span")]
pub struct OffsetOutOfRange {
    pub start: usize,
}

/// The sentence containing the start of `answer`.
///
/// An answer that runs past the end of its sentence gets the merged range
/// of every span it overlaps. An answer starting in the whitespace between
/// two spans is assigned to the following span.
pub fn find_covering_sentence(
    spans: &[SentenceSpan],
    answer: &AnswerSpan,
) -> Result<SentenceSpan, OffsetOutOfRange> {
    let start = answer.start;
    let end = answer.end().max(start + 1);
    // First span whose end lies beyond the answer start.
    let first = spans.partition_point(|s| s.end <= start);
    let Some(head) = spans.get(first) else {
        return Err(OffsetOutOfRange { start });
    };
    let mut covering = *head;
    for span in &spans[first + 1..] {
        if span.start >= end {
            break;
        }
        covering.end = span.end;
    }
    Ok(covering)
}
