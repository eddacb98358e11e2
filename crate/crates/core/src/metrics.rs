//! Exact match, token F1, corpus BLEU-1/2 and ROUGE-L with Turkish-aware
//! normalization.
//!
//! Normalization lowercases with the Turkish dotted/dotless `i` mapping
//! (`İ`→`i`, `I`→`ı`), deletes every character in a Unicode punctuation
//! category (so `İstanbul'da` becomes `istanbulda`) and splits on
//! whitespace. No article stripping is done.
//!
//! BLEU is corpus-level: clipped n-gram matches and candidate n-gram totals
//! are pooled over all pairs before taking precisions, there is no
//! smoothing, and a zero pooled precision gives a score of 0. ROUGE-L is
//! the per-pair LCS F-measure with β = 1, averaged over pairs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("at least one reference is required")]
    NoReferences,
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("at least one candidate/reference pair is required")]
    Empty,
    #[error("BLEU order must be 1 or 2, got {0}")]
    UnsupportedOrder(usize),
    #[error("{} gold id(s) have no prediction: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
}

/// Normalized tokens of a text. Tokens are non-empty and contain no
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalizedTokens(Vec<String>);

impl NormalizedTokens {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for NormalizedTokens {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Lowercases `text` with Turkish casing rules.
pub fn turkish_lowercase(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            'I' => out.push('ı'),
            'İ' => out.push('i'),
            _ => out.extend(c.to_lowercase()),
        }
    }
    out
}

pub fn normalize(text: &str) -> NormalizedTokens {
    let cleaned: String = turkish_lowercase(text)
        .chars()
        .filter(|&c| !is_punctuation(c))
        .collect();
    NormalizedTokens(cleaned.split_whitespace().map(String::from).collect())
}

/// Whether the normalized prediction equals any normalized reference.
pub fn exact_match<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<bool, MetricError> {
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let pred = normalize(prediction);
    Ok(references.iter().any(|r| normalize(r.as_ref()) == pred))
}

fn f1_tokens(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in reference {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token-level F1 of `prediction` against any reference.
pub fn token_f1<S: AsRef<str>>(prediction: &str, references: &[S]) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let pred = normalize(prediction);
    Ok(references
        .iter()
        .map(|r| f1_tokens(&pred, &normalize(r.as_ref())))
        .fold(0.0, f64::max))
}

/// QA scores, scaled to 0..=100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaScores {
    pub n: usize,
    pub em: f64,
    pub f1: f64,
}

/// QG scores, scaled to 0..=100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgScores {
    pub n: usize,
    pub bleu1: f64,
    pub bleu2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

/// Either kind of aggregated report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricReport {
    Qa(QaScores),
    Qg(QgScores),
}

impl MetricReport {
    pub fn n(&self) -> usize {
        match self {
            MetricReport::Qa(s) => s.n,
            MetricReport::Qg(s) => s.n,
        }
    }
}

/// Mean EM and F1 of `predictions` (keyed by QA id) over every record of
/// `gold`. All answers of a record are references.
pub fn corpus_qa_scores<P>(predictions: &P, gold: &Corpus) -> Result<QaScores, MetricError>
where
    P: PredictionLookup + ?Sized,
{
    let missing: Vec<String> = gold
        .records()
        .filter(|r| predictions.prediction(&r.record.id).is_none())
        .map(|r| r.record.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricError::MissingPredictions(missing));
    }
    let (mut n, mut em, mut f1) = (0usize, 0.0f64, 0.0f64);
    for r in gold.records() {
        let prediction = predictions.prediction(&r.record.id).unwrap_or_default();
        let references: Vec<&str> = r.record.answers.iter().map(|a| a.text.as_str()).collect();
        n += 1;
        if exact_match(prediction, &references)? {
            em += 1.0;
        }
        f1 += token_f1(prediction, &references)?;
    }
    if n == 0 {
        return Ok(QaScores { n, em: 0.0, f1: 0.0 });
    }
    Ok(QaScores {
        n,
        em: 100.0 * em / n as f64,
        f1: 100.0 * f1 / n as f64,
    })
}

/// Prediction source for [`corpus_qa_scores`].
pub trait PredictionLookup {
    fn prediction(&self, id: &str) -> Option<&str>;
}

impl PredictionLookup for BTreeMap<String, String> {
    fn prediction(&self, id: &str) -> Option<&str> {
        self.get(id).map(String::as_str)
    }
}

#[cfg(feature = "std")]
impl<S: core::hash::BuildHasher> PredictionLookup for std::collections::HashMap<String, String, S> {
    fn prediction(&self, id: &str) -> Option<&str> {
        self.get(id).map(String::as_str)
    }
}

fn check_pairs<A, B>(candidates: &[A], references: &[B]) -> Result<(), MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn ngram_counts(tokens: &[String], order: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Pooled statistics for corpus BLEU.
#[derive(Debug, Clone, PartialEq)]
struct BleuStats {
    matches: Vec<usize>,
    totals: Vec<usize>,
    candidate_len: usize,
    reference_len: usize,
}

impl BleuStats {
    fn new(max_order: usize) -> Self {
        Self {
            matches: vec![0; max_order],
            totals: vec![0; max_order],
            candidate_len: 0,
            reference_len: 0,
        }
    }

    fn add(&mut self, candidate: &[String], reference: &[String]) {
        self.candidate_len += candidate.len();
        self.reference_len += reference.len();
        for order in 1..=self.matches.len() {
            let cand = ngram_counts(candidate, order);
            let refs = ngram_counts(reference, order);
            let clipped: usize = cand
                .iter()
                .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
                .sum();
            self.matches[order - 1] += clipped;
            self.totals[order - 1] += candidate.len().saturating_sub(order - 1);
        }
    }

    fn score(&self, order: usize) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut product = 1.0f64;
        for i in 0..order {
            if self.matches[i] == 0 || self.totals[i] == 0 {
                return 0.0;
            }
            product *= self.matches[i] as f64 / self.totals[i] as f64;
        }
        let geometric = match order {
            1 => product,
            2 => libm::sqrt(product),
            n => libm::pow(product, 1.0 / n as f64),
        };
        let brevity = if self.candidate_len > self.reference_len {
            1.0
        } else {
            libm::exp(1.0 - self.reference_len as f64 / self.candidate_len as f64)
        };
        brevity * geometric
    }
}

fn bleu_stats<A: AsRef<str>, B: AsRef<str>>(
    candidates: &[A],
    references: &[B],
    max_order: usize,
) -> Result<BleuStats, MetricError> {
    check_pairs(candidates, references)?;
    let mut stats = BleuStats::new(max_order);
    for (c, r) in candidates.iter().zip(references) {
        stats.add(&normalize(c.as_ref()), &normalize(r.as_ref()));
    }
    Ok(stats)
}

/// Corpus-level BLEU-`n` for `n` in {1, 2}, in `[0, 1]`.
pub fn bleu_n<A: AsRef<str>, B: AsRef<str>>(
    candidates: &[A],
    references: &[B],
    n: usize,
) -> Result<f64, MetricError> {
    if !(1..=2).contains(&n) {
        return Err(MetricError::UnsupportedOrder(n));
    }
    Ok(bleu_stats(candidates, references, n)?.score(n))
}

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diagonal = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diagonal + 1
            } else {
                above.max(row[j])
            };
            diagonal = above;
        }
    }
    row[b.len()]
}

fn rouge_l_pair(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / candidate.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean per-pair ROUGE-L F-measure, in `[0, 1]`.
pub fn rouge_l<A: AsRef<str>, B: AsRef<str>>(candidates: &[A], references: &[B]) -> Result<f64, MetricError> {
    check_pairs(candidates, references)?;
    let total: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| rouge_l_pair(&normalize(c.as_ref()), &normalize(r.as_ref())))
        .sum();
    Ok(total / candidates.len() as f64)
}

/// BLEU-1, BLEU-2 and ROUGE-L over aligned candidate/reference lists.
pub fn qg_scores<A: AsRef<str>, B: AsRef<str>>(candidates: &[A], references: &[B]) -> Result<QgScores, MetricError> {
    let stats = bleu_stats(candidates, references, 2)?;
    Ok(QgScores {
        n: candidates.len(),
        bleu1: 100.0 * stats.score(1),
        bleu2: 100.0 * stats.score(2),
        rouge_l: 100.0 * rouge_l(candidates, references)?,
    })
}
