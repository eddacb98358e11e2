//! SQuAD v1.1-style JSON reading and writing.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};
use turqg_core::corpus::{AnswerSpan, Article, Corpus, Paragraph, QaRecord, Split};

#[derive(Debug, thiserror::Error)]
pub enum SquadError {
    #[error("malformed JSON at line {line}, column {column} (byte {position}): {message}")]
    Parse {
        line: usize,
        column: usize,
        position: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<String>,
    data: Vec<RawArticle>,
}

#[derive(Serialize, Deserialize)]
struct RawArticle {
    #[serde(default)]
    title: String,
    paragraphs: Vec<RawParagraph>,
}

#[derive(Serialize, Deserialize)]
struct RawParagraph {
    context: String,
    qas: Vec<RawQa>,
}

#[derive(Serialize, Deserialize)]
struct RawQa {
    #[serde(deserialize_with = "string_or_number")]
    id: String,
    question: String,
    answers: Vec<RawAnswer>,
}

#[derive(Serialize, Deserialize)]
struct RawAnswer {
    text: String,
    #[serde(deserialize_with = "offset")]
    answer_start: usize,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    struct V;
    impl Visitor<'_> for V {
        type Value = String;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a string or integer id")
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<String, E> {
            Ok(v.to_owned())
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<String, E> {
            Ok(v.to_string())
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<String, E> {
            Ok(v.to_string())
        }
    }
    d.deserialize_any(V)
}

// Some SQuAD derivatives store offsets as numeric strings.
fn offset<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    struct V;
    impl Visitor<'_> for V {
        type Value = usize;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a non-negative integer offset")
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<usize, E> {
            usize::try_from(v).map_err(E::custom)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<usize, E> {
            usize::try_from(v).map_err(|_| E::custom(format!("negative offset {v}")))
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<usize, E> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(E::custom(format!("invalid offset {v}")))
            }
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<usize, E> {
            v.trim().parse().map_err(|_| E::custom(format!("invalid offset {v:?}")))
        }
    }
    d.deserialize_any(V)
}

fn byte_position(raw: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = raw
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(raw.len())
}

/// Parses a SQuAD JSON document into a [`Corpus`].
///
/// Offsets are carried through as given; use
/// [`validate_and_repair_spans`](turqg_core::corpus::validate_and_repair_spans)
/// before relying on them.
pub fn parse_squad_json(raw: &[u8], name: &str, split: Split) -> Result<Corpus, SquadError> {
    let mut de = serde_json::Deserializer::from_slice(raw);
    let file: RawFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => SquadError::Schema {
                path,
                message: inner.to_string(),
            },
            _ => parse_error(raw, &inner),
        }
    })?;
    de.end().map_err(|e| parse_error(raw, &e))?;

    let mut corpus = Corpus::new(name, split);
    corpus.articles = file
        .data
        .into_iter()
        .map(|a| Article {
            title: a.title,
            paragraphs: a
                .paragraphs
                .into_iter()
                .map(|p| Paragraph {
                    context: p.context,
                    qas: p
                        .qas
                        .into_iter()
                        .map(|q| QaRecord {
                            id: q.id,
                            question: q.question,
                            answers: q
                                .answers
                                .into_iter()
                                .map(|a| AnswerSpan::new(a.text, a.answer_start))
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    Ok(corpus)
}

fn parse_error(raw: &[u8], e: &serde_json::Error) -> SquadError {
    SquadError::Parse {
        line: e.line(),
        column: e.column(),
        position: byte_position(raw, e.line(), e.column()),
        message: e.to_string(),
    }
}

/// Serializes a corpus back to SQuAD JSON. Repair flags are not part of
/// the format and are lost.
pub fn to_squad_json(corpus: &Corpus) -> String {
    let file = RawFile {
        version: None,
        data: corpus
            .articles
            .iter()
            .map(|a| RawArticle {
                title: a.title.clone(),
                paragraphs: a
                    .paragraphs
                    .iter()
                    .map(|p| RawParagraph {
                        context: p.context.clone(),
                        qas: p
                            .qas
                            .iter()
                            .map(|q| RawQa {
                                id: q.id.clone(),
                                question: q.question.clone(),
                                answers: q
                                    .answers
                                    .iter()
                                    .map(|a| RawAnswer {
                                        text: a.text.clone(),
                                        answer_start: a.start,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("corpus serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"version":"1.1","data":[{"title":"t","paragraphs":[{"context":"Ali geldi.","qas":[{"id":"q1","question":"Kim geldi?","answers":[{"text":"Ali","answer_start":0}]}]}]}]}"#;

    #[test]
    fn minimal_file() {
        let c = parse_squad_json(MINIMAL.as_bytes(), "mini", Split::Val).unwrap();
        assert_eq!(c.paragraphs().count(), 1);
        assert_eq!(c.records().count(), 1);
        assert_eq!(c.articles[0].paragraphs[0].qas[0].answers[0], AnswerSpan::new("Ali", 0));
    }

    #[test]
    fn lenient_ids_and_offsets() {
        let raw = r#"{"data":[{"paragraphs":[{"context":"abc","qas":[{"id":7,"question":"?","answers":[{"text":"b","answer_start":"1"}]}]}]}]}"#;
        let c = parse_squad_json(raw.as_bytes(), "x", Split::Train).unwrap();
        let r = c.records().next().unwrap();
        assert_eq!(r.record.id, "7");
        assert_eq!(r.record.answers[0].start, 1);
        assert_eq!(c.articles[0].title, "");
    }

    #[test]
    fn missing_field_names_path() {
        let raw = r#"{"data":[{"paragraphs":[{"context":"abc","qas":[{"id":"1","answers":[]}]}]}]}"#;
        match parse_squad_json(raw.as_bytes(), "x", Split::Train) {
            Err(SquadError::Schema { path, message }) => {
                assert_eq!(path, "data[0].paragraphs[0].qas[0]");
                assert!(message.contains("question"), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let raw = "{\"data\": [\n  {\"title\": }\n]}";
        match parse_squad_json(raw.as_bytes(), "x", Split::Train) {
            Err(SquadError::Parse { line, position, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(raw.as_bytes()[position], b'}');
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let raw = format!("{MINIMAL} x");
        assert!(matches!(
            parse_squad_json(raw.as_bytes(), "x", Split::Train),
            Err(SquadError::Parse { .. })
        ));
    }
}
