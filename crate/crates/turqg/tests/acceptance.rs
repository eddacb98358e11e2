//! Acceptance run. Prints one `PASS`/`FAIL` line per criterion.
//!
//! Criteria that need the public datasets read them from the fetch cache
//! (`TURQG_CACHE_DIR` or the default cache directory) and try the network
//! otherwise. When the data cannot be obtained they report `FAIL` with the
//! reason but do not fail the run, unless `TURQG_ACCEPTANCE_STRICT=1`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turqg::client::RetryPolicy;
use turqg::fetch::{default_cache_dir, FetchError, Fetcher, Manifest};
use turqg::mock::{FixtureTable, MockOptions, MockServer};
use turqg::squad::parse_squad_json;
use turqg_core::corpus::{corpus_stats, validate_and_repair_spans, Corpus, Split};
use turqg_core::format::{
    build_multitask_dataset, decompose_input, highlight_count, split_answer_list, QgFormat, TaskKind, TaskSet,
};
use turqg_core::metrics::{bleu_n, corpus_qa_scores, qg_scores, rouge_l, token_f1};
use turqg_core::text::slice_chars;
use turqg_core::tokenizer::{split_sentences, RuleSet};

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;
#[path = "../../core/tests/support/segmentation.rs"]
mod segmentation;

const TOL: f64 = 1e-9;
const RANDOM_METRIC_CASES: usize = 200;
const RANDOM_STRINGS: usize = 1000;
const LOAD_BUDGET: Duration = Duration::from_secs(30);

/// (dataset, split, paragraphs, qa pairs)
const TABLE1: [(&str, Split, usize, usize); 5] = [
    ("tquad1", Split::Train, 2232, 8308),
    ("tquad1", Split::Val, 275, 892),
    ("tquad2", Split::Train, 2400, 14224),
    ("tquad2", Split::Val, 301, 1330),
    ("xquad.tr", Split::Val, 240, 1190),
];

type Verdict = Result<String, String>;

struct Criterion {
    name: &'static str,
    needs_data: bool,
    verdict: Verdict,
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fixture_corpus() -> Corpus {
    let raw = std::fs::read(data("fixture_corpus.json")).expect("fixture present");
    parse_squad_json(&raw, "fixture", Split::Val).expect("fixture parses")
}

struct Loaded {
    name: &'static str,
    split: Split,
    corpus: Corpus,
}

/// Fetches (or reads from cache) and parses every split in [`TABLE1`].
/// Returns the parsed corpora and the time spent outside downloads.
fn load_datasets() -> Result<(Vec<Loaded>, Duration), String> {
    let manifest = Manifest::builtin();
    let cache = default_cache_dir();
    let fetcher = Fetcher::new(Duration::from_secs(20), RetryPolicy::none());
    let mut out = Vec::new();
    let mut local = Duration::ZERO;
    for (name, split, _, _) in TABLE1 {
        let cached = cache.join(name).join(format!("{}.json", split.as_str()));
        let t = Instant::now();
        let was_cached = cached.exists();
        let path = match fetcher.fetch(&manifest, name, split, &cache) {
            Ok(p) => p,
            Err(e @ (FetchError::Network { .. } | FetchError::Status { .. })) => {
                return Err(format!("dataset unavailable: {name}/{}: {e}", split.as_str()));
            }
            Err(e) => return Err(format!("{name}/{}: {e}", split.as_str())),
        };
        let fetched = t.elapsed();
        let t = Instant::now();
        let raw = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let corpus = parse_squad_json(&raw, name, split).map_err(|e| format!("{name}/{}: {e}", split.as_str()))?;
        local += t.elapsed() + if was_cached { fetched } else { Duration::ZERO };
        out.push(Loaded { name, split, corpus });
    }
    Ok((out, local))
}

fn dataset_counts(loaded: &Result<(Vec<Loaded>, Duration), String>) -> Verdict {
    let (sets, elapsed) = loaded.as_ref().map_err(Clone::clone)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (l, (_, _, paragraphs, pairs)) in sets.iter().zip(TABLE1) {
        let s = corpus_stats(&l.corpus);
        let hit = s.paragraphs == paragraphs && s.qa_pairs == pairs;
        ok &= hit;
        parts.push(format!(
            "{}/{} {}/{}{}",
            l.name,
            l.split.as_str(),
            s.paragraphs,
            s.qa_pairs,
            if hit { String::new() } else { format!(" (want {paragraphs}/{pairs})") }
        ));
    }
    let timing = format!("{:.2}s excluding downloads", elapsed.as_secs_f64());
    ok &= *elapsed < LOAD_BUDGET;
    let line = format!("{}; {timing}", parts.join(", "));
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn span_integrity(loaded: &Result<(Vec<Loaded>, Duration), String>) -> Verdict {
    let (sets, _) = loaded.as_ref().map_err(Clone::clone)?;
    let log_dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("repair-logs");
    std::fs::create_dir_all(&log_dir).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for l in sets {
        let before = l.corpus.records().count();
        let (fixed, log) = validate_and_repair_spans(l.corpus.clone());
        let log_path = log_dir.join(format!("{}-{}.jsonl", l.name, l.split.as_str()));
        turqg::jsonl::write_jsonl_file(&log_path, &log.entries).map_err(|e| e.to_string())?;
        let mut spans = 0;
        for r in fixed.records() {
            for a in &r.record.answers {
                spans += 1;
                if !a.is_valid_in(&r.paragraph.context) {
                    return Err(format!("{}/{}: {} fails the substring invariant", l.name, l.split.as_str(), r.record.id));
                }
            }
        }
        let touched: BTreeSet<&str> = log.entries.iter().map(|e| e.qa_id.as_str()).collect();
        parts.push(format!(
            "{}/{} {spans} spans ok, log {} entries, {:.2}% of records logged, {} dropped",
            l.name,
            l.split.as_str(),
            log.len(),
            100.0 * touched.len() as f64 / before.max(1) as f64,
            log.dropped_records(),
        ));
    }
    Ok(format!("{}; logs in {}", parts.join("; "), log_dir.display()))
}

type Pairs = Vec<(Vec<&'static str>, Vec<&'static str>)>;

fn random_pairs(rng: &mut ChaCha8Rng) -> Pairs {
    const ALPHABET: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let alpha = rng.random_range(1..=ALPHABET.len());
    let seq = |rng: &mut ChaCha8Rng| -> Vec<&'static str> {
        let len = rng.random_range(0..=12);
        (0..len).map(|_| ALPHABET[rng.random_range(0..alpha)]).collect()
    };
    (0..rng.random_range(1..=4)).map(|_| (seq(rng), seq(rng))).collect()
}

fn metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for case in 0..RANDOM_METRIC_CASES {
        let data = random_pairs(&mut rng);
        let cands: Vec<String> = data.iter().map(|(c, _)| c.join(" ")).collect();
        let refs: Vec<String> = data.iter().map(|(_, r)| r.join(" ")).collect();
        let checks = [
            ("F1", token_f1(&cands[0], &refs[..1]), oracle::f1(&data[0].0, &data[0].1)),
            ("BLEU-1", bleu_n(&cands, &refs, 1), oracle::bleu(&data, 1)),
            ("BLEU-2", bleu_n(&cands, &refs, 2), oracle::bleu(&data, 2)),
            ("ROUGE-L", rouge_l(&cands, &refs), oracle::rouge_l(&data)),
        ];
        for (metric, got, want) in checks {
            let got = got.map_err(|e| format!("case {case}: {metric}: {e}"))?;
            let delta = (got - want).abs();
            if delta > TOL {
                return Err(format!("case {case}: {metric} {got} vs oracle {want}"));
            }
            worst = worst.max(delta);
        }
    }
    let exact = [
        ("F1", token_f1("İstanbul'da imzalandı", &["İstanbul'da"]).ok(), 2.0 / 3.0),
        ("BLEU-1", bleu_n(&["a b c"], &["a b d"], 1).ok(), 2.0 / 3.0),
        ("ROUGE-L", rouge_l(&["a b c d"], &["a c d"]).ok(), 6.0 / 7.0),
    ];
    for (metric, got, want) in exact {
        if got != Some(want) {
            return Err(format!("hand fixture {metric}: {got:?}, want {want}"));
        }
    }
    Ok(format!("{RANDOM_METRIC_CASES} random cases, max |Δ| {worst:.1e}; hand fixtures 2/3, 2/3, 6/7 exact"))
}

fn self_evaluation(extra: &[&Corpus]) -> Verdict {
    let fixture = fixture_corpus();
    let mut corpora = vec![&fixture];
    corpora.extend_from_slice(extra);
    let mut parts = Vec::new();
    for c in corpora {
        let (c, _) = validate_and_repair_spans(c.clone());
        let preds: BTreeMap<String, String> = c
            .records()
            .map(|r| (r.record.id.clone(), r.record.answers[0].text.clone()))
            .collect();
        let qa = corpus_qa_scores(&preds, &c).map_err(|e| e.to_string())?;
        let questions: Vec<&str> = c.records().map(|r| r.record.question.as_str()).collect();
        let qg = qg_scores(&questions, &questions).map_err(|e| e.to_string())?;
        let all = [qa.em, qa.f1, qg.bleu1, qg.bleu2, qg.rouge_l];
        let line = format!(
            "{}/{} n={} EM={} F1={} BLEU-1={} BLEU-2={} ROUGE-L={}",
            c.name,
            c.split.as_str(),
            qa.n, qa.em, qa.f1, qg.bleu1, qg.bleu2, qg.rouge_l
        );
        if all.iter().any(|v| *v != 100.0) {
            return Err(line);
        }
        parts.push(line);
    }
    Ok(parts.join("; "))
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 12] = [".", "?", "!", "…", " ", "\n", "\"", ")", "Ar.", "b.", "İ", "ı"];
    let len = rng.random_range(0..48);
    (0..len)
        .map(|_| match rng.random_range(0..4) {
            0 => rng.random::<char>().to_string(),
            1 => PIECES[rng.random_range(0..PIECES.len())].to_string(),
            _ => char::from(rng.random_range(b' '..=b'~')).to_string(),
        })
        .collect()
}

fn tokenizer_edges() -> Verdict {
    let rules = RuleSet::builtin();
    for (text, want) in segmentation::FIXTURES {
        let got: Vec<&str> = split_sentences(text, &rules)
            .iter()
            .map(|s| slice_chars(text, s.start, s.end).unwrap())
            .collect();
        if got != *want {
            return Err(format!("{text:?} split as {got:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..RANDOM_STRINGS {
        let text = random_text(&mut rng);
        let chars: Vec<char> = text.chars().collect();
        let spans = split_sentences(&text, &rules);
        let mut rebuilt = String::new();
        let mut at = 0;
        for s in &spans {
            if s.start < at || s.end <= s.start || s.end > chars.len() {
                return Err(format!("string {i}: bad span {s:?} in {text:?}"));
            }
            let gap: String = chars[at..s.start].iter().collect();
            if !gap.chars().all(char::is_whitespace) {
                return Err(format!("string {i}: non-space gap {gap:?} in {text:?}"));
            }
            rebuilt.push_str(&gap);
            rebuilt.extend(&chars[s.start..s.end]);
            at = s.end;
        }
        let tail: String = chars[at..].iter().collect();
        if !tail.chars().all(char::is_whitespace) {
            return Err(format!("string {i}: text after last span in {text:?}"));
        }
        rebuilt.push_str(&tail);
        if rebuilt != text {
            return Err(format!("string {i}: reconstruction differs for {text:?}"));
        }
    }
    Ok(format!(
        "{} fixtures segmented as oracled; reconstruction holds on {RANDOM_STRINGS} random strings",
        segmentation::FIXTURES.len()
    ))
}

/// Round-trip and counting invariants for every sample built from `corpus`.
fn format_invariants(corpus: &Corpus) -> Verdict {
    let rules = RuleSet::builtin();
    let (corpus, _) = validate_and_repair_spans(corpus.clone());
    let records: BTreeMap<&str, _> = corpus.records().map(|r| (r.record.id.as_str(), r)).collect();
    let paragraphs: Vec<_> = corpus.paragraphs().collect();
    let mut ae_expected = 0;
    for (_, p) in &paragraphs {
        let spans = split_sentences(&p.context, &rules);
        let covering: BTreeSet<_> = p
            .qas
            .iter()
            .flat_map(|q| &q.answers)
            .filter_map(|a| turqg_core::tokenizer::find_covering_sentence(&spans, a).ok())
            .collect();
        ae_expected += covering.len();
    }
    let mut total = 0;
    for format in QgFormat::ALL {
        let samples = build_multitask_dataset(&corpus, &TaskSet::all(), format, 42, &rules).map_err(|e| e.to_string())?;
        let want = 2 * records.len() + ae_expected;
        if samples.len() != want {
            return Err(format!("{}: {} samples, closed form gives {want}", format.as_str(), samples.len()));
        }
        total += samples.len();
        for s in &samples {
            let fail = |what: &str| format!("{} {} {}: {what}", format.as_str(), s.task.as_str(), s.source_id);
            let d = decompose_input(s.task, s.format, &s.input).ok_or_else(|| fail("template shape"))?;
            let hl = highlight_count(&s.input);
            match s.task {
                TaskKind::Qa => {
                    let r = records[s.source_id.as_str()];
                    if d.context != r.paragraph.context || d.question.as_deref() != Some(&r.record.question) || hl != 0 {
                        return Err(fail("does not strip back to question and context"));
                    }
                    if !r.record.answers.iter().any(|a| a.text == s.target) {
                        return Err(fail("target is not a gold answer"));
                    }
                }
                TaskKind::Qg => {
                    let r = records[s.source_id.as_str()];
                    let answer = &r.record.answers[0].text;
                    let (want_hl, want_answer, want_highlighted) = match format {
                        QgFormat::Prepend => (0, Some(answer), None),
                        QgFormat::Highlight => (2, None, Some(answer)),
                        QgFormat::Both => (2, Some(answer), Some(answer)),
                    };
                    if d.context != r.paragraph.context
                        || hl != want_hl
                        || d.answer.as_ref() != want_answer
                        || d.highlighted.as_ref() != want_highlighted
                        || s.target != r.record.question
                    {
                        return Err(fail("does not strip back to answer, context and question"));
                    }
                }
                TaskKind::AnswerExtraction => {
                    let (key, range) = s.source_id.split_once(':').ok_or_else(|| fail("source id"))?;
                    let (start, end) = range.split_once('-').ok_or_else(|| fail("source id"))?;
                    let (start, end): (usize, usize) = (start.parse().unwrap(), end.parse().unwrap());
                    let (_, p) = paragraphs
                        .iter()
                        .find(|(k, _)| k.to_string() == key)
                        .ok_or_else(|| fail("unknown paragraph"))?;
                    let sentence = slice_chars(&p.context, start, end);
                    if d.context != p.context || hl != 2 || d.highlighted.as_deref() != sentence {
                        return Err(fail("does not strip back to context and sentence"));
                    }
                    let sentence = sentence.unwrap();
                    if !split_answer_list(&s.target).iter().all(|a| sentence.contains(a)) {
                        return Err(fail("target answer outside the sentence"));
                    }
                }
            }
        }
    }
    Ok(format!(
        "{} records, {} AE ranges; {total} samples over 3 formats round-trip; highlight counts 0/2/2/2",
        records.len(),
        ae_expected
    ))
}

fn format_roundtrip(loaded: &Result<(Vec<Loaded>, Duration), String>) -> Verdict {
    let (sets, _) = loaded.as_ref().map_err(Clone::clone)?;
    let l = sets
        .iter()
        .find(|l| l.name == "tquad2" && l.split == Split::Val)
        .ok_or("tquad2/val not loaded")?;
    format_invariants(&l.corpus).map(|s| format!("tquad2/val: {s}"))
}

fn end_to_end() -> Verdict {
    let server = MockServer::start(
        "127.0.0.1:0",
        FixtureTable::load(&data("fixtures.json")).map_err(|e| e.to_string())?,
        MockOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("pairs-{run}.jsonl"));
        let status = Command::new(env!("CARGO_BIN_EXE_turqg"))
            .args(["generate", "--input"])
            .arg(data("contexts10.jsonl"))
            .args(["--backend", &server.url(), "--out"])
            .arg(&out)
            .env_remove("TURQG_BACKEND")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run {run}: {}", String::from_utf8_lossy(&status.stderr).trim()));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    if outputs[0] != outputs[1] {
        return Err("pairs files differ between runs".into());
    }
    let contexts: BTreeMap<String, String> = std::fs::read_to_string(data("contexts10.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["key"].as_str().unwrap().to_string(), v["context"].as_str().unwrap().to_string())
        })
        .collect();
    let text = String::from_utf8(outputs.swap_remove(0)).map_err(|e| e.to_string())?;
    let mut n = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let ctx = &contexts[v["context_key"].as_str().unwrap_or_default()];
        let answer = v["answer"].as_str().unwrap_or_default();
        let start = v["answer_span"]["start"].as_u64().unwrap_or(u64::MAX) as usize;
        let end = start.saturating_add(answer.chars().count());
        if answer.is_empty() || slice_chars(ctx, start, end) != Some(answer) {
            return Err(format!("answer {answer:?} is not a substring of {}", v["context_key"]));
        }
        n += 1;
    }
    if n == 0 {
        return Err("no pairs generated".into());
    }
    Ok(format!("{n} pairs from {} contexts, byte-identical across 2 runs", contexts.len()))
}

fn main() -> ExitCode {
    let strict = std::env::var("TURQG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let loaded = load_datasets();
    let extra: Vec<&Corpus> = match &loaded {
        Ok((sets, _)) => sets.iter().map(|l| &l.corpus).collect(),
        Err(_) => Vec::new(),
    };
    let criteria = [
        Criterion { name: "dataset-counts", needs_data: true, verdict: dataset_counts(&loaded) },
        Criterion { name: "span-integrity", needs_data: true, verdict: span_integrity(&loaded) },
        Criterion { name: "metric-oracles", needs_data: false, verdict: metric_oracles() },
        Criterion { name: "self-evaluation", needs_data: false, verdict: self_evaluation(&extra) },
        Criterion { name: "tokenizer-edges", needs_data: false, verdict: tokenizer_edges() },
        Criterion { name: "format-roundtrip", needs_data: true, verdict: format_roundtrip(&loaded) },
        Criterion { name: "e2e-determinism", needs_data: false, verdict: end_to_end() },
    ];
    let mut failed = false;
    for c in &criteria {
        match &c.verdict {
            Ok(detail) => println!("PASS {}: {detail}", c.name),
            Err(detail) => {
                println!("FAIL {}: {detail}", c.name);
                failed |= strict || !c.needs_data;
            }
        }
    }
    // Same invariants on the bundled fixture, so the checker itself is exercised offline.
    match format_invariants(&fixture_corpus()) {
        Ok(detail) => println!("note format-roundtrip on bundled fixture: {detail}"),
        Err(detail) => {
            println!("note format-roundtrip on bundled fixture failed: {detail}");
            failed = true;
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
