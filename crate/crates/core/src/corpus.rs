//! Clue-answer corpus ingestion, the unigram letter model, and the segmentation dictionary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ALPHABET: usize = 26;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("{0:?} contains a character outside A-Z")]
    NonAlphabetic(String),
    #[error("dictionary line {line}: {message}")]
    Dictionary { line: usize, message: String },
    #[error("bad year range {0:?}: expected e.g. ..2019, 2020..2020 or 2021..")]
    YearRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uppercases and strips everything outside A-Z. Returns `None` when the raw answer holds
/// digits (no spelling is invented for them) or nothing survives.
pub fn canonicalize(raw: &str) -> Option<String> {
    if raw.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let s: String =
        raw.chars().filter(|c| c.is_ascii_alphabetic()).map(|c| c.to_ascii_uppercase()).collect();
    (!s.is_empty()).then_some(s)
}

pub fn is_canonical(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_uppercase())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CluePair {
    pub clue: String,
    pub answer: String,
    pub source: String,
    pub year: i64,
}

/// Inclusive year filter; either bound may be open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct YearRange {
    pub min: Option<i64>,
    pub max: Option<i64>,
}

impl YearRange {
    pub fn contains(&self, year: i64) -> bool {
        self.min.is_none_or(|m| year >= m) && self.max.is_none_or(|m| year <= m)
    }
}

impl FromStr for YearRange {
    type Err = CorpusError;

    /// Accepts `A..B`, `..B`, `A..`, or a bare year `Y` meaning `Y..Y`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::YearRange(s.to_string());
        let bound = |t: &str| -> Result<Option<i64>, CorpusError> {
            let t = t.trim();
            if t.is_empty() {
                Ok(None)
            } else {
                t.parse().map(Some).map_err(|_| bad())
            }
        };
        match s.split_once("..") {
            Some((lo, hi)) => Ok(YearRange { min: bound(lo)?, max: bound(hi.trim_start_matches('='))? }),
            None => {
                let y = bound(s)?.ok_or_else(bad)?;
                Ok(YearRange { min: Some(y), max: Some(y) })
            }
        }
    }
}

/// Counts from one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct IngestReport {
    pub records: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub malformed: usize,
    pub missing_field: usize,
    pub empty_answer: usize,
    pub digit_answer: usize,
    pub out_of_year_range: usize,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} records: {} accepted, {} duplicate, {} malformed, {} missing fields, {} empty answers, \
             {} answers with digits, {} outside year range",
            self.records,
            self.accepted,
            self.duplicates,
            self.malformed,
            self.missing_field,
            self.empty_answer,
            self.digit_answer,
            self.out_of_year_range
        )
    }
}

impl IngestReport {
    pub fn skipped(&self) -> usize {
        self.records - self.accepted - self.duplicates
    }
}

/// Ingested clue-answer pairs plus the closed answer set derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClueCorpus {
    pairs: Vec<CluePair>,
    answer_set: BTreeSet<String>,
    answers_by_length: BTreeMap<usize, Vec<String>>,
}

impl ClueCorpus {
    /// Builds a corpus from already-canonical pairs, dropping exact `(clue, answer)` repeats.
    pub fn from_pairs(pairs: impl IntoIterator<Item = CluePair>) -> Result<Self, CorpusError> {
        let mut corpus = ClueCorpus::default();
        let mut seen = HashSet::new();
        for p in pairs {
            if !is_canonical(&p.answer) {
                return Err(CorpusError::NonAlphabetic(p.answer));
            }
            if seen.insert((p.clue.clone(), p.answer.clone())) {
                corpus.pairs.push(p);
            }
        }
        corpus.rebuild_answer_index();
        Ok(corpus)
    }

    fn rebuild_answer_index(&mut self) {
        self.answer_set = self.pairs.iter().map(|p| p.answer.clone()).collect();
        self.answers_by_length.clear();
        for a in &self.answer_set {
            self.answers_by_length.entry(a.len()).or_default().push(a.clone());
        }
    }

    pub fn pairs(&self) -> &[CluePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn answer_set(&self) -> &BTreeSet<String> {
        &self.answer_set
    }

    pub fn contains_answer(&self, answer: &str) -> bool {
        self.answer_set.contains(answer)
    }

    pub fn answers_of_length(&self, len: usize) -> &[String] {
        self.answers_by_length.get(&len).map_or(&[], Vec::as_slice)
    }

    /// SHA-256 over the pair list, used to key on-disk caches.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.pairs {
            h.update(p.clue.as_bytes());
            h.update([0x1f]);
            h.update(p.answer.as_bytes());
            h.update([0x1f]);
            h.update(p.source.as_bytes());
            h.update([0x1f]);
            h.update(p.year.to_le_bytes());
            h.update([0x1e]);
        }
        hex::encode(h.finalize())
    }
}

/// Reads JSONL records `{"clue", "answer", "source", "year"}`. Bad records are counted and skipped.
pub fn ingest_pairs<R: BufRead>(reader: R) -> Result<(ClueCorpus, IngestReport), CorpusError> {
    ingest_pairs_in_range(reader, YearRange::default())
}

pub fn ingest_pairs_in_range<R: BufRead>(
    reader: R,
    years: YearRange,
) -> Result<(ClueCorpus, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let mut corpus = ClueCorpus::default();
    let mut seen = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.records += 1;
        let record: Value = match serde_json::from_str(&line) {
            Ok(v @ Value::Object(_)) => v,
            _ => {
                report.malformed += 1;
                continue;
            }
        };
        let (Some(clue), Some(raw_answer), Some(source), Some(year)) = (
            record.get("clue").and_then(Value::as_str),
            record.get("answer").and_then(Value::as_str),
            record.get("source").and_then(Value::as_str),
            record.get("year").and_then(Value::as_i64),
        ) else {
            report.missing_field += 1;
            continue;
        };
        if !years.contains(year) {
            report.out_of_year_range += 1;
            continue;
        }
        let answer = match canonicalize(raw_answer) {
            Some(a) => a,
            None if raw_answer.chars().any(|c| c.is_ascii_digit()) => {
                report.digit_answer += 1;
                continue;
            }
            None => {
                report.empty_answer += 1;
                continue;
            }
        };
        if !seen.insert((clue.to_string(), answer.clone())) {
            report.duplicates += 1;
            continue;
        }
        report.accepted += 1;
        corpus.pairs.push(CluePair { clue: clue.to_string(), answer, source: source.to_string(), year });
    }
    corpus.rebuild_answer_index();
    Ok((corpus, report))
}

/// Add-one-smoothed unigram distribution over the 26 letters.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterLM {
    probs: [f64; ALPHABET],
}

impl LetterLM {
    pub fn uniform() -> Self {
        LetterLM { probs: [1.0 / ALPHABET as f64; ALPHABET] }
    }

    /// Normalizes arbitrary positive weights. Intended for tests and hand-built models.
    pub fn from_weights(weights: [f64; ALPHABET]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut probs = weights;
        probs.iter_mut().for_each(|p| *p /= total);
        LetterLM { probs }
    }

    pub fn probs(&self) -> &[f64; ALPHABET] {
        &self.probs
    }

    /// Probability of an uppercase ASCII letter.
    pub fn prob(&self, letter: u8) -> f64 {
        self.probs[(letter - b'A') as usize]
    }
}

pub fn build_letter_lm(corpus: &ClueCorpus) -> Result<LetterLM, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut counts = [1u64; ALPHABET];
    let mut total = ALPHABET as u64;
    for p in corpus.pairs() {
        for b in p.answer.bytes() {
            counts[(b - b'A') as usize] += 1;
            total += 1;
        }
    }
    let mut probs = [0.0; ALPHABET];
    for (p, c) in probs.iter_mut().zip(counts) {
        *p = c as f64 / total as f64;
    }
    Ok(LetterLM { probs })
}

/// Natural-log probability of `s` as a product of independent letters.
pub fn string_letter_prob(lm: &LetterLM, s: &str) -> Result<f64, CorpusError> {
    let mut lp = 0.0;
    for b in s.bytes() {
        if !b.is_ascii_uppercase() {
            return Err(CorpusError::NonAlphabetic(s.to_string()));
        }
        lp += lm.prob(b).ln();
    }
    Ok(lp)
}

/// Lowercase words with unigram log-probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentationDictionary {
    words: HashMap<String, f64>,
    max_len: usize,
}

impl SegmentationDictionary {
    /// Builds from raw counts; words are lowercased and non-alphabetic entries dropped.
    /// Counts for repeated words accumulate.
    pub fn from_counts<S: AsRef<str>>(counts: impl IntoIterator<Item = (S, f64)>) -> Self {
        let mut raw: HashMap<String, f64> = HashMap::new();
        for (w, c) in counts {
            let w = w.as_ref().trim().to_ascii_lowercase();
            if w.is_empty() || !w.bytes().all(|b| b.is_ascii_lowercase()) || !(c > 0.0) || !c.is_finite() {
                continue;
            }
            *raw.entry(w).or_default() += c;
        }
        let total: f64 = raw.values().sum();
        let max_len = raw.keys().map(String::len).max().unwrap_or(0);
        let words = raw.into_iter().map(|(w, c)| (w, (c / total).ln())).collect();
        SegmentationDictionary { words, max_len }
    }

    /// Builds from precomputed natural-log word probabilities, used as given. Non-alphabetic
    /// words and non-finite scores are dropped.
    pub fn from_log_probs<S: AsRef<str>>(scores: impl IntoIterator<Item = (S, f64)>) -> Self {
        let words: HashMap<String, f64> = scores
            .into_iter()
            .map(|(w, lp)| (w.as_ref().trim().to_ascii_lowercase(), lp))
            .filter(|(w, lp)| !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase()) && lp.is_finite())
            .collect();
        let max_len = words.keys().map(String::len).max().unwrap_or(0);
        SegmentationDictionary { words, max_len }
    }

    /// Parses `word<TAB>count` lines. Blank lines and `#` comments are ignored; a line
    /// without a count gives the word a count of 1.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let word = parts.next().unwrap_or("").trim();
            let count = match parts.next() {
                None => 1.0,
                Some(c) => c.trim().parse::<f64>().map_err(|e| CorpusError::Dictionary {
                    line: i + 1,
                    message: format!("bad count {c:?}: {e}"),
                })?,
            };
            counts.push((word.to_string(), count));
        }
        Ok(SegmentationDictionary::from_counts(counts))
    }

    pub fn log_prob(&self, word: &str) -> Option<f64> {
        self.words.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.max_len
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, f64)> {
        self.words.iter().map(|(w, &lp)| (w.as_str(), lp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(clue: &str, answer: &str) -> String {
        serde_json::json!({"clue": clue, "answer": answer, "source": "nyt", "year": 2019}).to_string()
    }

    fn corpus_of(answers: &[&str]) -> ClueCorpus {
        ClueCorpus::from_pairs(answers.iter().enumerate().map(|(i, a)| CluePair {
            clue: format!("clue {i}"),
            answer: a.to_string(),
            source: "test".into(),
            year: 2000,
        }))
        .unwrap()
    }

    #[test]
    fn canonicalizes_answers() {
        let text = format!("{}\n{}\n", line("Architect Frank", "gehry"), line("X", "a-b c!"));
        let (corpus, report) = ingest_pairs(text.as_bytes()).unwrap();
        assert_eq!(report.accepted, 2);
        assert_eq!(corpus.pairs()[0].clue, "Architect Frank");
        assert_eq!(corpus.pairs()[0].answer, "GEHRY");
        assert_eq!(corpus.pairs()[1].answer, "ABC");
    }

    #[test]
    fn dedups_exact_pairs() {
        let text = [line("a", "x"), line("a", "x"), line("b", "x")].join("\n");
        let (corpus, report) = ingest_pairs(text.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(corpus.answer_set().len(), 1);
    }

    #[test]
    fn bad_records_are_counted_and_skipped() {
        let text = [
            r#"{"clue":"a","answer":"x","source":"s"}"#.to_string(),
            "not json".to_string(),
            line("b", "!!"),
            line("c", "4 ever"),
            line("d", "ok"),
        ]
        .join("\n");
        let (corpus, report) = ingest_pairs(text.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.missing_field, 1);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.empty_answer, 1);
        assert_eq!(report.digit_answer, 1);
        assert_eq!(report.skipped(), 4);
    }

    #[test]
    fn year_filter() {
        let rec = |y: i64| serde_json::json!({"clue": format!("c{y}"), "answer": "abc", "source": "s", "year": y});
        let text = [rec(2019), rec(2020), rec(2021)].map(|v| v.to_string()).join("\n");
        let range: YearRange = "..2019".parse().unwrap();
        let (corpus, report) = ingest_pairs_in_range(text.as_bytes(), range).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.out_of_year_range, 2);
        assert_eq!("2020".parse::<YearRange>().unwrap(), YearRange { min: Some(2020), max: Some(2020) });
        assert_eq!("2021..".parse::<YearRange>().unwrap(), YearRange { min: Some(2021), max: None });
        assert!("abc".parse::<YearRange>().is_err());
    }

    #[test]
    fn answers_by_length_index() {
        let c = corpus_of(&["CAT", "HORSE", "DOG", "CAT"]);
        assert_eq!(c.answers_of_length(3), ["CAT", "DOG"]);
        assert_eq!(c.answers_of_length(5), ["HORSE"]);
        assert!(c.answers_of_length(4).is_empty());
    }

    #[test]
    fn letter_lm_add_one() {
        let lm = build_letter_lm(&corpus_of(&["AB", "BA"])).unwrap();
        assert!((lm.prob(b'A') - 3.0 / 30.0).abs() < 1e-15);
        assert!((lm.prob(b'B') - 3.0 / 30.0).abs() < 1e-15);
        assert!((lm.prob(b'Z') - 1.0 / 30.0).abs() < 1e-15);

        let lm = build_letter_lm(&corpus_of(&["AAAA"])).unwrap();
        assert!((lm.prob(b'A') - 5.0 / 30.0).abs() < 1e-15);
        assert!((lm.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn letter_lm_rejects_empty_corpus() {
        assert!(matches!(build_letter_lm(&ClueCorpus::default()), Err(CorpusError::Empty)));
    }

    #[test]
    fn uniform_corpus_gives_near_uniform_lm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let answers: Vec<String> =
            (0..20_000).map(|_| (0..10).map(|_| (b'A' + rng.gen_range(0..26u8)) as char).collect()).collect();
        let refs: Vec<&str> = answers.iter().map(String::as_str).collect();
        let lm = build_letter_lm(&corpus_of(&refs)).unwrap();
        // Six binomial standard deviations over 200k draws.
        let n: f64 = 200_000.0;
        let tol = 6.0 * ((1.0 / 26.0) * (25.0 / 26.0) / n).sqrt();
        for p in lm.probs() {
            assert!((p - 1.0 / 26.0).abs() < tol, "{p}");
        }
    }

    #[test]
    fn string_prob_cases() {
        let lm = LetterLM::uniform();
        assert_eq!(string_letter_prob(&lm, "").unwrap(), 0.0);
        let lp = string_letter_prob(&lm, "AB").unwrap();
        assert!((lp.exp() - (1.0f64 / 26.0).powi(2)).abs() < 1e-15);
        assert!(string_letter_prob(&lm, "A1").is_err());
    }

    #[test]
    fn dictionary_parsing() {
        let d = SegmentationDictionary::parse("whale\t3\nthat\t1\n# comment\n\nStinks\t4\nbad-word\t2\n").unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.log_prob("whale").unwrap() - (3.0f64 / 8.0).ln()).abs() < 1e-12);
        assert!(d.contains("stinks"));
        assert_eq!(d.max_word_len(), 6);
        assert!(SegmentationDictionary::parse("x\tmany").is_err());
    }

    proptest! {
        #[test]
        fn string_prob_matches_product_loop(s in "[A-Z]{0,20}", w in prop::array::uniform26(0.01f64..10.0)) {
            let lm = LetterLM::from_weights(w);
            let mut prod = 1.0f64;
            for ch in s.chars() {
                prod *= lm.probs()[(ch as u8 - b'A') as usize];
            }
            let lp = string_letter_prob(&lm, &s).unwrap();
            prop_assert!(lp.is_finite());
            prop_assert!((lp.exp() - prod).abs() <= 1e-12 * prod.max(1e-300));
        }

        #[test]
        fn ingestion_is_idempotent(records in prop::collection::vec(("[a-c ]{0,6}", "[a-cA-C -]{0,5}", 1990i64..2022), 0..30)) {
            let text: String = records
                .iter()
                .map(|(c, a, y)| serde_json::json!({"clue": c, "answer": a, "source": "s", "year": y}).to_string() + "\n")
                .collect();
            let (a, ra) = ingest_pairs(text.as_bytes()).unwrap();
            let (b, rb) = ingest_pairs(text.as_bytes()).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(ra, rb);
            let distinct: BTreeSet<String> = a.pairs().iter().map(|p| p.answer.clone()).collect();
            prop_assert_eq!(&distinct, a.answer_set());
            for ans in a.answer_set() {
                prop_assert!(is_canonical(ans));
                prop_assert!(a.answers_of_length(ans.len()).contains(ans));
            }
        }
    }
}
