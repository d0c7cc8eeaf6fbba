//! TF-IDF retrieval over corpus clues.
//!
//! Clues are lowercased, apostrophes dropped, and split on anything that is not a letter or
//! digit. Terms are the resulting unigrams plus adjacent bigrams. Document weights are raw term
//! frequency times `ln(N / df)`; queries are scored by cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::candidates::{sort_candidates, Candidate, CandidateGenerator, CandidateList};
use super::QaError;
use crate::corpus::ClueCorpus;

const CACHE_MAGIC: &str = "gridlock-tfidf-index";
const CACHE_VERSION: u32 = 1;

/// Unigram and bigram terms of a clue, in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered: String = text.chars().filter(|&c| c != '\'' && c != '\u{2019}').collect::<String>().to_lowercase();
    let words: Vec<&str> = lowered.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let mut terms: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    terms.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    terms
}

fn term_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for t in tokenize(text) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Term {
    id: u32,
    df: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TfidfIndex {
    num_docs: usize,
    vocabulary: BTreeMap<String, Term>,
    idf: Vec<f64>,
    /// Per term id: (doc id, raw term frequency), doc ids ascending.
    postings: Vec<Vec<(u32, u32)>>,
    norms: Vec<f64>,
    doc_answer: Vec<u32>,
    answers: Vec<String>,
}

/// Builds the index; documents are corpus pairs in corpus order.
pub fn build_index(corpus: &ClueCorpus) -> Result<TfidfIndex, QaError> {
    if corpus.is_empty() {
        return Err(QaError::EmptyCorpus);
    }
    let mut answer_ids: HashMap<&str, u32> = HashMap::new();
    let mut answers = Vec::new();
    let mut doc_answer = Vec::with_capacity(corpus.len());
    let mut vocabulary: BTreeMap<String, Term> = BTreeMap::new();
    let mut postings: Vec<Vec<(u32, u32)>> = Vec::new();

    for (doc, pair) in corpus.pairs().iter().enumerate() {
        let aid = *answer_ids.entry(pair.answer.as_str()).or_insert_with(|| {
            answers.push(pair.answer.clone());
            (answers.len() - 1) as u32
        });
        doc_answer.push(aid);
        for (term, tf) in term_counts(&pair.clue) {
            let next_id = vocabulary.len() as u32;
            let entry = vocabulary.entry(term).or_insert(Term { id: next_id, df: 0 });
            if entry.id == next_id {
                postings.push(Vec::new());
            }
            entry.df += 1;
            postings[entry.id as usize].push((doc as u32, tf));
        }
    }

    let n = corpus.len() as f64;
    let mut idf = vec![0.0; postings.len()];
    for t in vocabulary.values() {
        idf[t.id as usize] = (n / t.df as f64).ln();
    }
    let mut sq = vec![0.0f64; corpus.len()];
    for (tid, plist) in postings.iter().enumerate() {
        for &(doc, tf) in plist {
            let w = tf as f64 * idf[tid];
            sq[doc as usize] += w * w;
        }
    }
    let norms = sq.into_iter().map(f64::sqrt).collect();
    Ok(TfidfIndex { num_docs: corpus.len(), vocabulary, idf, postings, norms, doc_answer, answers })
}

impl TfidfIndex {
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn document_frequency(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).map(|t| t.df)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|t| self.idf[t.id as usize])
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.vocabulary.contains_key(term)
    }

    pub fn norm(&self, doc: usize) -> f64 {
        self.norms[doc]
    }

    pub fn doc_answer(&self, doc: usize) -> &str {
        &self.answers[self.doc_answer[doc] as usize]
    }

    /// Cosine similarity of the query against every document sharing a weighted term.
    /// Result is sorted by document id.
    pub fn similarities(&self, query: &str) -> Vec<(usize, f64)> {
        let mut qnorm_sq = 0.0;
        let mut dots: HashMap<u32, f64> = HashMap::new();
        for (term, qtf) in term_counts(query) {
            let Some(t) = self.vocabulary.get(&term) else { continue };
            let idf = self.idf[t.id as usize];
            let qw = qtf as f64 * idf;
            if qw == 0.0 {
                continue;
            }
            qnorm_sq += qw * qw;
            for &(doc, tf) in &self.postings[t.id as usize] {
                *dots.entry(doc).or_insert(0.0) += qw * tf as f64 * idf;
            }
        }
        let qnorm = qnorm_sq.sqrt();
        let mut out: Vec<(usize, f64)> = dots
            .into_iter()
            .filter(|&(doc, dot)| dot > 0.0 && self.norms[doc as usize] > 0.0)
            .map(|(doc, dot)| (doc as usize, dot / (qnorm * self.norms[doc as usize])))
            .collect();
        out.sort_by_key(|&(d, _)| d);
        out
    }

    /// Best cosine per distinct answer of exactly `length` letters, best first, ties by answer.
    pub fn answer_scores(&self, query: &str, length: usize) -> Vec<(&str, f64)> {
        let mut best: HashMap<u32, f64> = HashMap::new();
        for (doc, sim) in self.similarities(query) {
            let aid = self.doc_answer[doc];
            if self.answers[aid as usize].len() != length {
                continue;
            }
            let e = best.entry(aid).or_insert(sim);
            if sim > *e {
                *e = sim;
            }
        }
        let mut scored: Vec<(&str, f64)> =
            best.into_iter().map(|(aid, s)| (self.answers[aid as usize].as_str(), s)).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored
    }

    /// Writes the index with a versioned header carrying the corpus hash.
    pub fn save(&self, path: &Path, corpus_hash: &str) -> Result<(), QaError> {
        let mut f = fs::File::create(path)?;
        writeln!(f, "{CACHE_MAGIC} v{CACHE_VERSION} {corpus_hash}")?;
        serde_json::to_writer(&mut f, self).map_err(|e| QaError::Cache(e.to_string()))?;
        Ok(())
    }

    /// Loads a cached index, or `None` if the file is missing, from another version, or was
    /// built from a different corpus.
    pub fn load_cached(path: &Path, corpus_hash: &str) -> Result<Option<Self>, QaError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let Some((header, body)) = text.split_once('\n') else { return Ok(None) };
        if header != format!("{CACHE_MAGIC} v{CACHE_VERSION} {corpus_hash}") {
            return Ok(None);
        }
        serde_json::from_str(body).map(Some).map_err(|e| QaError::Cache(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub top_k: usize,
    pub temperature: f64,
    /// Cosine scores are multiplied by this before the softmax.
    pub score_scale: f64,
    /// Probability reserved for answers outside the answer set.
    pub oov_mass: f64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig { top_k: 1000, temperature: 1.0, score_scale: 10.0, oov_mass: 0.02 }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<(), QaError> {
        if self.top_k == 0 {
            return Err(QaError::Config("qa.top_k must be at least 1".into()));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(QaError::Config(format!("qa.temperature must be positive, got {}", self.temperature)));
        }
        if !(self.score_scale > 0.0) || !self.score_scale.is_finite() {
            return Err(QaError::Config(format!("qa.score_scale must be positive, got {}", self.score_scale)));
        }
        if !(0.0..1.0).contains(&self.oov_mass) {
            return Err(QaError::Config(format!("qa.oov_mass must be in [0, 1), got {}", self.oov_mass)));
        }
        Ok(())
    }
}

/// Retrieval baseline: cosine-ranked answers, softmaxed over the retained top-k.
#[derive(Debug, Clone)]
pub struct TfidfGenerator {
    index: Arc<TfidfIndex>,
    config: QaConfig,
}

impl TfidfGenerator {
    pub fn new(index: Arc<TfidfIndex>, config: QaConfig) -> Result<Self, QaError> {
        config.validate()?;
        Ok(TfidfGenerator { index, config })
    }

    pub fn index(&self) -> &TfidfIndex {
        &self.index
    }

    pub fn config(&self) -> &QaConfig {
        &self.config
    }
}

impl CandidateGenerator for TfidfGenerator {
    fn generate(&self, clue: &str, length: usize, top_k: usize) -> CandidateList {
        let mut scored = self.index.answer_scores(clue, length);
        scored.truncate(top_k);
        if scored.is_empty() {
            return CandidateList::empty();
        }
        let logits: Vec<f64> =
            scored.iter().map(|&(_, s)| s * self.config.score_scale / self.config.temperature).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let keep = 1.0 - self.config.oov_mass;
        let mut candidates: Vec<Candidate> = scored
            .iter()
            .zip(&exps)
            .map(|(&(a, _), e)| Candidate { answer: a.to_string(), prob: (keep * e / z).max(f64::MIN_POSITIVE) })
            .collect();
        sort_candidates(&mut candidates);
        CandidateList::new(candidates.into_iter().map(|c| (c.answer, c.prob)), self.config.oov_mass)
            .expect("softmax output is a valid candidate list")
    }
}
