use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::kn::CharLm;
use super::{LsError, SecondPassScorer};
use crate::corpus::{ClueCorpus, SegmentationDictionary};
use crate::qa::{CandidateGenerator, CandidateList, QaConfig, TfidfGenerator, TfidfIndex};
use crate::segment::segment;

/// Floor added to the retrieval probability before taking its log.
pub const LOOKUP_FLOOR: f64 = 1e-4;
/// Extra log-score when the answer is the retrieval baseline's top choice.
pub const TOP1_BONUS: f64 = 1.0;
/// Per-letter log-score of an answer that does not segment.
pub const SEGMENT_FALLBACK: f64 = -6.907_755_278_982_137; // ln(1e-3)
pub const CHAR_ORDER: usize = 4;
pub const KN_DISCOUNT: f64 = 0.75;

/// Weights of the lookup, character-LM, and segmentation components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerWeights {
    pub lookup: f64,
    pub char_lm: f64,
    pub segmentation: f64,
}

impl Default for ScorerWeights {
    fn default() -> Self {
        ScorerWeights { lookup: 0.5, char_lm: 0.3, segmentation: 0.2 }
    }
}

impl From<[f64; 3]> for ScorerWeights {
    fn from([lookup, char_lm, segmentation]: [f64; 3]) -> Self {
        ScorerWeights { lookup, char_lm, segmentation }
    }
}

/// Classical second-pass scorer: a log-linear mix of clue retrieval, a character n-gram model of
/// corpus answers, and dictionary segmentation.
pub struct NgramScorer {
    retrieval: TfidfGenerator,
    char_lm: CharLm,
    dictionary: Arc<SegmentationDictionary>,
    weights: ScorerWeights,
    lists: RwLock<HashMap<(String, usize), Arc<CandidateList>>>,
}

impl NgramScorer {
    pub fn new(
        corpus: &ClueCorpus,
        index: Arc<TfidfIndex>,
        dictionary: Arc<SegmentationDictionary>,
        weights: ScorerWeights,
    ) -> Result<Self, LsError> {
        if corpus.is_empty() {
            return Err(LsError::EmptyCorpus);
        }
        let w = [weights.lookup, weights.char_lm, weights.segmentation];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(LsError::Weights(w));
        }
        let retrieval = TfidfGenerator::new(index, QaConfig::default()).expect("default retrieval config is valid");
        let char_lm = CharLm::train(corpus.answer_set().iter().map(String::as_str), CHAR_ORDER, KN_DISCOUNT);
        Ok(NgramScorer { retrieval, char_lm, dictionary, weights, lists: RwLock::new(HashMap::new()) })
    }

    fn list(&self, clue: &str, len: usize) -> Arc<CandidateList> {
        let key = (clue.to_string(), len);
        if let Some(l) = self.lists.read().expect("scorer cache lock").get(&key) {
            return Arc::clone(l);
        }
        let k = self.retrieval.config().top_k;
        let list = Arc::new(self.retrieval.generate(clue, len, k));
        self.lists.write().expect("scorer cache lock").entry(key).or_insert(list).clone()
    }

    /// Retrieval component: `ln(floor + p)` plus a bonus for the top-ranked answer.
    pub fn lookup_score(&self, clue: &str, answer: &str) -> f64 {
        let list = self.list(clue, answer.len());
        let p = list.prob_of(answer).unwrap_or(0.0);
        let bonus = if list.rank_of(answer) == Some(0) { TOP1_BONUS } else { 0.0 };
        (LOOKUP_FLOOR + p).ln() + bonus
    }

    pub fn char_lm_score(&self, answer: &str) -> f64 {
        self.char_lm.log_prob(answer)
    }

    /// Best segmentation score, never below the per-letter fallback.
    pub fn segmentation_score(&self, answer: &str) -> f64 {
        let fallback = SEGMENT_FALLBACK * answer.len() as f64;
        segment(&self.dictionary, answer).map_or(fallback, |s| s.score.max(fallback))
    }
}

impl SecondPassScorer for NgramScorer {
    fn score(&self, clue: &str, answer: &str) -> f64 {
        let w = self.weights;
        let mut s = 0.0;
        if w.lookup != 0.0 {
            s += w.lookup * self.lookup_score(clue, answer);
        }
        if w.char_lm != 0.0 {
            s += w.char_lm * self.char_lm_score(answer);
        }
        if w.segmentation != 0.0 {
            s += w.segmentation * self.segmentation_score(answer);
        }
        s
    }
}
