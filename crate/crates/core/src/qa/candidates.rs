use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::QaError;
use crate::corpus::is_canonical;

/// Summed probabilities may drift from one by at most this much.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: String,
    pub prob: f64,
}

/// Ranked answers for one clue. Probabilities are positive, sorted non-increasing (ties by
/// answer), and together with `oov_mass` sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    candidates: Vec<Candidate>,
    oov_mass: f64,
}

impl CandidateList {
    /// No candidates: all mass is out-of-vocabulary.
    pub fn empty() -> Self {
        CandidateList { candidates: Vec::new(), oov_mass: 1.0 }
    }

    /// Validates an explicit distribution. Entries are re-sorted into canonical order.
    pub fn new(
        candidates: impl IntoIterator<Item = (String, f64)>,
        oov_mass: f64,
    ) -> Result<Self, QaError> {
        let mut candidates: Vec<Candidate> =
            candidates.into_iter().map(|(answer, prob)| Candidate { answer, prob }).collect();
        sort_candidates(&mut candidates);
        let list = CandidateList { candidates, oov_mass };
        list.validate()?;
        Ok(list)
    }

    /// Scales positive weights so that they sum to `1 - oov_mass`.
    pub fn from_weights<S: Into<String>>(
        weights: impl IntoIterator<Item = (S, f64)>,
        oov_mass: f64,
    ) -> Result<Self, QaError> {
        let weights: Vec<(String, f64)> = weights.into_iter().map(|(a, w)| (a.into(), w)).collect();
        if !(0.0..=1.0).contains(&oov_mass) {
            return Err(QaError::InvalidCandidates(format!("oov_mass {oov_mass} outside [0, 1]")));
        }
        if weights.is_empty() {
            return Ok(CandidateList::empty());
        }
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(QaError::InvalidCandidates(format!("weights sum to {total}")));
        }
        let scale = (1.0 - oov_mass) / total;
        CandidateList::new(weights.into_iter().map(|(a, w)| (a, w * scale)), oov_mass)
    }

    pub fn validate(&self) -> Result<(), QaError> {
        let bad = |m: String| Err(QaError::InvalidCandidates(m));
        if !(0.0..=1.0).contains(&self.oov_mass) {
            return bad(format!("oov_mass {} outside [0, 1]", self.oov_mass));
        }
        let mut seen = HashSet::new();
        let len = self.candidates.first().map(|c| c.answer.len());
        for (i, c) in self.candidates.iter().enumerate() {
            if !is_canonical(&c.answer) {
                return bad(format!("answer {:?} is not canonical A-Z", c.answer));
            }
            if Some(c.answer.len()) != len {
                return bad(format!("answer {:?} has a different length from the rest", c.answer));
            }
            if !(c.prob > 0.0) || !c.prob.is_finite() {
                return bad(format!("answer {:?} has probability {}", c.answer, c.prob));
            }
            if !seen.insert(c.answer.as_str()) {
                return bad(format!("answer {:?} appears twice", c.answer));
            }
            if i > 0 && self.candidates[i - 1].prob < c.prob {
                return bad("probabilities are not sorted".into());
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return bad(format!("probabilities plus oov_mass sum to {total}"));
        }
        Ok(())
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn oov_mass(&self) -> f64 {
        self.oov_mass
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Length shared by every candidate, if any.
    pub fn answer_len(&self) -> Option<usize> {
        self.candidates.first().map(|c| c.answer.len())
    }

    pub fn rank_of(&self, answer: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c.answer == answer)
    }

    pub fn prob_of(&self, answer: &str) -> Option<f64> {
        self.candidates.iter().find(|c| c.answer == answer).map(|c| c.prob)
    }

    pub fn total_mass(&self) -> f64 {
        self.candidates.iter().map(|c| c.prob).sum::<f64>() + self.oov_mass
    }
}

/// Probability descending, then answer ascending.
pub(crate) fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.answer.cmp(&b.answer)));
}

/// Anything that proposes answers for a clue: the retrieval baseline here, or a neural model.
pub trait CandidateGenerator {
    fn generate(&self, clue: &str, length: usize, top_k: usize) -> CandidateList;
}

impl<G: CandidateGenerator + ?Sized> CandidateGenerator for &G {
    fn generate(&self, clue: &str, length: usize, top_k: usize) -> CandidateList {
        (**self).generate(clue, length, top_k)
    }
}
