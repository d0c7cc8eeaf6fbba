//! Dictionary word segmentation of canonical answers.
//!
//! `segment` finds the highest-scoring way to cover an answer with dictionary words, where the
//! score is the sum of word unigram log-probabilities. Equal scores prefer fewer words, then the
//! alphabetically first leading word.

use std::cmp::Ordering;

use crate::corpus::SegmentationDictionary;

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub words: Vec<String>,
    pub score: f64,
}

impl Segmentation {
    /// Words joined by single spaces.
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Clone, Copy)]
struct Best {
    score: f64,
    words: usize,
    /// End (exclusive) of the first word of this suffix.
    next: usize,
}

/// Max-score segmentation of `s` into dictionary words, or `None` when no full cover exists
/// (including the empty string).
pub fn segment(dict: &SegmentationDictionary, s: &str) -> Option<Segmentation> {
    if s.is_empty() || dict.is_empty() {
        return None;
    }
    let lower = s.to_ascii_lowercase();
    let n = lower.len();
    let max_len = dict.max_word_len();
    // best[i] covers the suffix lower[i..].
    let mut best: Vec<Option<Best>> = vec![None; n + 1];
    best[n] = Some(Best { score: 0.0, words: 0, next: n });
    for i in (0..n).rev() {
        let mut cur: Option<Best> = None;
        for j in (i + 1)..=n.min(i + max_len) {
            let Some(rest) = best[j] else { continue };
            let Some(lp) = dict.log_prob(&lower[i..j]) else { continue };
            let cand = Best { score: lp + rest.score, words: rest.words + 1, next: j };
            let better = match cur {
                None => true,
                Some(c) => match cand.score.partial_cmp(&c.score) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => {
                        cand.words < c.words
                            || (cand.words == c.words && lower[i..cand.next] < lower[i..c.next])
                    }
                    _ => false,
                },
            };
            if better {
                cur = Some(cand);
            }
        }
        best[i] = cur;
    }

    let root = best[0]?;
    let mut words = Vec::with_capacity(root.words);
    let mut i = 0;
    while i < n {
        let b = best[i].expect("reachable suffix has a segmentation");
        words.push(lower[i..b.next].to_string());
        i = b.next;
    }
    Some(Segmentation { words, score: root.score })
}

/// True iff `s` can be fully covered by dictionary words.
pub fn segments_validly(dict: &SegmentationDictionary, s: &str) -> bool {
    segment(dict, s).is_some()
}
