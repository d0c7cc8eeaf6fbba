//! Interpolated Kneser–Ney character language model over canonical answers.

use std::collections::{HashMap, HashSet};

/// Predicted symbols: A–Z plus end-of-answer.
const SYMBOLS: usize = 27;
const END: u8 = 26;
/// Context padding; never predicted.
const START: u8 = 27;

#[derive(Debug, Clone, Default)]
struct Context {
    counts: HashMap<u8, f64>,
    total: f64,
}

/// Order-`n` model. The top order uses raw counts; lower orders use continuation counts
/// (how many distinct symbols precede an n-gram). The unigram level interpolates with uniform.
#[derive(Debug, Clone)]
pub struct CharLm {
    order: usize,
    discount: f64,
    /// `levels[k]` maps a context of `k` symbols to its next-symbol counts.
    levels: Vec<HashMap<Vec<u8>, Context>>,
}

fn symbols(answer: &str, order: usize) -> Vec<u8> {
    let mut s = vec![START; order - 1];
    s.extend(answer.bytes().map(|b| b - b'A'));
    s.push(END);
    s
}

impl CharLm {
    pub fn train<'a>(answers: impl IntoIterator<Item = &'a str>, order: usize, discount: f64) -> Self {
        assert!(order >= 1 && (0.0..1.0).contains(&discount));
        let mut top: HashMap<Vec<u8>, u64> = HashMap::new();
        for a in answers {
            let s = symbols(a, order);
            for w in s.windows(order) {
                *top.entry(w.to_vec()).or_default() += 1;
            }
        }
        let mut levels: Vec<HashMap<Vec<u8>, Context>> = vec![HashMap::new(); order];
        for (gram, &c) in &top {
            let ctx = levels[order - 1].entry(gram[..order - 1].to_vec()).or_default();
            *ctx.counts.entry(gram[order - 1]).or_default() += c as f64;
            ctx.total += c as f64;
        }
        // Continuation counts: each distinct (k+1)-gram contributes one to its k-gram suffix.
        let mut grams: Vec<Vec<u8>> = top.into_keys().collect();
        for k in (1..order).rev() {
            let mut suffixes: HashSet<Vec<u8>> = HashSet::new();
            for g in &grams {
                let suffix = g[1..].to_vec();
                let ctx = levels[k - 1].entry(suffix[..k - 1].to_vec()).or_default();
                *ctx.counts.entry(suffix[k - 1]).or_default() += 1.0;
                ctx.total += 1.0;
                suffixes.insert(suffix);
            }
            grams = suffixes.into_iter().collect();
        }
        CharLm { order, discount, levels }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn prob(&self, history: &[u8], sym: u8) -> f64 {
        let k = history.len();
        let lower = if k == 0 { 1.0 / SYMBOLS as f64 } else { self.prob(&history[1..], sym) };
        match self.levels[k].get(history) {
            Some(ctx) if ctx.total > 0.0 => {
                let c = ctx.counts.get(&sym).copied().unwrap_or(0.0);
                let types = ctx.counts.len() as f64;
                (c - self.discount).max(0.0) / ctx.total + self.discount * types / ctx.total * lower
            }
            _ => lower,
        }
    }

    /// Natural-log probability of `answer` (uppercase A–Z) followed by end-of-answer.
    pub fn log_prob(&self, answer: &str) -> f64 {
        let s = symbols(answer, self.order);
        (self.order - 1..s.len()).map(|i| self.prob(&s[i + 1 - self.order..i], s[i]).ln()).sum()
    }

    /// Next-symbol distribution after `history` (already padded).
    #[cfg(test)]
    fn distribution(&self, history: &[u8]) -> Vec<f64> {
        (0..SYMBOLS as u8).map(|s| self.prob(history, s)).collect()
    }
}
