//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use gridlock::corpus::{ClueCorpus, CluePair, SegmentationDictionary};
use gridlock::puzzle::{Cell, PuzzleGrid, SlotId, Solution};
use gridlock::qa::CandidateList;
use rand::seq::SliceRandom;
use rand::Rng;

/// A 15×15 rotationally symmetric grid with 66 slots (31 across, 35 down), all of length ≥ 3.
pub const GRID15: &str = "\
......#........
......#........
...............
##.....#.......
.....#.....#...
........#....##
...#......#....
...............
....#......#...
##....#........
...#.....#.....
.......#.....##
...............
........#......
........#......";

pub fn grid(pattern: &str) -> PuzzleGrid {
    PuzzleGrid::from_pattern(pattern, |id| format!("clue for {id}")).unwrap()
}

pub fn corpus(pairs: &[(&str, &str)]) -> ClueCorpus {
    ClueCorpus::from_pairs(pairs.iter().map(|(c, a)| CluePair {
        clue: c.to_string(),
        answer: a.to_string(),
        source: "test".into(),
        year: 2020,
    }))
    .unwrap()
}

pub fn corpus_jsonl(pairs: &[(&str, &str)]) -> String {
    pairs
        .iter()
        .map(|(c, a)| serde_json::json!({"clue": c, "answer": a, "source": "test", "year": 2020}).to_string() + "\n")
        .collect()
}

/// Best split of `s` into dictionary words found by trying all 2^(n-1) cut sets. Scores are
/// summed right to left; equal scores prefer fewer words, then the lexicographically smaller
/// word sequence.
pub fn brute_force_segment(dict: &SegmentationDictionary, s: &str) -> Option<(Vec<String>, f64)> {
    let lower = s.to_ascii_lowercase();
    let n = lower.len();
    if n == 0 {
        return None;
    }
    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    let mut spans = Vec::with_capacity(n);
    'masks: for mask in 0u32..(1 << (n - 1)) {
        spans.clear();
        let mut start = 0;
        for i in 1..=n {
            if i == n || mask & (1 << (i - 1)) != 0 {
                spans.push((start, i));
                start = i;
            }
        }
        let mut score = 0.0;
        for &(a, b) in spans.iter().rev() {
            match dict.log_prob(&lower[a..b]) {
                Some(lp) => score += lp,
                None => continue 'masks,
            }
        }
        let better = match &best {
            None => true,
            Some((bs, bscore)) => {
                score > *bscore
                    || (score == *bscore
                        && (spans.len() < bs.len()
                            || (spans.len() == bs.len()
                                && spans.iter().map(|&(a, b)| &lower[a..b]).lt(bs.iter().map(|&(a, b)| &lower[a..b])))))
            }
        };
        if better {
            best = Some((spans.clone(), score));
        }
    }
    best.map(|(spans, score)| (spans.iter().map(|&(a, b)| lower[a..b].to_string()).collect(), score))
}

/// Plain cosine similarity between dense TF-IDF vectors, computed from scratch.
pub fn dense_cosine(docs: &[&str], query: &str) -> Vec<f64> {
    let terms = |t: &str| gridlock::qa::tokenize(t);
    let n = docs.len() as f64;
    let mut df: HashMap<String, f64> = HashMap::new();
    for d in docs {
        for t in terms(d).into_iter().collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let vec_of = |text: &str| -> HashMap<String, f64> {
        let mut v: HashMap<String, f64> = HashMap::new();
        for t in terms(text) {
            if let Some(d) = df.get(&t) {
                *v.entry(t).or_default() += (n / d).ln();
            }
        }
        v
    };
    let q = vec_of(query);
    let qn = q.values().map(|x| x * x).sum::<f64>().sqrt();
    docs.iter()
        .map(|d| {
            let v = vec_of(d);
            let dn = v.values().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().map(|(t, x)| x * v.get(t).copied().unwrap_or(0.0)).sum();
            if qn == 0.0 || dn == 0.0 {
                0.0
            } else {
                dot / (qn * dn)
            }
        })
        .collect()
}

/// True when the slot/cell incidence graph has no cycle (edges = nodes − components).
pub fn is_acyclic(grid: &PuzzleGrid) -> bool {
    let cells: Vec<Cell> = grid.fillable_cells().collect();
    let ns = grid.slots().len();
    let index: BTreeMap<Cell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, ns + i)).collect();
    let mut parent: Vec<usize> = (0..ns + cells.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for (si, slot) in grid.slots().iter().enumerate() {
        for c in &slot.cells {
            let (a, b) = (find(&mut parent, si), find(&mut parent, index[c]));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
    }
    true
}

fn random_pattern<R: Rng>(rng: &mut R, rows: usize, cols: usize, block_p: f64) -> String {
    (0..rows)
        .map(|_| (0..cols).map(|_| if rng.gen_bool(block_p) { '#' } else { '.' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A random grid whose factor graph is a forest with at least one crossing.
pub fn random_tree_grid<R: Rng>(rng: &mut R) -> PuzzleGrid {
    loop {
        let rows = rng.gen_range(3..=6);
        let cols = rng.gen_range(3..=6);
        let pattern = random_pattern(rng, rows, cols, 0.45);
        let Ok(g) = PuzzleGrid::from_pattern(&pattern, |id| format!("clue {id}")) else { continue };
        let crossings = g.fillable_cells().filter(|&c| g.slots_at(c).count() == 2).count();
        if g.slots().len() >= 3 && crossings >= 2 && is_acyclic(&g) {
            return g;
        }
    }
}

fn random_word<R: Rng>(rng: &mut R, len: usize, alphabet: &[u8]) -> String {
    (0..len).map(|_| *alphabet.choose(rng).unwrap() as char).collect()
}

/// A random complete fill of `grid` over `alphabet`.
pub fn random_fill<R: Rng>(rng: &mut R, grid: &PuzzleGrid, alphabet: &[u8]) -> Solution {
    let letters = (0..grid.rows() * grid.cols())
        .map(|i| grid.is_fillable((i / grid.cols(), i % grid.cols())).then(|| *alphabet.choose(rng).unwrap()))
        .collect();
    Solution::from_letters(grid, letters).unwrap()
}

/// Closed-world candidate lists: each slot holds the answers of `worlds` plus random
/// distractors (some one letter away from a world answer), up to `max_per_slot`, with random
/// weights.
pub fn candidates_from_worlds<R: Rng>(
    rng: &mut R,
    grid: &PuzzleGrid,
    worlds: &[Solution],
    alphabet: &[u8],
    max_per_slot: usize,
) -> BTreeMap<SlotId, CandidateList> {
    grid.slots()
        .iter()
        .map(|slot| {
            let mut answers: BTreeSet<String> =
                worlds.iter().map(|w| w.answer(slot.id).unwrap().to_string()).collect();
            let target = rng.gen_range(answers.len()..=max_per_slot.max(answers.len()));
            let mut attempts = 0;
            while answers.len() < target && attempts < 100 {
                attempts += 1;
                let a = if rng.gen_bool(0.5) {
                    let base: Vec<&String> = answers.iter().collect();
                    let mut b = base.choose(rng).unwrap().as_bytes().to_vec();
                    let i = rng.gen_range(0..b.len());
                    b[i] = *alphabet.choose(rng).unwrap();
                    String::from_utf8(b).unwrap()
                } else {
                    random_word(rng, slot.len(), alphabet)
                };
                answers.insert(a);
            }
            let weights: Vec<(String, f64)> = answers.into_iter().map(|a| (a, rng.gen_range(0.05..1.0))).collect();
            (slot.id, CandidateList::from_weights(weights, 0.0).unwrap())
        })
        .collect()
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// The all-fillable n×n pattern.
pub fn full_pattern(n: usize) -> String {
    vec![".".repeat(n); n].join("\n")
}

/// Puzzles with random fills, a corpus whose clues are unique pseudo-words, and a dictionary
/// holding every true answer. `noise_per_puzzle` corpus answers per puzzle carry one wrong
/// letter at a crossing cell.
pub struct Benchmark {
    pub puzzles: Vec<gridlock::puzzle::Puzzle>,
    pub pairs: Vec<(String, String)>,
    pub dictionary: Vec<(String, f64)>,
    pub noisy_slots: usize,
}

fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    (0..7).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect()
}

pub fn synthetic_benchmark<R: Rng>(rng: &mut R, n: usize, noise_per_puzzle: usize) -> Benchmark {
    let alphabet: Vec<u8> = (b'A'..=b'Z').collect();
    let mut puzzles = Vec::new();
    let mut pairs = Vec::new();
    let mut dictionary = BTreeMap::new();
    let mut noisy_slots = 0;
    while puzzles.len() < n {
        let size = rng.gen_range(5..=7);
        let pattern = random_pattern(rng, size, size, 0.18);
        let Ok(shape) = PuzzleGrid::from_pattern(&pattern, |_| String::new()) else { continue };
        let crossing = |c: Cell| shape.slots_at(c).count() == 2;
        if shape.slots().len() < 6 || shape.slots().iter().any(|s| s.len() < 3) {
            continue;
        }
        let gold = random_fill(rng, &shape, &alphabet);
        let clues: BTreeMap<SlotId, String> =
            shape.slots().iter().map(|s| (s.id, format!("{} {}", pseudo_word(rng), pseudo_word(rng)))).collect();
        let grid = PuzzleGrid::new(
            shape.rows(),
            shape.cols(),
            (0..size * size).map(|i| shape.cell_kind((i / size, i % size))).collect(),
            clues.clone(),
            Default::default(),
        )
        .unwrap();
        let mut order: Vec<usize> = (0..grid.slots().len()).collect();
        order.shuffle(rng);
        let noisy: BTreeSet<usize> = order.into_iter().take(noise_per_puzzle).collect();
        for (si, slot) in grid.slots().iter().enumerate() {
            let answer = gold.answer(slot.id).unwrap().to_string();
            dictionary.insert(answer.to_ascii_lowercase(), 1.0);
            let mut stored = answer.clone().into_bytes();
            if noisy.contains(&si) {
                let checked: Vec<usize> = (0..slot.len()).filter(|&p| crossing(slot.cells[p])).collect();
                if let Some(&p) = checked.choose(rng) {
                    let wrong = *alphabet.iter().filter(|&&l| l != stored[p]).collect::<Vec<_>>().choose(rng).unwrap();
                    stored[p] = *wrong;
                    noisy_slots += 1;
                }
            }
            pairs.push((clues[&slot.id].clone(), String::from_utf8(stored).unwrap()));
        }
        puzzles.push(gridlock::puzzle::Puzzle { grid, solution: Some(gold) });
    }
    // Unrelated pairs so retrieval has distractors of every length.
    for _ in 0..200 {
        let len = rng.gen_range(3..=7);
        let a = random_word(rng, len, &alphabet);
        dictionary.insert(a.to_ascii_lowercase(), 1.0);
        pairs.push((format!("{} {}", pseudo_word(rng), pseudo_word(rng)), a));
    }
    Benchmark { puzzles, pairs, dictionary: dictionary.into_iter().collect(), noisy_slots }
}

impl Benchmark {
    pub fn corpus(&self) -> ClueCorpus {
        let refs: Vec<(&str, &str)> = self.pairs.iter().map(|(c, a)| (c.as_str(), a.as_str())).collect();
        corpus(&refs)
    }

    pub fn corpus_jsonl(&self) -> String {
        let refs: Vec<(&str, &str)> = self.pairs.iter().map(|(c, a)| (c.as_str(), a.as_str())).collect();
        corpus_jsonl(&refs)
    }

    pub fn dictionary(&self) -> SegmentationDictionary {
        SegmentationDictionary::from_counts(self.dictionary.iter().map(|(w, c)| (w.as_str(), *c)))
    }

    pub fn dictionary_tsv(&self) -> String {
        self.dictionary.iter().map(|(w, c)| format!("{w}\t{c}\n")).collect()
    }
}
