//! Second-pass repair of a decoded grid.
//!
//! Proposals flip one or two letters. A proposal survives if every new letter is plausible under
//! the BP character marginals, or if every answer it touches still segments into dictionary words
//! (or is a known answer). Each round applies the best-scoring surviving edit; the search stops
//! when nothing improves the total second-pass score.

mod kn;
mod ngram;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::MarginalSet;
use crate::corpus::SegmentationDictionary;
use crate::puzzle::{Cell, PuzzleGrid, SlotId, Solution};
use crate::segment::segments_validly;

pub use kn::CharLm;
pub use ngram::{NgramScorer, ScorerWeights};

#[derive(Debug, Error, PartialEq)]
pub enum LsError {
    #[error("ls.threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("ls.max_rounds must be at least 1")]
    MaxRounds,
    #[error("ls.scorer_weights must be finite and non-negative, got {0:?}")]
    Weights([f64; 3]),
    #[error("the second-pass scorer needs a nonempty corpus")]
    EmptyCorpus,
    #[error("start solution is incomplete at ({row}, {col})")]
    Incomplete { row: usize, col: usize },
}

/// `log P(answer | clue)` for the second pass. Must be finite for every A–Z answer.
pub trait SecondPassScorer: Sync {
    fn score(&self, clue: &str, answer: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64 + Sync> SecondPassScorer for F {
    fn score(&self, clue: &str, answer: &str) -> f64 {
        self(clue, answer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    MarginalGate,
    SegmentationGate,
    /// Admitted by both gates.
    Both,
}

impl Provenance {
    pub fn marginal(self) -> bool {
        matches!(self, Provenance::MarginalGate | Provenance::Both)
    }

    pub fn segmentation(self) -> bool {
        matches!(self, Provenance::SegmentationGate | Provenance::Both)
    }

    fn merge(self, other: Provenance) -> Provenance {
        if self == other {
            self
        } else {
            Provenance::Both
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditProposal {
    /// One or two `(cell, new letter)` pairs in cell order.
    pub flips: Vec<(Cell, u8)>,
    /// Slots that contain a flipped cell, in slot order.
    pub affected_slots: BTreeSet<SlotId>,
    pub provenance: Provenance,
}

/// What may pass the segmentation gate: dictionary segmentations or known answers. Validity
/// checks are memoized.
pub struct Gates<'a> {
    pub dictionary: &'a SegmentationDictionary,
    pub answers: &'a BTreeSet<String>,
    memo: RefCell<HashMap<String, bool>>,
}

impl<'a> Gates<'a> {
    pub fn new(dictionary: &'a SegmentationDictionary, answers: &'a BTreeSet<String>) -> Self {
        Gates { dictionary, answers, memo: RefCell::new(HashMap::new()) }
    }

    pub fn valid_answer(&self, answer: &str) -> bool {
        if let Some(&v) = self.memo.borrow().get(answer) {
            return v;
        }
        let v = self.answers.contains(answer) || segments_validly(self.dictionary, answer);
        self.memo.borrow_mut().insert(answer.to_string(), v);
        v
    }
}

fn replaced(answer: &str, edits: &[(usize, u8)]) -> String {
    let mut b = answer.as_bytes().to_vec();
    for &(pos, l) in edits {
        b[pos] = l;
    }
    String::from_utf8(b).expect("ASCII answer")
}

/// New answers of the slots touched by `flips`, in slot order.
fn affected_answers(grid: &PuzzleGrid, current: &Solution, flips: &[(Cell, u8)]) -> BTreeMap<usize, String> {
    let mut per_slot: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
    for &(cell, l) in flips {
        for (si, pos) in grid.slots_at(cell) {
            per_slot.entry(si).or_default().push((pos, l));
        }
    }
    per_slot
        .into_iter()
        .map(|(si, edits)| {
            let id = grid.slots()[si].id;
            (si, replaced(current.answer(id).expect("complete solution"), &edits))
        })
        .collect()
}

fn letters_at(current: &Solution, cell: Cell) -> u8 {
    current.letter(cell).expect("complete solution")
}

/// All 1- and 2-letter edits admitted by at least one gate. Two-letter edits only pair cells
/// that share a slot. Order: single flips before pairs, each by cell then letter.
pub fn generate_proposals(
    grid: &PuzzleGrid,
    current: &Solution,
    marginals: &MarginalSet,
    gates: &Gates,
    threshold: f64,
) -> Vec<EditProposal> {
    let cells: Vec<Cell> = grid.fillable_cells().collect();
    let mut found: BTreeMap<Vec<(Cell, u8)>, Provenance> = BTreeMap::new();
    let mut add = |flips: Vec<(Cell, u8)>, p: Provenance| {
        found.entry(flips).and_modify(|q| *q = q.merge(p)).or_insert(p);
    };
    let alternatives = |cell: Cell| (b'A'..=b'Z').filter(move |&l| l != letters_at(current, cell));
    let marginal_ok = |cell: Cell, l: u8| marginals.char_prob(cell, l) >= threshold;

    // Single flips, plus per-slot validity of a single flip seen from each slot.
    // single_valid[(si, pos)] = letters whose flip keeps slot si valid.
    let mut single_valid: HashMap<(usize, usize), Vec<u8>> = HashMap::new();
    for &cell in &cells {
        for l in alternatives(cell) {
            if marginal_ok(cell, l) {
                add(vec![(cell, l)], Provenance::MarginalGate);
            }
            let mut all = true;
            for (si, pos) in grid.slots_at(cell) {
                let id = grid.slots()[si].id;
                let a = replaced(current.answer(id).expect("complete solution"), &[(pos, l)]);
                if gates.valid_answer(&a) {
                    single_valid.entry((si, pos)).or_default().push(l);
                } else {
                    all = false;
                }
            }
            if all {
                add(vec![(cell, l)], Provenance::SegmentationGate);
            }
        }
    }

    // Pairs within a slot.
    for (si, slot) in grid.slots().iter().enumerate() {
        for i in 0..slot.len() {
            for j in i + 1..slot.len() {
                let (ci, cj) = (slot.cells[i], slot.cells[j]);
                let (ci, cj, pi, pj) = if ci < cj { (ci, cj, i, j) } else { (cj, ci, j, i) };
                // Marginal gate.
                let mi: Vec<u8> = alternatives(ci).filter(|&l| marginal_ok(ci, l)).collect();
                let mj: Vec<u8> = alternatives(cj).filter(|&l| marginal_ok(cj, l)).collect();
                for &a in &mi {
                    for &b in &mj {
                        add(vec![(ci, a), (cj, b)], Provenance::MarginalGate);
                    }
                }
                // Segmentation gate: the crossing slots see one flip each, so their validity
                // comes from the single-flip table; this slot sees both.
                let cross_ok = |cell: Cell, l: u8| {
                    grid.slots_at(cell)
                        .filter(|&(s, _)| s != si)
                        .all(|(s, p)| single_valid.get(&(s, p)).is_some_and(|v| v.contains(&l)))
                };
                let si_answer = current.answer(slot.id).expect("complete solution");
                for a in alternatives(ci).filter(|&l| cross_ok(ci, l)) {
                    for b in alternatives(cj).filter(|&l| cross_ok(cj, l)) {
                        if gates.valid_answer(&replaced(si_answer, &[(pi, a), (pj, b)])) {
                            add(vec![(ci, a), (cj, b)], Provenance::SegmentationGate);
                        }
                    }
                }
            }
        }
    }

    let mut out: Vec<EditProposal> = found
        .into_iter()
        .map(|(flips, provenance)| {
            let affected_slots = flips
                .iter()
                .flat_map(|&(cell, _)| grid.slots_at(cell).map(|(si, _)| grid.slots()[si].id))
                .collect();
            EditProposal { flips, affected_slots, provenance }
        })
        .collect();
    out.sort_by(|a, b| a.flips.len().cmp(&b.flips.len()).then_with(|| a.flips.cmp(&b.flips)));
    out
}

/// Re-derives which gates admit `p` from scratch.
pub fn check_gates(
    grid: &PuzzleGrid,
    current: &Solution,
    marginals: &MarginalSet,
    gates: &Gates,
    threshold: f64,
    p: &EditProposal,
) -> Provenance {
    let m = p.flips.iter().all(|&(cell, l)| marginals.char_prob(cell, l) >= threshold);
    let s = affected_answers(grid, current, &p.flips).values().all(|a| gates.valid_answer(a));
    match (m, s) {
        (true, true) => Provenance::Both,
        (true, false) => Provenance::MarginalGate,
        (false, true) => Provenance::SegmentationGate,
        (false, false) => panic!("proposal admitted by no gate: {:?}", p.flips),
    }
}

/// Sum of the scorer over every slot.
pub fn score_solution<S: SecondPassScorer + ?Sized>(scorer: &S, grid: &PuzzleGrid, sol: &Solution) -> f64 {
    slot_scores(scorer, grid, sol).iter().sum()
}

fn slot_scores<S: SecondPassScorer + ?Sized>(scorer: &S, grid: &PuzzleGrid, sol: &Solution) -> Vec<f64> {
    grid.slots()
        .iter()
        .map(|s| scorer.score(grid.clue(s.id), sol.answer(s.id).expect("complete solution")))
        .collect()
}

/// Score change from applying `flips`, rescoring only the affected slots.
pub fn score_delta<S: SecondPassScorer + ?Sized>(
    scorer: &S,
    grid: &PuzzleGrid,
    current: &Solution,
    current_slot_scores: &[f64],
    flips: &[(Cell, u8)],
) -> f64 {
    affected_answers(grid, current, flips)
        .into_iter()
        .map(|(si, a)| scorer.score(grid.clue(grid.slots()[si].id), &a) - current_slot_scores[si])
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsConfig {
    pub threshold: f64,
    pub max_rounds: usize,
    /// An edit must raise the total score by more than this.
    pub min_improvement: f64,
    pub scorer_weights: [f64; 3],
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig { threshold: 0.01, max_rounds: 100, min_improvement: 1e-9, scorer_weights: [0.5, 0.3, 0.2] }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<(), LsError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(LsError::Threshold(self.threshold));
        }
        if self.max_rounds == 0 {
            return Err(LsError::MaxRounds);
        }
        if self.scorer_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LsError::Weights(self.scorer_weights));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipRecord {
    pub row: usize,
    pub col: usize,
    pub from: char,
    pub to: char,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerChange {
    pub slot: SlotId,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedEdit {
    pub round: usize,
    pub flips: Vec<FlipRecord>,
    pub provenance: Provenance,
    pub changes: Vec<AnswerChange>,
    pub delta: f64,
    pub score_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsOutcome {
    #[serde(skip)]
    pub solution: Solution,
    pub initial_score: f64,
    pub final_score: f64,
    /// Rounds run, including the final one that found no improving edit.
    pub rounds: usize,
    pub proposals_per_round: Vec<usize>,
    pub edits: Vec<AppliedEdit>,
}

impl LsOutcome {
    /// Edit log as pretty JSON.
    pub fn edits_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("edit log serializes")
    }
}

/// Hill-climbs from `start`: each round scores every gated proposal and applies the best one if
/// it strictly improves the total score (ties go to the first proposal in generation order).
pub fn local_search<S: SecondPassScorer + ?Sized>(
    grid: &PuzzleGrid,
    start: &Solution,
    marginals: &MarginalSet,
    gates: &Gates,
    scorer: &S,
    config: &LsConfig,
) -> Result<LsOutcome, LsError> {
    config.validate()?;
    for cell in grid.fillable_cells() {
        if start.letter(cell).is_none() {
            return Err(LsError::Incomplete { row: cell.0, col: cell.1 });
        }
    }
    let mut current = start.clone();
    let mut scores = slot_scores(scorer, grid, &current);
    let mut total: f64 = scores.iter().sum();
    let initial_score = total;
    let mut edits = Vec::new();
    let mut proposals_per_round = Vec::new();
    let mut rounds = 0;

    while rounds < config.max_rounds {
        rounds += 1;
        let proposals = generate_proposals(grid, &current, marginals, gates, config.threshold);
        proposals_per_round.push(proposals.len());
        let deltas: Vec<f64> =
            proposals.par_iter().map(|p| score_delta(scorer, grid, &current, &scores, &p.flips)).collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in deltas.iter().enumerate() {
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((bi, delta)) = best.filter(|&(_, d)| d > config.min_improvement) else { break };
        let p = &proposals[bi];
        let next = current.with_flips(grid, &p.flips).expect("flips target fillable cells");
        let next_scores = slot_scores(scorer, grid, &next);
        let next_total: f64 = next_scores.iter().sum();
        // The full recomputation is authoritative; stop rather than accept a non-improvement.
        if next_total <= total {
            break;
        }
        let changes = affected_answers(grid, &current, &p.flips)
            .into_iter()
            .map(|(si, after)| {
                let slot = grid.slots()[si].id;
                AnswerChange { slot, before: current.answer(slot).unwrap().to_string(), after }
            })
            .collect();
        let flips = p
            .flips
            .iter()
            .map(|&(cell, l)| FlipRecord { row: cell.0, col: cell.1, from: letters_at(&current, cell) as char, to: l as char })
            .collect();
        edits.push(AppliedEdit { round: rounds, flips, provenance: p.provenance, changes, delta, score_after: next_total });
        current = next;
        scores = next_scores;
        total = next_total;
    }

    Ok(LsOutcome { solution: current, initial_score, final_score: total, rounds, proposals_per_round, edits })
}
