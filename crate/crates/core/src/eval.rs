//! Accuracy metrics, tournament scoring, and the exhaustive oracle used to check the solver.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::ALPHABET;
use crate::puzzle::{check_same_shape, Cell, PuzzleError, PuzzleGrid, SlotId, Solution};
use crate::qa::CandidateList;

/// Largest candidate-product the oracle will enumerate by default.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Puzzle(#[from] PuzzleError),
    #[error("correct_words ({correct}) exceeds word_count ({words})")]
    TooManyCorrect { correct: u64, words: u64 },
    #[error("a perfect solve cannot have {0} wrong letters")]
    PerfectWithErrors(u64),
    #[error("enumeration needs {product} joint assignments, above the cap of {cap}")]
    CapExceeded { product: u128, cap: u128 },
    #[error("no crossing-consistent assignment exists")]
    NoConsistentAssignment,
    #[error("slot {0} has out-of-vocabulary mass; the oracle is closed-world")]
    OovMass(SlotId),
    #[error("slot {0} has no candidate list")]
    MissingCandidates(SlotId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PuzzleScore {
    pub letter_acc: f64,
    pub word_acc: f64,
    pub perfect: bool,
    pub acpt_points: u64,
    pub correct_letters: usize,
    pub letters: usize,
    pub correct_words: usize,
    pub words: usize,
}

/// Compares two complete solutions cell by cell. Tournament points assume no time bonus.
pub fn score_solution_vs_gold(grid: &PuzzleGrid, sol: &Solution, gold: &Solution) -> Result<PuzzleScore, EvalError> {
    check_same_shape(grid, sol)?;
    check_same_shape(grid, gold)?;
    let mut letters = 0;
    let mut correct_letters = 0;
    for cell in grid.fillable_cells() {
        let (Some(a), Some(b)) = (sol.letter(cell), gold.letter(cell)) else {
            return Err(PuzzleError::MissingLetter { row: cell.0, col: cell.1 }.into());
        };
        letters += 1;
        if a == b {
            correct_letters += 1;
        }
    }
    let words = grid.slots().len();
    let correct_words = grid
        .slots()
        .iter()
        .filter(|s| s.cells.iter().all(|&c| sol.letter(c) == gold.letter(c)))
        .count();
    let perfect = correct_letters == letters;
    let frac = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
    let acpt_points = acpt_score(words as u64, correct_words as u64, (letters - correct_letters) as u64, 0, perfect)?;
    Ok(PuzzleScore {
        letter_acc: frac(correct_letters, letters),
        word_acc: frac(correct_words, words),
        perfect,
        acpt_points,
        correct_letters,
        letters,
        correct_words,
        words,
    })
}

/// Tournament points for one puzzle: 10 per correct word, 150 for a perfect grid, and 25 per full
/// minute left, less 25 per wrong letter, the time bonus never going below zero.
pub fn acpt_score(
    word_count: u64,
    correct_words: u64,
    wrong_letters: u64,
    minutes_remaining: u64,
    perfect: bool,
) -> Result<u64, EvalError> {
    if correct_words > word_count {
        return Err(EvalError::TooManyCorrect { correct: correct_words, words: word_count });
    }
    if perfect && wrong_letters > 0 {
        return Err(EvalError::PerfectWithErrors(wrong_letters));
    }
    let bonus = if perfect { 150 } else { 0 };
    let time = (25 * minutes_remaining).saturating_sub(25 * wrong_letters);
    Ok(10 * correct_words + bonus + time)
}

/// Full minutes in a remaining-time budget.
pub fn full_minutes(seconds_remaining: u64) -> u64 {
    seconds_remaining / 60
}

/// Totals across puzzles. Letter and word accuracy are pooled over cells and slots.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub puzzles: usize,
    pub perfect: usize,
    pub correct_words: usize,
    pub words: usize,
    pub correct_letters: usize,
    pub letters: usize,
}

impl Aggregate {
    pub fn add(&mut self, s: &PuzzleScore) {
        self.puzzles += 1;
        self.perfect += s.perfect as usize;
        self.correct_words += s.correct_words;
        self.words += s.words;
        self.correct_letters += s.correct_letters;
        self.letters += s.letters;
    }

    pub fn perfect_pct(&self) -> f64 {
        pct(self.perfect, self.puzzles)
    }

    pub fn word_pct(&self) -> f64 {
        pct(self.correct_words, self.words)
    }

    pub fn letter_pct(&self) -> f64 {
        pct(self.correct_letters, self.letters)
    }
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MaxLikelihood,
    MaxExpectedOverlap,
}

/// Exact beliefs by enumeration over crossing-consistent joint assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    /// Per slot, `(answer, probability)` in candidate-list order.
    pub words: BTreeMap<SlotId, Vec<(String, f64)>>,
    pub chars: BTreeMap<Cell, [f64; ALPHABET]>,
    /// Sum of prior products over consistent assignments.
    pub partition: f64,
    pub assignments: usize,
}

struct Enumerator<'a> {
    grid: &'a PuzzleGrid,
    lists: Vec<&'a CandidateList>,
    letters: Vec<Option<u8>>,
    choice: Vec<usize>,
}

impl<'a> Enumerator<'a> {
    fn new(grid: &'a PuzzleGrid, candidates: &'a BTreeMap<SlotId, CandidateList>, cap: u128) -> Result<Self, EvalError> {
        let mut lists = Vec::with_capacity(grid.slots().len());
        let mut product: u128 = 1;
        for slot in grid.slots() {
            let list = candidates.get(&slot.id).ok_or(EvalError::MissingCandidates(slot.id))?;
            if list.oov_mass() > 0.0 {
                return Err(EvalError::OovMass(slot.id));
            }
            product = product.saturating_mul(list.len() as u128);
            lists.push(list);
        }
        if product > cap {
            return Err(EvalError::CapExceeded { product, cap });
        }
        Ok(Enumerator {
            grid,
            lists,
            letters: vec![None; grid.rows() * grid.cols()],
            choice: vec![0; grid.slots().len()],
        })
    }

    /// Calls `visit(choice, weight)` for every consistent assignment, slots in grid order and
    /// candidates in list order.
    fn run(&mut self, visit: &mut dyn FnMut(&[usize], f64)) {
        self.descend(0, 1.0, visit);
    }

    fn descend(&mut self, si: usize, weight: f64, visit: &mut dyn FnMut(&[usize], f64)) {
        if si == self.lists.len() {
            visit(&self.choice, weight);
            return;
        }
        let slot = &self.grid.slots()[si];
        let cols = self.grid.cols();
        for (ai, cand) in self.lists[si].candidates().iter().enumerate() {
            let mut placed: Vec<usize> = Vec::with_capacity(slot.len());
            let mut ok = true;
            for (&(r, c), b) in slot.cells.iter().zip(cand.answer.bytes()) {
                let i = r * cols + c;
                match self.letters[i] {
                    Some(x) if x != b => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        self.letters[i] = Some(b);
                        placed.push(i);
                    }
                }
            }
            if ok {
                self.choice[si] = ai;
                self.descend(si + 1, weight * cand.prob, visit);
            }
            for i in placed {
                self.letters[i] = None;
            }
        }
    }

    fn solution(&self, choice: &[usize]) -> Solution {
        let cols = self.grid.cols();
        let mut letters = vec![None; self.grid.rows() * cols];
        for (si, slot) in self.grid.slots().iter().enumerate() {
            let answer = &self.lists[si].candidates()[choice[si]].answer;
            for (&(r, c), b) in slot.cells.iter().zip(answer.bytes()) {
                letters[r * cols + c] = Some(b);
            }
        }
        Solution::from_letters(self.grid, letters).expect("consistent assignment covers every cell")
    }
}

/// Exact word and letter marginals of the closed-world distribution proportional to the
/// product of slot priors over crossing-consistent assignments.
pub fn exact_marginals(
    grid: &PuzzleGrid,
    candidates: &BTreeMap<SlotId, CandidateList>,
    cap: u128,
) -> Result<ExactMarginals, EvalError> {
    let mut en = Enumerator::new(grid, candidates, cap)?;
    let slots = grid.slots();
    let mut word_mass: Vec<Vec<f64>> = en.lists.iter().map(|l| vec![0.0; l.len()]).collect();
    let cells: Vec<Cell> = grid.fillable_cells().collect();
    let mut char_mass: Vec<[f64; ALPHABET]> = vec![[0.0; ALPHABET]; grid.rows() * grid.cols()];
    let mut z = 0.0;
    let mut count = 0usize;
    let lists = en.lists.clone();
    en.run(&mut |choice, w| {
        z += w;
        count += 1;
        for (si, &ai) in choice.iter().enumerate() {
            word_mass[si][ai] += w;
            let answer = lists[si].candidates()[ai].answer.as_bytes();
            for (pos, &(r, c)) in slots[si].cells.iter().enumerate() {
                // Crossing cells are visited from both slots; count only from the first.
                if grid.slots_at((r, c)).next().map(|(s, _)| s) == Some(si) {
                    char_mass[r * grid.cols() + c][(answer[pos] - b'A') as usize] += w;
                }
            }
        }
    });
    if count == 0 || !(z > 0.0) {
        return Err(EvalError::NoConsistentAssignment);
    }
    let words = slots
        .iter()
        .enumerate()
        .map(|(si, s)| {
            let probs =
                lists[si].candidates().iter().zip(&word_mass[si]).map(|(c, m)| (c.answer.clone(), m / z)).collect();
            (s.id, probs)
        })
        .collect();
    let chars = cells
        .into_iter()
        .map(|cell| {
            let mut d = char_mass[grid.flat(cell)];
            d.iter_mut().for_each(|x| *x /= z);
            (cell, d)
        })
        .collect();
    Ok(ExactMarginals { words, chars, partition: z, assignments: count })
}

/// Best joint assignment under `objective`, found by exhaustive enumeration. Ties keep the
/// assignment enumerated first.
pub fn exact_oracle(
    grid: &PuzzleGrid,
    candidates: &BTreeMap<SlotId, CandidateList>,
    objective: Objective,
    cap: u128,
) -> Result<Solution, EvalError> {
    let mut en = Enumerator::new(grid, candidates, cap)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    match objective {
        Objective::MaxLikelihood => {
            en.run(&mut |choice, w| {
                if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
                    best = Some((w, choice.to_vec()));
                }
            });
        }
        Objective::MaxExpectedOverlap => {
            let marg = exact_marginals(grid, candidates, cap)?;
            let per_slot: Vec<Vec<f64>> = grid
                .slots()
                .iter()
                .map(|s| marg.words[&s.id].iter().map(|(_, p)| *p).collect())
                .collect();
            en.run(&mut |choice, _| {
                let overlap: f64 = choice.iter().enumerate().map(|(si, &ai)| per_slot[si][ai]).sum();
                if best.as_ref().is_none_or(|(bo, _)| overlap > *bo + 1e-12) {
                    best = Some((overlap, choice.to_vec()));
                }
            });
        }
    }
    let (_, choice) = best.ok_or(EvalError::NoConsistentAssignment)?;
    Ok(en.solution(&choice))
}

/// Product of the slot priors of `sol`'s answers, or zero if some answer is not a candidate.
pub fn assignment_likelihood(grid: &PuzzleGrid, candidates: &BTreeMap<SlotId, CandidateList>, sol: &Solution) -> f64 {
    grid.slots()
        .iter()
        .map(|s| {
            let answer = sol.answer(s.id).unwrap_or("");
            candidates.get(&s.id).and_then(|l| l.prob_of(answer)).unwrap_or(0.0)
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzle::PuzzleGrid;

    fn grid(p: &str) -> PuzzleGrid {
        PuzzleGrid::from_pattern(p, |id| format!("clue {id}")).unwrap()
    }

    fn lists(entries: &[(SlotId, &[(&str, f64)])]) -> BTreeMap<SlotId, CandidateList> {
        entries.iter().map(|(id, w)| (*id, CandidateList::from_weights(w.iter().copied(), 0.0).unwrap())).collect()
    }

    #[test]
    fn identical_solutions_score_perfect() {
        let g = grid("..\n..");
        let s = Solution::from_rows(&g, &["AB", "CD"]).unwrap();
        let sc = score_solution_vs_gold(&g, &s, &s).unwrap();
        assert_eq!((sc.letter_acc, sc.word_acc, sc.perfect), (1.0, 1.0, true));
        assert_eq!(sc.acpt_points, 40 + 150);
    }

    #[test]
    fn one_wrong_letter() {
        let g = grid("..\n..");
        let gold = Solution::from_rows(&g, &["AB", "CD"]).unwrap();
        let s = Solution::from_rows(&g, &["AB", "CX"]).unwrap();
        let sc = score_solution_vs_gold(&g, &s, &gold).unwrap();
        assert_eq!(sc.letter_acc, 0.75);
        assert_eq!(sc.word_acc, 0.5);
        assert!(!sc.perfect);
    }

    #[test]
    fn all_wrong() {
        let g = grid("..\n..");
        let gold = Solution::from_rows(&g, &["AB", "CD"]).unwrap();
        let s = Solution::from_rows(&g, &["WX", "YZ"]).unwrap();
        let sc = score_solution_vs_gold(&g, &s, &gold).unwrap();
        assert_eq!((sc.letter_acc, sc.word_acc, sc.perfect), (0.0, 0.0, false));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g = grid("..\n..");
        let g3 = grid("...");
        let a = Solution::from_rows(&g, &["AB", "CD"]).unwrap();
        let b = Solution::from_rows(&g3, &["ABC"]).unwrap();
        assert!(matches!(score_solution_vs_gold(&g, &a, &b), Err(EvalError::Puzzle(PuzzleError::GridMismatch { .. }))));
    }

    #[test]
    fn acpt_examples() {
        assert_eq!(acpt_score(78, 78, 0, 3, true).unwrap(), 1005);
        assert_eq!(acpt_score(70, 70, 0, 0, true).unwrap(), 850);
        assert_eq!(acpt_score(78, 50, 20, 10, false).unwrap(), 500);
        assert!(acpt_score(3, 4, 0, 0, false).is_err());
        assert!(acpt_score(3, 3, 1, 0, true).is_err());
        assert_eq!(full_minutes(179), 2);
    }

    #[test]
    fn oracle_single_slot() {
        let g = grid("...");
        let c = lists(&[(SlotId::across(1), &[("CAT", 0.3), ("DOG", 0.5), ("EMU", 0.2)])]);
        for obj in [Objective::MaxLikelihood, Objective::MaxExpectedOverlap] {
            let s = exact_oracle(&g, &c, obj, DEFAULT_ORACLE_CAP).unwrap();
            assert_eq!(s.answer(SlotId::across(1)), Some("DOG"));
        }
    }

    /// Three consistent fills: S1 = AB/CD (p .40), S2 = XY/ZW (.32), S3 = XY/ZV (.28).
    /// Expected overlaps: S1 1.60, S2 .6+.6+.32+.32 = 1.84, S3 1.76.
    #[test]
    fn objectives_disagree() {
        let g = grid("..\n..");
        let third = 1.0 / 3.0;
        let c = lists(&[
            (SlotId::across(1), &[("AB", 0.5), ("XY", 0.5)]),
            (SlotId::down(1), &[("AC", 0.5), ("XZ", 0.5)]),
            (SlotId::down(2), &[("BD", third), ("YW", third), ("YV", third)]),
            (SlotId::across(3), &[("CD", 0.4), ("ZW", 0.32), ("ZV", 0.28)]),
        ]);
        let m = exact_marginals(&g, &c, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(m.assignments, 3);
        let p = |id: SlotId, a: &str| m.words[&id].iter().find(|(x, _)| x == a).unwrap().1;
        assert!((p(SlotId::across(1), "AB") - 0.4).abs() < 1e-12);
        assert!((p(SlotId::across(3), "ZW") - 0.32).abs() < 1e-12);
        let ml = exact_oracle(&g, &c, Objective::MaxLikelihood, DEFAULT_ORACLE_CAP).unwrap();
        let meo = exact_oracle(&g, &c, Objective::MaxExpectedOverlap, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(crate::puzzle::render_solution(&g, &ml).unwrap(), "AB\nCD");
        assert_eq!(crate::puzzle::render_solution(&g, &meo).unwrap(), "XY\nZW");
    }

    #[test]
    fn oracle_errors() {
        let g = grid("..\n..");
        let c = lists(&[
            (SlotId::across(1), &[("AB", 1.0)]),
            (SlotId::down(1), &[("XC", 1.0)]),
            (SlotId::down(2), &[("BD", 1.0)]),
            (SlotId::across(3), &[("CD", 1.0)]),
        ]);
        assert_eq!(exact_oracle(&g, &c, Objective::MaxLikelihood, 10).unwrap_err(), EvalError::NoConsistentAssignment);
        let mut big = c.clone();
        big.insert(SlotId::across(1), CandidateList::from_weights([("AB", 1.0), ("AA", 1.0)], 0.0).unwrap());
        assert!(matches!(exact_oracle(&g, &big, Objective::MaxLikelihood, 1), Err(EvalError::CapExceeded { product: 2, cap: 1 })));
        let mut oov = c.clone();
        oov.insert(SlotId::across(1), CandidateList::from_weights([("AB", 1.0)], 0.1).unwrap());
        assert_eq!(exact_oracle(&g, &oov, Objective::MaxLikelihood, 10).unwrap_err(), EvalError::OovMass(SlotId::across(1)));
    }

    #[test]
    fn aggregate_pools_cells() {
        let mut a = Aggregate::default();
        let s1 = PuzzleScore { letter_acc: 1.0, word_acc: 1.0, perfect: true, acpt_points: 0, correct_letters: 4, letters: 4, correct_words: 4, words: 4 };
        let s2 = PuzzleScore { letter_acc: 0.5, word_acc: 0.0, perfect: false, acpt_points: 0, correct_letters: 6, letters: 12, correct_words: 0, words: 6 };
        a.add(&s1);
        a.add(&s2);
        assert_eq!(a.perfect_pct(), 50.0);
        assert!((a.letter_pct() - 62.5).abs() < 1e-12);
        assert!((a.word_pct() - 40.0).abs() < 1e-12);
    }
}
