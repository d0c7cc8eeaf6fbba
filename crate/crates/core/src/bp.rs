//! Loopy belief propagation over the clue/cell factor graph, and greedy decoding.
//!
//! Cells are variables over 26 letters. Each slot is a factor whose potential over its cells is
//! a mixture: a weight per candidate answer (an indicator on the exact string) plus an
//! out-of-vocabulary component whose letters are independent under the unigram letter model.
//! Messages follow the sum-product rules on this bipartite graph with a flood schedule: every
//! clue-to-cell message is recomputed from the previous cell-to-clue messages, then every
//! cell-to-clue message from the fresh clue-to-cell messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LetterLM, ALPHABET};
use crate::puzzle::{Cell, PuzzleGrid, SlotId, Solution};
use crate::qa::CandidateList;

pub type LetterDist = [f64; ALPHABET];

const UNIFORM: LetterDist = [1.0 / ALPHABET as f64; ALPHABET];

#[derive(Debug, Error, PartialEq)]
pub enum BpError {
    #[error("slot {0} has no candidate list")]
    MissingCandidates(SlotId),
    #[error("slot {slot} has length {expected} but candidate {answer:?} has length {found}")]
    WrongLength { slot: SlotId, answer: String, expected: usize, found: usize },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpConfig {
    pub max_iters: usize,
    pub epsilon: f64,
    /// Extra out-of-vocabulary weight mixed into every clue prior.
    pub lambda_oov: f64,
    /// Fraction of the previous message kept at each update.
    pub damping: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { max_iters: 25, epsilon: 1e-4, lambda_oov: 0.02, damping: 0.0 }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<(), BpError> {
        if self.max_iters == 0 {
            return Err(BpError::Config("bp.max_iters must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(BpError::Config(format!("bp.epsilon must be positive, got {}", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.lambda_oov) {
            return Err(BpError::Config(format!("bp.lambda_oov must be in [0, 1), got {}", self.lambda_oov)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(BpError::Config(format!("bp.damping must be in [0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct SlotNode {
    id: SlotId,
    /// Edge ids, one per position.
    edges: Vec<usize>,
    answers: Vec<String>,
    letters: Vec<Vec<u8>>,
    log_prior: Vec<f64>,
    log_oov_prior: f64,
}

#[derive(Debug, Clone)]
struct CellNode {
    cell: Cell,
    edges: Vec<usize>,
}

/// One slot/cell incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub slot: usize,
    pub cell: usize,
    pub position: usize,
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    slots: Vec<SlotNode>,
    cells: Vec<CellNode>,
    edges: Vec<Edge>,
    to_cell: Vec<LetterDist>,
    to_slot: Vec<LetterDist>,
    lm: LetterDist,
    log_lm: LetterDist,
    iterations: usize,
    last_delta: f64,
}

/// Builds the graph with clue priors `(1 - lambda_oov) * p(a)` per candidate and
/// `lambda_oov + (1 - lambda_oov) * oov_mass` for the out-of-vocabulary component.
/// All messages start uniform.
pub fn build_graph(
    grid: &PuzzleGrid,
    candidates: &BTreeMap<SlotId, CandidateList>,
    lm: &LetterLM,
    lambda_oov: f64,
) -> Result<FactorGraph, BpError> {
    if !(0.0..1.0).contains(&lambda_oov) {
        return Err(BpError::Config(format!("lambda_oov must be in [0, 1), got {lambda_oov}")));
    }
    let mut cell_ids: BTreeMap<Cell, usize> = BTreeMap::new();
    let mut cells: Vec<CellNode> = Vec::new();
    for cell in grid.fillable_cells() {
        cell_ids.insert(cell, cells.len());
        cells.push(CellNode { cell, edges: Vec::with_capacity(2) });
    }

    let mut slots = Vec::with_capacity(grid.slots().len());
    let mut edges = Vec::new();
    for (si, slot) in grid.slots().iter().enumerate() {
        let list = candidates.get(&slot.id).ok_or(BpError::MissingCandidates(slot.id))?;
        let mut answers = Vec::with_capacity(list.len());
        let mut letters = Vec::with_capacity(list.len());
        let mut log_prior = Vec::with_capacity(list.len());
        for c in list.candidates() {
            if c.answer.len() != slot.len() {
                return Err(BpError::WrongLength {
                    slot: slot.id,
                    answer: c.answer.clone(),
                    expected: slot.len(),
                    found: c.answer.len(),
                });
            }
            answers.push(c.answer.clone());
            letters.push(c.answer.bytes().map(|b| b - b'A').collect());
            log_prior.push(((1.0 - lambda_oov) * c.prob).ln());
        }
        let oov = lambda_oov + (1.0 - lambda_oov) * list.oov_mass();
        let mut slot_edges = Vec::with_capacity(slot.len());
        for (position, cell) in slot.cells.iter().enumerate() {
            let ci = cell_ids[cell];
            let e = edges.len();
            edges.push(Edge { slot: si, cell: ci, position });
            cells[ci].edges.push(e);
            slot_edges.push(e);
        }
        slots.push(SlotNode { id: slot.id, edges: slot_edges, answers, letters, log_prior, log_oov_prior: oov.ln() });
    }

    let lm_probs = *lm.probs();
    let mut log_lm = [0.0; ALPHABET];
    for (l, p) in log_lm.iter_mut().zip(lm_probs) {
        *l = p.ln();
    }
    let n = edges.len();
    Ok(FactorGraph {
        slots,
        cells,
        edges,
        to_cell: vec![UNIFORM; n],
        to_slot: vec![UNIFORM; n],
        lm: lm_probs,
        log_lm,
        iterations: 0,
        last_delta: f64::INFINITY,
    })
}

fn ln_dist(d: &LetterDist) -> LetterDist {
    let mut out = [0.0; ALPHABET];
    for (o, p) in out.iter_mut().zip(d) {
        *o = p.ln();
    }
    out
}

/// Exponentiates and normalizes log weights; uniform when every weight is zero.
fn normalize_log(logw: &LetterDist) -> LetterDist {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return UNIFORM;
    }
    let mut out = [0.0; ALPHABET];
    let mut z = 0.0;
    for (o, l) in out.iter_mut().zip(logw) {
        *o = (l - max).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
    out
}

fn normalize_log_vec(logw: &[f64]) -> Vec<f64> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![1.0 / logw.len() as f64; logw.len()];
    }
    let mut out: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|o| *o /= z);
    out
}

fn blend(new: &mut LetterDist, old: &LetterDist, damping: f64) -> f64 {
    let mut delta = 0.0f64;
    for (n, o) in new.iter_mut().zip(old) {
        if damping > 0.0 {
            *n = (1.0 - damping) * *n + damping * o;
        }
        delta = delta.max((*n - o).abs());
    }
    delta
}

impl FactorGraph {
    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn slot_degree(&self, slot: usize) -> usize {
        self.slots[slot].edges.len()
    }

    pub fn cell_degree(&self, cell: usize) -> usize {
        self.cells[cell].edges.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn clue_to_cell(&self, edge: usize) -> &LetterDist {
        &self.to_cell[edge]
    }

    pub fn cell_to_clue(&self, edge: usize) -> &LetterDist {
        &self.to_slot[edge]
    }

    /// True when every message in both directions sums to one within `tol`.
    pub fn messages_normalized(&self, tol: f64) -> bool {
        self.to_cell.iter().chain(&self.to_slot).all(|m| (m.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Per-position log normalizers of the out-of-vocabulary component.
    fn oov_position_logs(&self, slot: &SlotNode, incoming: &[LetterDist]) -> Vec<f64> {
        slot.edges
            .iter()
            .map(|&e| incoming[e].iter().zip(&self.lm).map(|(m, p)| m * p).sum::<f64>().ln())
            .collect()
    }

    fn clue_messages(&self, slot: &SlotNode, out: &mut [LetterDist]) {
        let len = slot.edges.len();
        let logs: Vec<LetterDist> = slot.edges.iter().map(|&e| ln_dist(&self.to_slot[e])).collect();
        let oov_logs = self.oov_position_logs(slot, &self.to_slot);

        // Log weights of every candidate with position i's incoming message left out.
        let mut excluded: Vec<Vec<f64>> = vec![Vec::with_capacity(slot.letters.len()); len];
        let mut prefix = vec![0.0; len + 1];
        for (letters, &lp) in slot.letters.iter().zip(&slot.log_prior) {
            for j in 0..len {
                prefix[j + 1] = prefix[j] + logs[j][letters[j] as usize];
            }
            let mut suffix = 0.0;
            for i in (0..len).rev() {
                excluded[i].push(lp + prefix[i] + suffix);
                suffix += logs[i][letters[i] as usize];
            }
        }
        let mut oov_prefix = vec![0.0; len + 1];
        for j in 0..len {
            oov_prefix[j + 1] = oov_prefix[j] + oov_logs[j];
        }

        let mut oov_suffix = 0.0;
        for i in (0..len).rev() {
            let oov_excl = slot.log_oov_prior + oov_prefix[i] + oov_suffix;
            oov_suffix += oov_logs[i];

            let mut max = f64::NEG_INFINITY;
            for &w in &excluded[i] {
                max = max.max(w);
            }
            for l in &self.log_lm {
                max = max.max(oov_excl + l);
            }
            let msg = &mut out[i];
            if max == f64::NEG_INFINITY {
                *msg = UNIFORM;
                continue;
            }
            let mut acc = [0.0; ALPHABET];
            for (letters, &w) in slot.letters.iter().zip(&excluded[i]) {
                acc[letters[i] as usize] += (w - max).exp();
            }
            if oov_excl > f64::NEG_INFINITY {
                for (a, l) in acc.iter_mut().zip(&self.log_lm) {
                    *a += (oov_excl + l - max).exp();
                }
            }
            let z: f64 = acc.iter().sum();
            for a in acc.iter_mut() {
                *a /= z;
            }
            *msg = acc;
        }
    }

    /// One synchronous iteration. Returns the largest absolute change of any message entry.
    pub fn step(&mut self, damping: f64) -> f64 {
        let mut new_to_cell = self.to_cell.clone();
        for slot in &self.slots {
            let mut out = vec![UNIFORM; slot.edges.len()];
            self.clue_messages(slot, &mut out);
            for (&e, m) in slot.edges.iter().zip(out) {
                new_to_cell[e] = m;
            }
        }
        let mut delta = 0.0f64;
        for (n, o) in new_to_cell.iter_mut().zip(&self.to_cell) {
            delta = delta.max(blend(n, o, damping));
        }

        let mut new_to_slot = self.to_slot.clone();
        for cell in &self.cells {
            for &e in &cell.edges {
                let mut logw = [0.0; ALPHABET];
                let mut any = false;
                for &other in cell.edges.iter().filter(|&&o| o != e) {
                    any = true;
                    for (w, m) in logw.iter_mut().zip(&new_to_cell[other]) {
                        *w += m.ln();
                    }
                }
                new_to_slot[e] = if any { normalize_log(&logw) } else { UNIFORM };
            }
        }
        for (n, o) in new_to_slot.iter_mut().zip(&self.to_slot) {
            delta = delta.max(blend(n, o, damping));
        }

        self.to_cell = new_to_cell;
        self.to_slot = new_to_slot;
        self.iterations += 1;
        self.last_delta = delta;
        delta
    }

    /// Current beliefs.
    pub fn marginals(&self, converged: bool) -> MarginalSet {
        let mut words = BTreeMap::new();
        for slot in &self.slots {
            let logs: Vec<LetterDist> = slot.edges.iter().map(|&e| ln_dist(&self.to_slot[e])).collect();
            let oov_logs = self.oov_position_logs(slot, &self.to_slot);
            let mut logw: Vec<f64> = slot
                .letters
                .iter()
                .zip(&slot.log_prior)
                .map(|(letters, lp)| lp + letters.iter().enumerate().map(|(j, &x)| logs[j][x as usize]).sum::<f64>())
                .collect();
            logw.push(slot.log_oov_prior + oov_logs.iter().sum::<f64>());
            let mut probs = normalize_log_vec(&logw);
            let oov = probs.pop().unwrap_or(0.0);
            words.insert(
                slot.id,
                WordMarginal { answers: slot.answers.iter().cloned().zip(probs).collect(), oov },
            );
        }
        let mut chars = BTreeMap::new();
        for cell in &self.cells {
            let mut logw = [0.0; ALPHABET];
            for &e in &cell.edges {
                for (w, m) in logw.iter_mut().zip(&self.to_cell[e]) {
                    *w += m.ln();
                }
            }
            chars.insert(cell.cell, normalize_log(&logw));
        }
        MarginalSet { words, chars, iterations: self.iterations, converged, final_delta: self.last_delta }
    }
}

/// Runs flood-schedule sum-product until the largest message change drops below
/// `config.epsilon` or `config.max_iters` iterations have run.
pub fn run_bp(graph: &mut FactorGraph, config: &BpConfig) -> Result<MarginalSet, BpError> {
    config.validate()?;
    let mut converged = false;
    for _ in 0..config.max_iters {
        if graph.step(config.damping) < config.epsilon {
            converged = true;
            break;
        }
    }
    Ok(graph.marginals(converged))
}

/// Belief over one slot's candidates (in candidate-list order) and the OOV component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordMarginal {
    pub answers: Vec<(String, f64)>,
    pub oov: f64,
}

impl WordMarginal {
    pub fn prob_of(&self, answer: &str) -> Option<f64> {
        self.answers.iter().find(|(a, _)| a == answer).map(|&(_, p)| p)
    }

    pub fn total(&self) -> f64 {
        self.answers.iter().map(|(_, p)| p).sum::<f64>() + self.oov
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub words: BTreeMap<SlotId, WordMarginal>,
    pub chars: BTreeMap<Cell, LetterDist>,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta: f64,
}

#[derive(Serialize)]
struct CellDump<'a> {
    row: usize,
    col: usize,
    probs: &'a LetterDist,
}

#[derive(Serialize)]
struct MarginalDump<'a> {
    iterations: usize,
    converged: bool,
    final_delta: f64,
    words: &'a BTreeMap<SlotId, WordMarginal>,
    cells: Vec<CellDump<'a>>,
}

impl MarginalSet {
    pub fn word(&self, id: SlotId) -> Option<&WordMarginal> {
        self.words.get(&id)
    }

    pub fn char_dist(&self, cell: Cell) -> Option<&LetterDist> {
        self.chars.get(&cell)
    }

    /// Marginal probability of `letter` (uppercase ASCII) at `cell`; zero for unknown cells.
    pub fn char_prob(&self, cell: Cell, letter: u8) -> f64 {
        self.chars.get(&cell).map_or(0.0, |d| d[(letter - b'A') as usize])
    }

    /// JSON debugging dump.
    pub fn to_json(&self) -> String {
        let dump = MarginalDump {
            iterations: self.iterations,
            converged: self.converged,
            final_delta: if self.final_delta.is_finite() { self.final_delta } else { f64::MAX },
            words: &self.words,
            cells: self.chars.iter().map(|(&(row, col), probs)| CellDump { row, col, probs }).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("marginal dump serializes")
    }
}

/// Repeatedly commits the open slot whose best still-consistent candidate carries the most
/// (renormalized) marginal mass, until no open slot has a consistent candidate. Cells left
/// empty take their most probable letter.
///
/// A slot's remaining candidates are renormalized together with its OOV mass. Ties go to the
/// earlier slot, and within a slot to the alphabetically first answer.
pub fn greedy_fill(grid: &PuzzleGrid, marginals: &MarginalSet) -> Solution {
    let cols = grid.cols();
    let mut committed: Vec<Option<u8>> = vec![None; grid.rows() * cols];
    let slots = grid.slots();
    let empty = WordMarginal { answers: Vec::new(), oov: 1.0 };
    let words: Vec<&WordMarginal> = slots.iter().map(|s| marginals.word(s.id).unwrap_or(&empty)).collect();
    let mut alive: Vec<Vec<bool>> = words.iter().map(|w| vec![true; w.answers.len()]).collect();
    let mut done = vec![false; slots.len()];

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (si, slot) in slots.iter().enumerate() {
            if done[si] {
                continue;
            }
            if slot.cells.iter().all(|&(r, c)| committed[r * cols + c].is_some()) {
                done[si] = true;
                continue;
            }
            let mut mass = words[si].oov;
            let mut pick: Option<usize> = None;
            for (ai, (answer, p)) in words[si].answers.iter().enumerate() {
                if !alive[si][ai] {
                    continue;
                }
                let consistent = slot
                    .cells
                    .iter()
                    .zip(answer.bytes())
                    .all(|(&(r, c), b)| committed[r * cols + c].is_none_or(|x| x == b));
                if !consistent {
                    alive[si][ai] = false;
                    continue;
                }
                mass += p;
                pick = match pick {
                    Some(bi) => {
                        let (ba, bp) = &words[si].answers[bi];
                        if *p > *bp || (*p == *bp && answer < ba) {
                            Some(ai)
                        } else {
                            Some(bi)
                        }
                    }
                    None => Some(ai),
                };
            }
            let Some(ai) = pick else { continue };
            let p = words[si].answers[ai].1;
            let value = if mass > 0.0 { p / mass } else { 0.0 };
            if best.is_none_or(|(bv, _, _)| value > bv) {
                best = Some((value, si, ai));
            }
        }
        let Some((_, si, ai)) = best else { break };
        for (&(r, c), b) in slots[si].cells.iter().zip(words[si].answers[ai].0.bytes()) {
            committed[r * cols + c] = Some(b);
        }
        done[si] = true;
    }

    for cell in grid.fillable_cells() {
        let i = grid.flat(cell);
        if committed[i].is_none() {
            let dist = marginals.char_dist(cell).unwrap_or(&UNIFORM);
            let mut arg = 0;
            for (x, &p) in dist.iter().enumerate() {
                if p > dist[arg] {
                    arg = x;
                }
            }
            committed[i] = Some(b'A' + arg as u8);
        }
    }
    Solution::from_letters(grid, committed).expect("greedy fill assigns every fillable cell")
}
