//! The full pipeline: retrieval candidates → belief propagation → greedy fill → local search.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{build_graph, greedy_fill, run_bp, BpConfig, BpError, MarginalSet};
use crate::corpus::{build_letter_lm, ClueCorpus, CorpusError, LetterLM, SegmentationDictionary};
use crate::local_search::{local_search, Gates, LsConfig, LsError, LsOutcome, NgramScorer};
use crate::puzzle::{PuzzleGrid, SlotId, Solution};
use crate::qa::{build_index, CandidateGenerator, CandidateList, QaConfig, QaError, TfidfGenerator, TfidfIndex};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Ls(#[from] LsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub qa: QaConfig,
    pub bp: BpConfig,
    pub ls: LsConfig,
    pub local_search: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { qa: QaConfig::default(), bp: BpConfig::default(), ls: LsConfig::default(), local_search: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        self.qa.validate()?;
        self.bp.validate()?;
        self.ls.validate()?;
        Ok(())
    }
}

/// Everything built once from the corpus and dictionary, shared across puzzles.
pub struct Solver {
    config: SolverConfig,
    corpus: Arc<ClueCorpus>,
    dictionary: Arc<SegmentationDictionary>,
    letter_lm: LetterLM,
    generator: TfidfGenerator,
    scorer: NgramScorer,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub candidates: BTreeMap<SlotId, CandidateList>,
    pub marginals: MarginalSet,
    pub greedy: Solution,
    pub solution: Solution,
    pub local_search: Option<LsOutcome>,
}

impl Solver {
    pub fn new(corpus: Arc<ClueCorpus>, dictionary: Arc<SegmentationDictionary>, config: SolverConfig) -> Result<Self, SolveError> {
        let index = Arc::new(build_index(&corpus)?);
        Self::with_index(corpus, index, dictionary, config)
    }

    /// Uses a prebuilt (e.g. cached) index of `corpus`.
    pub fn with_index(
        corpus: Arc<ClueCorpus>,
        index: Arc<TfidfIndex>,
        dictionary: Arc<SegmentationDictionary>,
        config: SolverConfig,
    ) -> Result<Self, SolveError> {
        config.validate()?;
        let letter_lm = build_letter_lm(&corpus)?;
        let generator = TfidfGenerator::new(Arc::clone(&index), config.qa)?;
        let scorer = NgramScorer::new(&corpus, index, Arc::clone(&dictionary), config.ls.scorer_weights.into())?;
        Ok(Solver { config, corpus, dictionary, letter_lm, generator, scorer })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn candidates(&self, grid: &PuzzleGrid) -> BTreeMap<SlotId, CandidateList> {
        let k = self.config.qa.top_k;
        grid.slots()
            .par_iter()
            .map(|s| (s.id, self.generator.generate(grid.clue(s.id), s.len(), k)))
            .collect()
    }

    pub fn solve(&self, grid: &PuzzleGrid) -> Result<SolveOutcome, SolveError> {
        let candidates = self.candidates(grid);
        let mut graph = build_graph(grid, &candidates, &self.letter_lm, self.config.bp.lambda_oov)?;
        let marginals = run_bp(&mut graph, &self.config.bp)?;
        let greedy = greedy_fill(grid, &marginals);
        let (solution, ls) = if self.config.local_search {
            let answers: &BTreeSet<String> = self.corpus.answer_set();
            let gates = Gates::new(&self.dictionary, answers);
            let out = local_search(grid, &greedy, &marginals, &gates, &self.scorer, &self.config.ls)?;
            (out.solution.clone(), Some(out))
        } else {
            (greedy.clone(), None)
        };
        Ok(SolveOutcome { candidates, marginals, greedy, solution, local_search: ls })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CluePair;
    use crate::puzzle::render_solution;

    fn corpus(pairs: &[(&str, &str)]) -> Arc<ClueCorpus> {
        Arc::new(
            ClueCorpus::from_pairs(pairs.iter().map(|(c, a)| CluePair {
                clue: c.to_string(),
                answer: a.to_string(),
                source: "t".into(),
                year: 2020,
            }))
            .unwrap(),
        )
    }

    #[test]
    fn verbatim_clues_solve_perfectly() {
        let c = corpus(&[
            ("Feline pet", "CAT"),
            ("Writing tool", "PEN"),
            ("Ocean motion", "TIDE"),
            ("Hen product", "EGG"),
            ("Pig home", "STY"),
            ("Not off", "ON"),
        ]);
        let grid = PuzzleGrid::from_pattern("...\n###\n...", |id| {
            match id.to_string().as_str() {
                "1A" => "Feline pet",
                _ => "Hen product",
            }
            .to_string()
        })
        .unwrap();
        let solver = Solver::new(c, Arc::new(SegmentationDictionary::default()), SolverConfig::default()).unwrap();
        let out = solver.solve(&grid).unwrap();
        assert_eq!(render_solution(&grid, &out.solution).unwrap(), "CAT\n###\nEGG");
        assert!(out.marginals.converged);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = corpus(&[("a", "A")]);
        let cfg = SolverConfig { qa: QaConfig { top_k: 0, ..QaConfig::default() }, ..SolverConfig::default() };
        assert!(Solver::new(c, Arc::new(SegmentationDictionary::default()), cfg).is_err());
    }
}
