//! Command-line front end. Exit codes: 0 success, 2 bad input, 3 internal failure.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::corpus::{ingest_pairs, ingest_pairs_in_range, ClueCorpus, SegmentationDictionary, YearRange};
use crate::eval::{score_solution_vs_gold, Aggregate, PuzzleScore};
use crate::puzzle::{parse_puzzle_file, render_solution, serialize_puzzle, ParseOptions, Puzzle};
use crate::qa::{build_index, recall_at_ks, TfidfGenerator, TfidfIndex};
use crate::segment::segment;
use crate::solver::{SolveError, Solver, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

fn input(msg: impl std::fmt::Display) -> CliError {
    CliError::Input(msg.to_string())
}

fn internal(msg: impl std::fmt::Display) -> CliError {
    CliError::Internal(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "gridlock", version, about = "Crossword solver: retrieval, belief propagation, local search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one puzzle file.
    Solve(SolveArgs),
    /// Measure top-k recall of the retrieval baseline.
    Recall(RecallArgs),
    /// Solve every puzzle in a directory and score against the gold solutions.
    Eval(EvalArgs),
    /// Split a string into dictionary words.
    Segment(SegmentArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Clue-answer pairs, one JSON object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Only keep corpus pairs from these years, e.g. `..2020` or `2010..2019`.
    #[arg(long, value_name = "RANGE")]
    pub year_split: Option<String>,
    /// Reuse (or create) a cached retrieval index at this path.
    #[arg(long, value_name = "PATH")]
    pub index_cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Segmentation dictionary: `word<TAB>count` per line.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// TOML file with [qa], [bp] and [ls] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub no_local_search: bool,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub ls_threshold: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Accepted for reproducible run records; the pipeline has no random steps.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub puzzle: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the solved puzzle as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dump_marginals: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dump_edits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecallArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Evaluation pairs in the corpus format.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    pub k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub themeless_only: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub string: String,
    #[arg(long)]
    pub dictionary: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Recall(a) => cmd_recall(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Segment(a) => cmd_segment(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_corpus(args: &CorpusArgs, err: &mut dyn Write) -> Result<ClueCorpus, CliError> {
    let file = File::open(&args.corpus).map_err(|e| input(format!("{}: {e}", args.corpus.display())))?;
    let years = match &args.year_split {
        Some(s) => s.parse::<YearRange>().map_err(input)?,
        None => YearRange::default(),
    };
    let (corpus, report) = ingest_pairs_in_range(BufReader::new(file), years)
        .map_err(|e| input(format!("{}: {e}", args.corpus.display())))?;
    let _ = writeln!(err, "corpus: {report}");
    if corpus.is_empty() {
        return Err(input(format!("{}: no usable clue-answer pairs", args.corpus.display())));
    }
    Ok(corpus)
}

fn load_index(args: &CorpusArgs, corpus: &ClueCorpus) -> Result<TfidfIndex, CliError> {
    let Some(path) = &args.index_cache else {
        return build_index(corpus).map_err(input);
    };
    let hash = corpus.content_hash();
    if let Some(index) = TfidfIndex::load_cached(path, &hash).map_err(input)? {
        return Ok(index);
    }
    let index = build_index(corpus).map_err(input)?;
    index.save(path, &hash).map_err(input)?;
    Ok(index)
}

fn load_dictionary(path: Option<&Path>) -> Result<SegmentationDictionary, CliError> {
    match path {
        Some(p) => SegmentationDictionary::parse(&read(p)?).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => Ok(SegmentationDictionary::default()),
    }
}

/// Defaults, then the config file, then command-line flags.
fn solver_config(args: &SolverArgs) -> Result<SolverConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => toml::from_str::<SolverConfig>(&read(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?,
        None => SolverConfig::default(),
    };
    if args.no_local_search {
        cfg.local_search = false;
    }
    if let Some(v) = args.top_k {
        cfg.qa.top_k = v;
    }
    if let Some(v) = args.temperature {
        cfg.qa.temperature = v;
    }
    if let Some(v) = args.max_iters {
        cfg.bp.max_iters = v;
    }
    if let Some(v) = args.epsilon {
        cfg.bp.epsilon = v;
    }
    if let Some(v) = args.damping {
        cfg.bp.damping = v;
    }
    if let Some(v) = args.ls_threshold {
        cfg.ls.threshold = v;
    }
    if let Some(v) = args.max_rounds {
        cfg.ls.max_rounds = v;
    }
    cfg.validate().map_err(input)?;
    Ok(cfg)
}

fn build_solver(args: &SolverArgs, err: &mut dyn Write) -> Result<Solver, CliError> {
    let config = solver_config(args)?;
    let corpus = load_corpus(&args.corpus, err)?;
    let index = load_index(&args.corpus, &corpus)?;
    let dictionary = load_dictionary(args.dictionary.as_deref())?;
    Solver::with_index(Arc::new(corpus), Arc::new(index), Arc::new(dictionary), config).map_err(input)
}

fn load_puzzle(path: &Path) -> Result<Puzzle, CliError> {
    parse_puzzle_file(&read(path)?, ParseOptions::default()).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn solve_error(e: SolveError) -> CliError {
    internal(e)
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let puzzle = load_puzzle(&args.puzzle)?;
    let solver = build_solver(&args.solver, err)?;
    let outcome = solver.solve(&puzzle.grid).map_err(solve_error)?;
    let grid = &puzzle.grid;
    let rendering = render_solution(grid, &outcome.solution).map_err(internal)?;
    writeln!(out, "{rendering}").map_err(internal)?;
    if let Some(gold) = &puzzle.solution {
        let score = score_solution_vs_gold(grid, &outcome.solution, gold).map_err(internal)?;
        writeln!(out, "{}", serde_json::to_string(&score).map_err(internal)?).map_err(internal)?;
    }
    if let Some(p) = &args.out {
        let solved = Puzzle { grid: grid.clone(), solution: Some(outcome.solution.clone()) };
        write_file(p, &(serialize_puzzle(&solved) + "\n"))?;
    }
    if let Some(p) = &args.dump_marginals {
        write_file(p, &(outcome.marginals.to_json() + "\n"))?;
    }
    if let Some(p) = &args.dump_edits {
        let log = match &outcome.local_search {
            Some(ls) => ls.edits_json(),
            None => serde_json::to_string_pretty(&json!({ "edits": [] })).map_err(internal)?,
        };
        write_file(p, &(log + "\n"))?;
    }
    Ok(())
}

fn cmd_recall(args: &RecallArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, err)?;
    let index = load_index(&args.corpus, &corpus)?;
    let file = File::open(&args.eval).map_err(|e| input(format!("{}: {e}", args.eval.display())))?;
    let (eval, report) =
        ingest_pairs(BufReader::new(file)).map_err(|e| input(format!("{}: {e}", args.eval.display())))?;
    let _ = writeln!(err, "eval: {report}");
    let pairs: Vec<(String, String)> = eval.pairs().iter().map(|p| (p.clue.clone(), p.answer.clone())).collect();
    let generator = TfidfGenerator::new(Arc::new(index), Default::default()).map_err(internal)?;
    let recall = recall_at_ks(&generator, &pairs, &args.k).map_err(input)?;
    let body = json!({
        "pairs": pairs.len(),
        "recall": recall.iter().map(|&(k, r)| json!({ "k": k, "recall": r })).collect::<Vec<_>>(),
    });
    writeln!(out, "{body}").map_err(internal)
}

#[derive(Serialize)]
struct PuzzleLine<'a> {
    puzzle: &'a str,
    themed: bool,
    #[serde(flatten)]
    score: &'a PuzzleScore,
}

#[derive(Serialize)]
struct Summary {
    puzzles: usize,
    perfect_pct: f64,
    word_pct: f64,
    letter_pct: f64,
}

impl From<&Aggregate> for Summary {
    fn from(a: &Aggregate) -> Self {
        Summary { puzzles: a.puzzles, perfect_pct: a.perfect_pct(), word_pct: a.word_pct(), letter_pct: a.letter_pct() }
    }
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .map_err(|e| input(format!("{}: {e}", args.dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut puzzles = Vec::new();
    for p in &paths {
        let puzzle = load_puzzle(p)?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if puzzle.solution.is_none() {
            let _ = writeln!(err, "warning: {name} has no gold solution; skipped");
            continue;
        }
        if args.themeless_only && puzzle.grid.themed() {
            continue;
        }
        puzzles.push((name, puzzle));
    }
    if puzzles.is_empty() {
        return Err(input(format!("{}: no puzzles with gold solutions", args.dir.display())));
    }
    let solver = build_solver(&args.solver, err)?;
    let scores: Vec<Result<PuzzleScore, CliError>> = puzzles
        .par_iter()
        .map(|(_, p)| {
            let outcome = solver.solve(&p.grid).map_err(solve_error)?;
            let gold = p.solution.as_ref().expect("filtered above");
            score_solution_vs_gold(&p.grid, &outcome.solution, gold).map_err(internal)
        })
        .collect();
    let (mut all, mut themeless, mut themed) = (Aggregate::default(), Aggregate::default(), Aggregate::default());
    for ((name, p), score) in puzzles.iter().zip(scores) {
        let score = score?;
        let line = PuzzleLine { puzzle: name, themed: p.grid.themed(), score: &score };
        writeln!(out, "{}", serde_json::to_string(&line).map_err(internal)?).map_err(internal)?;
        all.add(&score);
        if p.grid.themed() { &mut themed } else { &mut themeless }.add(&score);
    }
    let footer = json!({
        "aggregate": Summary::from(&all),
        "themeless": Summary::from(&themeless),
        "themed": Summary::from(&themed),
    });
    writeln!(out, "{footer}").map_err(internal)
}

fn cmd_segment(args: &SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dict = load_dictionary(Some(&args.dictionary))?;
    let text = args.string.to_ascii_uppercase();
    if !text.bytes().all(|b| b.is_ascii_uppercase()) {
        return Err(input(format!("{:?} is not an A-Z string", args.string)));
    }
    match segment(&dict, &text) {
        Some(s) => writeln!(out, "{}", s.text()),
        None => writeln!(out, "NO-SEGMENTATION"),
    }
    .map_err(internal)
}
