//! Grid geometry, slot extraction and numbering, solutions, and the JSON puzzle format.
//!
//! A puzzle file looks like:
//!
//! ```json
//! { "rows": 2, "cols": 2,
//!   "blocks": [],
//!   "clues": { "across": {"1": "...", "3": "..."},
//!              "down":   {"1": "...", "2": "..."} },
//!   "solution": [["A","B"], ["B","A"]] }
//! ```
//!
//! Coordinates are 0-based `(row, col)`. `solution` is optional and uses `"#"` for blocks.
//! An optional `"themed": true` tags the puzzle for evaluation breakdowns.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Zero-based `(row, col)` coordinate.
pub type Cell = (usize, usize);

/// Default minimum run length that forms a slot.
pub const DEFAULT_MIN_SLOT_LENGTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Across,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Across, Direction::Down];

    fn index(self) -> usize {
        match self {
            Direction::Across => 0,
            Direction::Down => 1,
        }
    }

    fn key(self) -> &'static str {
        match self {
            Direction::Across => "across",
            Direction::Down => "down",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Clue number plus direction. Orders by number first, across before down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotId {
    pub number: u32,
    pub direction: Direction,
}

impl SlotId {
    pub fn across(number: u32) -> Self {
        SlotId { number, direction: Direction::Across }
    }

    pub fn down(number: u32) -> Self {
        SlotId { number, direction: Direction::Down }
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.direction {
            Direction::Across => 'A',
            Direction::Down => 'D',
        };
        write!(f, "{}{}", self.number, d)
    }
}

impl FromStr for SlotId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, dir) = s.split_at(s.len().saturating_sub(1));
        let direction = match dir {
            "A" | "a" => Direction::Across,
            "D" | "d" => Direction::Down,
            _ => return Err(format!("bad slot id {s:?}: expected e.g. 12A or 3D")),
        };
        let number = num.parse().map_err(|_| format!("bad slot id {s:?}: expected e.g. 12A or 3D"))?;
        Ok(SlotId { number, direction })
    }
}

impl Serialize for SlotId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Block,
    Fillable,
}

/// A maximal run of fillable cells answering one clue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub id: SlotId,
    pub cells: Vec<Cell>,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn position_of(&self, cell: Cell) -> Option<usize> {
        self.cells.iter().position(|&c| c == cell)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PuzzleError {
    #[error("malformed puzzle JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("minimum slot length must be at least 1 (a slot of length 0 is not a slot)")]
    ZeroSlotLength,
    #[error("blocks[{index}]: ({row}, {col}) lies outside the {rows}x{cols} grid")]
    BlockOutOfBounds { index: usize, row: usize, col: usize, rows: usize, cols: usize },
    #[error("clues.{direction}.{key:?}: clue numbers must be positive integers")]
    BadClueNumber { direction: Direction, key: String },
    #[error("clues.{}.\"{}\": no {} slot numbered {} in the grid", .0.direction, .0.number, .0.direction, .0.number)]
    UnknownSlot(SlotId),
    #[error("slot {slot} has no clue (grid has {slots} slots, file has {clues} clues)")]
    MissingClue { slot: SlotId, slots: usize, clues: usize },
    #[error("cell ({row}, {col}) is fillable but belongs to no slot")]
    UncoveredCell { row: usize, col: usize },
    #[error("solution: expected {expected_rows}x{expected_cols}, found {found}")]
    SolutionShape { expected_rows: usize, expected_cols: usize, found: String },
    #[error("solution[{row}][{col}]: {value:?} is a multi-letter (rebus) entry, which is not supported")]
    Rebus { row: usize, col: usize, value: String },
    #[error("solution[{row}][{col}]: {message}")]
    SolutionCell { row: usize, col: usize, message: String },
    #[error("cell ({row}, {col}) has no letter assigned")]
    MissingLetter { row: usize, col: usize },
    #[error("solution is {sol_rows}x{sol_cols} but the grid is {rows}x{cols}")]
    GridMismatch { rows: usize, cols: usize, sol_rows: usize, sol_cols: usize },
}

/// Options that affect slot extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub min_slot_length: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { min_slot_length: DEFAULT_MIN_SLOT_LENGTH }
    }
}

/// Returns the maximal runs of `Fillable` cells of at least `min_len` cells in both directions,
/// numbered in standard crossword order (row-major scan, a number per starting cell).
///
/// `cells` is row-major with `cols` columns. Slots are ordered by `SlotId`.
pub fn extract_slots(cells: &[CellKind], cols: usize, min_len: usize) -> Vec<Slot> {
    if cols == 0 || cells.is_empty() {
        return Vec::new();
    }
    let rows = cells.len() / cols;
    let min_len = min_len.max(1);
    let open = |r: usize, c: usize| cells[r * cols + c] == CellKind::Fillable;
    let run_len = |r: usize, c: usize, dir: Direction| {
        let mut n = 0;
        let (mut rr, mut cc) = (r, c);
        while rr < rows && cc < cols && open(rr, cc) {
            n += 1;
            match dir {
                Direction::Across => cc += 1,
                Direction::Down => rr += 1,
            }
        }
        n
    };

    let mut slots = Vec::new();
    let mut number = 0u32;
    for r in 0..rows {
        for c in 0..cols {
            if !open(r, c) {
                continue;
            }
            let mut starts = Vec::with_capacity(2);
            if c == 0 || !open(r, c - 1) {
                let n = run_len(r, c, Direction::Across);
                if n >= min_len {
                    starts.push((Direction::Across, n));
                }
            }
            if r == 0 || !open(r - 1, c) {
                let n = run_len(r, c, Direction::Down);
                if n >= min_len {
                    starts.push((Direction::Down, n));
                }
            }
            if starts.is_empty() {
                continue;
            }
            number += 1;
            for (direction, n) in starts {
                let cells = (0..n)
                    .map(|k| match direction {
                        Direction::Across => (r, c + k),
                        Direction::Down => (r + k, c),
                    })
                    .collect();
                slots.push(Slot { id: SlotId { number, direction }, cells });
            }
        }
    }
    slots
}

/// A parsed crossword grid with its slots and clues. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PuzzleGrid {
    rows: usize,
    cols: usize,
    cells: Vec<CellKind>,
    slots: Vec<Slot>,
    clue_texts: BTreeMap<SlotId, String>,
    slot_index: BTreeMap<SlotId, usize>,
    /// Per cell: (slot index, position in slot) for the across and down memberships.
    membership: Vec<[Option<(usize, usize)>; 2]>,
    themed: bool,
}

impl PuzzleGrid {
    /// Builds a grid from a cell matrix and a clue map, validating that clues and slots
    /// correspond one-to-one and that every fillable cell lies in a slot.
    pub fn new(
        rows: usize,
        cols: usize,
        cells: Vec<CellKind>,
        clue_texts: BTreeMap<SlotId, String>,
        options: ParseOptions,
    ) -> Result<Self, PuzzleError> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(PuzzleError::EmptyGrid { rows, cols });
        }
        if options.min_slot_length == 0 {
            return Err(PuzzleError::ZeroSlotLength);
        }
        let slots = extract_slots(&cells, cols, options.min_slot_length);
        let slot_index: BTreeMap<SlotId, usize> =
            slots.iter().enumerate().map(|(i, s)| (s.id, i)).collect();

        for id in clue_texts.keys() {
            if !slot_index.contains_key(id) {
                return Err(PuzzleError::UnknownSlot(*id));
            }
        }
        for slot in &slots {
            if !clue_texts.contains_key(&slot.id) {
                return Err(PuzzleError::MissingClue {
                    slot: slot.id,
                    slots: slots.len(),
                    clues: clue_texts.len(),
                });
            }
        }

        let mut membership = vec![[None, None]; rows * cols];
        for (si, slot) in slots.iter().enumerate() {
            for (pos, &(r, c)) in slot.cells.iter().enumerate() {
                membership[r * cols + c][slot.id.direction.index()] = Some((si, pos));
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if cells[i] == CellKind::Fillable && membership[i] == [None, None] {
                    return Err(PuzzleError::UncoveredCell { row: r, col: c });
                }
            }
        }

        Ok(PuzzleGrid { rows, cols, cells, slots, clue_texts, slot_index, membership, themed: false })
    }

    /// Builds a grid from an ASCII pattern (`#` block, anything else fillable), one row per line,
    /// with clue texts supplied by `clue`.
    pub fn from_pattern(pattern: &str, clue: impl Fn(SlotId) -> String) -> Result<Self, PuzzleError> {
        let lines: Vec<&str> = pattern.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if lines.iter().any(|l| l.chars().count() != cols) {
            return Err(PuzzleError::EmptyGrid { rows, cols });
        }
        let cells: Vec<CellKind> = lines
            .iter()
            .flat_map(|l| l.chars())
            .map(|ch| if ch == '#' { CellKind::Block } else { CellKind::Fillable })
            .collect();
        let options = ParseOptions::default();
        if rows == 0 || cols == 0 {
            return Err(PuzzleError::EmptyGrid { rows, cols });
        }
        let clue_texts =
            extract_slots(&cells, cols, options.min_slot_length).iter().map(|s| (s.id, clue(s.id))).collect();
        PuzzleGrid::new(rows, cols, cells, clue_texts, options)
    }

    pub fn with_themed(mut self, themed: bool) -> Self {
        self.themed = themed;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn themed(&self) -> bool {
        self.themed
    }

    pub fn cell_kind(&self, (r, c): Cell) -> CellKind {
        self.cells[r * self.cols + c]
    }

    pub fn is_fillable(&self, cell: Cell) -> bool {
        cell.0 < self.rows && cell.1 < self.cols && self.cell_kind(cell) == CellKind::Fillable
    }

    /// Fillable cells in row-major order.
    pub fn fillable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows)
            .flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
            .filter(move |&cell| self.cell_kind(cell) == CellKind::Fillable)
    }

    pub fn fillable_count(&self) -> usize {
        self.cells.iter().filter(|&&k| k == CellKind::Fillable).count()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, id: SlotId) -> Option<&Slot> {
        self.slot_index.get(&id).map(|&i| &self.slots[i])
    }

    pub fn slot_position(&self, id: SlotId) -> Option<usize> {
        self.slot_index.get(&id).copied()
    }

    pub fn clue(&self, id: SlotId) -> &str {
        self.clue_texts.get(&id).map_or("", String::as_str)
    }

    pub fn clue_texts(&self) -> &BTreeMap<SlotId, String> {
        &self.clue_texts
    }

    /// `(slot index, position)` pairs for every slot through `cell`, across first.
    pub fn slots_at(&self, (r, c): Cell) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.membership[r * self.cols + c].iter().flatten().copied()
    }

    pub fn blocks(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows)
            .flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
            .filter(move |&cell| self.cell_kind(cell) == CellKind::Block)
    }

    pub(crate) fn flat(&self, (r, c): Cell) -> usize {
        r * self.cols + c
    }
}

/// A complete letter assignment to the fillable cells of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    rows: usize,
    cols: usize,
    letters: Vec<Option<u8>>,
    answers: BTreeMap<SlotId, String>,
}

impl Solution {
    /// `letters` is row-major; `None` at blocks, an uppercase ASCII letter elsewhere.
    pub fn from_letters(grid: &PuzzleGrid, letters: Vec<Option<u8>>) -> Result<Self, PuzzleError> {
        if letters.len() != grid.rows * grid.cols {
            return Err(PuzzleError::SolutionShape {
                expected_rows: grid.rows,
                expected_cols: grid.cols,
                found: format!("{} cells", letters.len()),
            });
        }
        let mut letters = letters;
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let i = r * grid.cols + c;
                match (grid.cells[i], letters[i]) {
                    (CellKind::Block, _) => letters[i] = None,
                    (CellKind::Fillable, None) => return Err(PuzzleError::MissingLetter { row: r, col: c }),
                    (CellKind::Fillable, Some(b)) if !b.is_ascii_uppercase() => {
                        return Err(PuzzleError::SolutionCell {
                            row: r,
                            col: c,
                            message: format!("{:?} is not a letter A-Z", b as char),
                        })
                    }
                    _ => {}
                }
            }
        }
        let answers = grid
            .slots
            .iter()
            .map(|s| {
                let word: String =
                    s.cells.iter().map(|&(r, c)| letters[r * grid.cols + c].unwrap() as char).collect();
                (s.id, word)
            })
            .collect();
        Ok(Solution { rows: grid.rows, cols: grid.cols, letters, answers })
    }

    /// Convenience constructor from text rows, `#` (or any non-letter) at blocks.
    pub fn from_rows(grid: &PuzzleGrid, rows: &[&str]) -> Result<Self, PuzzleError> {
        if rows.len() != grid.rows || rows.iter().any(|r| r.len() != grid.cols) {
            return Err(PuzzleError::SolutionShape {
                expected_rows: grid.rows,
                expected_cols: grid.cols,
                found: format!("{} rows", rows.len()),
            });
        }
        let letters = rows
            .iter()
            .flat_map(|r| r.bytes())
            .map(|b| b.is_ascii_alphabetic().then(|| b.to_ascii_uppercase()))
            .collect();
        Solution::from_letters(grid, letters)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn letter(&self, (r, c): Cell) -> Option<u8> {
        if r >= self.rows || c >= self.cols {
            return None;
        }
        self.letters[r * self.cols + c]
    }

    pub fn letters(&self) -> &[Option<u8>] {
        &self.letters
    }

    pub fn answer(&self, id: SlotId) -> Option<&str> {
        self.answers.get(&id).map(String::as_str)
    }

    pub fn answers(&self) -> &BTreeMap<SlotId, String> {
        &self.answers
    }

    /// A copy with the given cells overwritten. Answers of every slot are recomputed.
    pub fn with_flips(&self, grid: &PuzzleGrid, flips: &[(Cell, u8)]) -> Result<Self, PuzzleError> {
        let mut letters = self.letters.clone();
        for &((r, c), letter) in flips {
            if !grid.is_fillable((r, c)) {
                return Err(PuzzleError::SolutionCell {
                    row: r,
                    col: c,
                    message: "cannot place a letter on a block or outside the grid".into(),
                });
            }
            letters[r * self.cols + c] = Some(letter);
        }
        Solution::from_letters(grid, letters)
    }
}

/// Fixed-width ASCII rendering: one line per row, `#` for blocks, no trailing newline.
pub fn render_solution(grid: &PuzzleGrid, sol: &Solution) -> Result<String, PuzzleError> {
    check_same_shape(grid, sol)?;
    let mut out = String::with_capacity(grid.rows * (grid.cols + 1));
    for r in 0..grid.rows {
        if r > 0 {
            out.push('\n');
        }
        for c in 0..grid.cols {
            match grid.cell_kind((r, c)) {
                CellKind::Block => out.push('#'),
                CellKind::Fillable => match sol.letter((r, c)) {
                    Some(b) => out.push(b as char),
                    None => return Err(PuzzleError::MissingLetter { row: r, col: c }),
                },
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_same_shape(grid: &PuzzleGrid, sol: &Solution) -> Result<(), PuzzleError> {
    if grid.rows != sol.rows || grid.cols != sol.cols {
        return Err(PuzzleError::GridMismatch {
            rows: grid.rows,
            cols: grid.cols,
            sol_rows: sol.rows,
            sol_cols: sol.cols,
        });
    }
    Ok(())
}

/// A parsed puzzle file: the grid plus the optional gold solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Puzzle {
    pub grid: PuzzleGrid,
    pub solution: Option<Solution>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PuzzleJson {
    rows: usize,
    cols: usize,
    #[serde(default)]
    blocks: Vec<[usize; 2]>,
    clues: CluesJson,
    #[serde(default)]
    solution: Option<Vec<Vec<String>>>,
    #[serde(default)]
    themed: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CluesJson {
    #[serde(default)]
    across: BTreeMap<String, String>,
    #[serde(default)]
    down: BTreeMap<String, String>,
}

/// Parses the JSON puzzle format and returns just the grid.
pub fn parse_puzzle(text: &str) -> Result<PuzzleGrid, PuzzleError> {
    parse_puzzle_file(text, ParseOptions::default()).map(|p| p.grid)
}

/// Parses the JSON puzzle format, including the gold solution when present.
pub fn parse_puzzle_file(text: &str, options: ParseOptions) -> Result<Puzzle, PuzzleError> {
    let raw: PuzzleJson = serde_json::from_str(text).map_err(|e| PuzzleError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let (rows, cols) = (raw.rows, raw.cols);
    if rows == 0 || cols == 0 {
        return Err(PuzzleError::EmptyGrid { rows, cols });
    }
    let mut cells = vec![CellKind::Fillable; rows * cols];
    for (index, &[row, col]) in raw.blocks.iter().enumerate() {
        if row >= rows || col >= cols {
            return Err(PuzzleError::BlockOutOfBounds { index, row, col, rows, cols });
        }
        cells[row * cols + col] = CellKind::Block;
    }

    let mut clue_texts = BTreeMap::new();
    for (direction, map) in [(Direction::Across, &raw.clues.across), (Direction::Down, &raw.clues.down)] {
        for (key, text) in map {
            let number: u32 = match key.trim().parse() {
                Ok(n) if n > 0 => n,
                _ => return Err(PuzzleError::BadClueNumber { direction, key: key.clone() }),
            };
            clue_texts.insert(SlotId { number, direction }, text.clone());
        }
    }
    let grid = PuzzleGrid::new(rows, cols, cells, clue_texts, options)?.with_themed(raw.themed);

    let solution = match raw.solution {
        None => None,
        Some(sol_rows) => Some(parse_solution_rows(&grid, &sol_rows)?),
    };
    Ok(Puzzle { grid, solution })
}

fn parse_solution_rows(grid: &PuzzleGrid, sol_rows: &[Vec<String>]) -> Result<Solution, PuzzleError> {
    if sol_rows.len() != grid.rows || sol_rows.iter().any(|r| r.len() != grid.cols) {
        let widths: Vec<usize> = sol_rows.iter().map(Vec::len).collect();
        return Err(PuzzleError::SolutionShape {
            expected_rows: grid.rows,
            expected_cols: grid.cols,
            found: format!("{} rows with widths {:?}", sol_rows.len(), widths),
        });
    }
    let mut letters = Vec::with_capacity(grid.rows * grid.cols);
    for (r, row) in sol_rows.iter().enumerate() {
        for (c, value) in row.iter().enumerate() {
            let v = value.trim();
            match grid.cell_kind((r, c)) {
                CellKind::Block => {
                    if v != "#" {
                        return Err(PuzzleError::SolutionCell {
                            row: r,
                            col: c,
                            message: format!("expected \"#\" at a block, found {v:?}"),
                        });
                    }
                    letters.push(None);
                }
                CellKind::Fillable => {
                    let mut chars = v.chars();
                    match (chars.next(), chars.next()) {
                        (Some(ch), None) if ch.is_ascii_alphabetic() => {
                            letters.push(Some(ch.to_ascii_uppercase() as u8))
                        }
                        (Some(_), Some(_)) if v.chars().all(|ch| ch.is_ascii_alphabetic()) => {
                            return Err(PuzzleError::Rebus { row: r, col: c, value: v.to_string() })
                        }
                        _ => {
                            return Err(PuzzleError::SolutionCell {
                                row: r,
                                col: c,
                                message: format!("expected a single letter A-Z, found {v:?}"),
                            })
                        }
                    }
                }
            }
        }
    }
    Solution::from_letters(grid, letters)
}

struct NumberedClues<'a>(Vec<(u32, &'a str)>);

impl Serialize for NumberedClues<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(n, t)| (n.to_string(), t)))
    }
}

#[derive(Serialize)]
struct CluesOut<'a> {
    across: NumberedClues<'a>,
    down: NumberedClues<'a>,
}

#[derive(Serialize)]
struct PuzzleOut<'a> {
    rows: usize,
    cols: usize,
    blocks: Vec<[usize; 2]>,
    clues: CluesOut<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    themed: bool,
}

/// Row-major letter matrix with `#` at blocks.
pub fn solution_matrix(grid: &PuzzleGrid, sol: &Solution) -> Vec<Vec<String>> {
    (0..grid.rows)
        .map(|r| {
            (0..grid.cols)
                .map(|c| match sol.letter((r, c)) {
                    Some(b) if grid.is_fillable((r, c)) => (b as char).to_string(),
                    _ => "#".to_string(),
                })
                .collect()
        })
        .collect()
}

/// Serializes a puzzle in canonical form: blocks row-major, clues in numeric order.
pub fn serialize_puzzle(puzzle: &Puzzle) -> String {
    let grid = &puzzle.grid;
    let clues_for = |dir: Direction| {
        NumberedClues(
            grid.clue_texts
                .iter()
                .filter(|(id, _)| id.direction == dir)
                .map(|(id, t)| (id.number, t.as_str()))
                .collect(),
        )
    };
    let out = PuzzleOut {
        rows: grid.rows,
        cols: grid.cols,
        blocks: grid.blocks().map(|(r, c)| [r, c]).collect(),
        clues: CluesOut { across: clues_for(Direction::Across), down: clues_for(Direction::Down) },
        solution: puzzle.solution.as_ref().map(|s| solution_matrix(grid, s)),
        themed: grid.themed,
    };
    serde_json::to_string_pretty(&out).expect("puzzle serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clue(id: SlotId) -> String {
        format!("clue {id}")
    }

    #[test]
    fn one_by_three_has_a_single_across_slot() {
        let text = r#"{"rows":1,"cols":3,"blocks":[],"clues":{"across":{"1":"Feline"},"down":{}}}"#;
        let grid = parse_puzzle(text).unwrap();
        assert_eq!(grid.slots().len(), 1);
        let s = &grid.slots()[0];
        assert_eq!(s.id, SlotId::across(1));
        assert_eq!(s.len(), 3);
        assert_eq!(grid.clue(s.id), "Feline");
    }

    #[test]
    fn two_by_two_is_fully_crossed() {
        let grid = PuzzleGrid::from_pattern("..\n..", clue).unwrap();
        let ids: Vec<SlotId> = grid.slots().iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![SlotId::across(1), SlotId::down(1), SlotId::down(2), SlotId::across(3)]);
        assert!(grid.slots().iter().all(|s| s.len() == 2));
        for cell in grid.fillable_cells() {
            assert_eq!(grid.slots_at(cell).count(), 2);
        }
    }

    #[test]
    fn all_block_matrix_has_no_slots() {
        assert!(extract_slots(&[CellKind::Block; 9], 3, 2).is_empty());
    }

    #[test]
    fn open_row_is_one_slot() {
        let slots = extract_slots(&[CellKind::Fillable; 5], 5, 2);
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].id, SlotId::across(1));
        assert_eq!(slots[0].cells, vec![(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)]);
    }

    #[test]
    fn isolated_cell_is_not_a_slot() {
        use CellKind::*;
        let cells = [Block, Block, Block, Block, Fillable, Block, Block, Block, Block];
        assert!(extract_slots(&cells, 3, 2).is_empty());
        assert_eq!(extract_slots(&cells, 3, 1).len(), 2);
        // ...and a grid containing one is rejected, since the cell could never be clued.
        let err = PuzzleGrid::new(3, 3, cells.to_vec(), BTreeMap::new(), ParseOptions::default()).unwrap_err();
        assert_eq!(err, PuzzleError::UncoveredCell { row: 1, col: 1 });
    }

    #[test]
    fn render_small_grids() {
        let g = PuzzleGrid::from_pattern("...", clue).unwrap();
        let s = Solution::from_rows(&g, &["CAT"]).unwrap();
        assert_eq!(render_solution(&g, &s).unwrap(), "CAT");

        let g = PuzzleGrid::from_pattern("..\n..", clue).unwrap();
        let s = Solution::from_rows(&g, &["AB", "BA"]).unwrap();
        assert_eq!(render_solution(&g, &s).unwrap(), "AB\nBA");

        let g = PuzzleGrid::from_pattern("...\n.#.\n...", clue).unwrap();
        let s = Solution::from_rows(&g, &["ABC", "D#E", "FGH"]).unwrap();
        let text = render_solution(&g, &s).unwrap();
        let hashes: Vec<Cell> = text
            .lines()
            .enumerate()
            .flat_map(|(r, l)| l.char_indices().filter(|(_, ch)| *ch == '#').map(move |(c, _)| (r, c)))
            .collect();
        assert_eq!(hashes, vec![(1, 1)]);
    }

    #[test]
    fn render_rejects_mismatched_solution() {
        let g = PuzzleGrid::from_pattern("...", clue).unwrap();
        let other = PuzzleGrid::from_pattern("..\n..", clue).unwrap();
        let s = Solution::from_rows(&other, &["AB", "BA"]).unwrap();
        assert!(matches!(render_solution(&g, &s), Err(PuzzleError::GridMismatch { .. })));
    }

    #[test]
    fn answers_follow_letters() {
        let g = PuzzleGrid::from_pattern("..\n..", clue).unwrap();
        let s = Solution::from_rows(&g, &["AB", "CD"]).unwrap();
        assert_eq!(s.answer(SlotId::across(1)), Some("AB"));
        assert_eq!(s.answer(SlotId::across(3)), Some("CD"));
        assert_eq!(s.answer(SlotId::down(1)), Some("AC"));
        assert_eq!(s.answer(SlotId::down(2)), Some("BD"));
        let t = s.with_flips(&g, &[((1, 1), b'X')]).unwrap();
        assert_eq!(t.answer(SlotId::down(2)), Some("BX"));
        assert_eq!(t.answer(SlotId::across(3)), Some("CX"));
        assert_eq!(s.answer(SlotId::across(3)), Some("CD"));
    }

    #[test]
    fn parse_errors_name_the_location() {
        let bad_json = parse_puzzle("{\"rows\": 2,").unwrap_err();
        assert!(matches!(bad_json, PuzzleError::Json { line: 1, .. }));

        let unknown = r#"{"rows":1,"cols":3,"clues":{"across":{"1":"x","2":"y"}}}"#;
        let err = parse_puzzle(unknown).unwrap_err();
        assert_eq!(err, PuzzleError::UnknownSlot(SlotId::across(2)));
        assert!(err.to_string().contains("clues.across.\"2\""));

        let missing = r#"{"rows":2,"cols":2,"clues":{"across":{"1":"x","3":"y"},"down":{"1":"z"}}}"#;
        let err = parse_puzzle(missing).unwrap_err();
        assert_eq!(err, PuzzleError::MissingClue { slot: SlotId::down(2), slots: 4, clues: 3 });

        let oob = r#"{"rows":1,"cols":3,"blocks":[[0,5]],"clues":{"across":{"1":"x"}}}"#;
        assert!(matches!(parse_puzzle(oob).unwrap_err(), PuzzleError::BlockOutOfBounds { index: 0, .. }));

        let bad_num = r#"{"rows":1,"cols":3,"clues":{"across":{"one":"x"}}}"#;
        assert!(matches!(parse_puzzle(bad_num).unwrap_err(), PuzzleError::BadClueNumber { .. }));
    }

    #[test]
    fn rebus_cells_are_rejected() {
        let text = r#"{"rows":1,"cols":3,"clues":{"across":{"1":"x"}},"solution":[["C","AT","S"]]}"#;
        let err = parse_puzzle_file(text, ParseOptions::default()).unwrap_err();
        assert_eq!(err, PuzzleError::Rebus { row: 0, col: 1, value: "AT".into() });
    }

    #[test]
    fn solution_blocks_must_match() {
        let text = r##"{"rows":1,"cols":3,"clues":{"across":{"1":"x"}},"solution":[["C","#","T"]]}"##;
        let err = parse_puzzle_file(text, ParseOptions::default()).unwrap_err();
        assert!(matches!(err, PuzzleError::SolutionCell { row: 0, col: 1, .. }));
    }

    #[test]
    fn zero_min_slot_length_is_rejected() {
        let text = r#"{"rows":1,"cols":3,"clues":{"across":{"1":"x"}}}"#;
        let err = parse_puzzle_file(text, ParseOptions { min_slot_length: 0 }).unwrap_err();
        assert_eq!(err, PuzzleError::ZeroSlotLength);
    }

    #[test]
    fn unchecked_cells_have_one_slot() {
        let g = PuzzleGrid::from_pattern(".....\n.####\n.####", clue).unwrap();
        assert_eq!(g.slots().len(), 2);
        assert_eq!(g.slots_at((0, 0)).count(), 2);
        assert_eq!(g.slots_at((0, 3)).count(), 1);
        assert_eq!(g.slots_at((2, 0)).count(), 1);
    }

    #[test]
    fn slot_id_text_round_trip() {
        for id in [SlotId::across(1), SlotId::down(62)] {
            assert_eq!(id.to_string().parse::<SlotId>().unwrap(), id);
        }
        assert!("12X".parse::<SlotId>().is_err());
        assert!("A".parse::<SlotId>().is_err());
    }
}
