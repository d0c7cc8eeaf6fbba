//! A crossword solving engine: clue retrieval, loopy belief propagation over the grid, and a
//! letter-level local search that repairs the fill.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bp;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod local_search;
pub mod puzzle;
pub mod qa;
pub mod segment;
pub mod solver;
