//! Tooling for generating, verifying, scoring and refining local-search
//! preprocessors that seed the default phases of a CDCL SAT solver.
//!
//! The crate is organised along the pipeline:
//!
//! * [`cnf`] – clause database, DIMACS I/O, assignment evaluation and flip scores.
//! * [`encodings`] – the three encoding schemes (graph colouring, directed
//!   feedback vertex set, bounded-depth decision trees) plus cardinality
//!   constraints, decoders and upper-bound heuristics.
//! * [`localsearch`] – baseline local searches and structure-aware strategies.
//! * [`runner`] – sandboxed execution of candidate programs.
//! * [`solver`] – phase-seeded solving through a built-in DPLL solver or an
//!   external executable.
//! * [`scoring`] – lexicographic ranking, relative scores and train/test splits.
//! * [`llm`] – gathering, repair and refinement loops with record/replay.
//! * [`cli`] – the operator commands behind the `lsgen` binary.

pub mod cli;
pub mod cnf;
pub mod encodings;
pub mod llm;
pub mod localsearch;
pub mod runner;
pub mod scoring;
pub mod solver;

pub use cnf::{Assignment, CnfFormula, FlipScore, Lit, Var};

