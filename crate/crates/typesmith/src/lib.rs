//! typesmith predicts Python argument and return types from partially
//! annotated corpora and inserts only type-correct annotations.
//!
//! The pipeline has three stages:
//!
//! 1. [`extract`] runs a lightweight static analysis over Python sources and
//!    produces one [`extract::FunctionRecord`] per function, holding the
//!    identifier, usage, comment, and available-type hints for every type slot.
//! 2. [`model`] (together with [`vocab`] and [`embedding`]) trains a neural
//!    classifier over a bounded type vocabulary and produces ranked
//!    per-slot predictions.
//! 3. [`search`] explores combinations of the top-k predictions under
//!    feedback from a gradual type checker ([`checker`]) and hands the best
//!    type-correct assignment to [`rewrite`], which splices the annotations
//!    into the source without touching any other byte.
//!
//! [`eval`] hosts the dataset split, metrics, the naive frequency baseline,
//! and the search evaluation harness behind the CLI.

pub mod checker;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod extract;
pub mod model;
pub mod par;
pub mod python;
pub mod rewrite;
pub mod search;
pub mod synth;
pub mod vocab;
