//! Local-search clustering over discrete candidate sets in low dimension.
//!
//! An instance is a set of client points on an integer grid, a set of
//! candidate centers (each with a non-negative opening weight), a budget `k`,
//! and an exponent `p`; the objective is the sum of opened weights plus every
//! client's distance-to-nearest-open-center raised to `p` (`p = 2` by
//! default, i.e. weighted k-means).
//!
//! The crate provides:
//!
//! * instance/solution types, exact cost evaluation, grid snapping, candidate
//!   surrogate generation, and weight rounding ([`instance`], [`io`]);
//! * seeding and baseline refiners: D²-sampling, Lloyd steps restricted to
//!   candidates, and exhaustive swap search ([`seeding`]);
//! * randomly shifted quadtree dissections with moat classification
//!   ([`dissection`]);
//! * a dissection-tree dynamic program that finds the best bounded-size swap
//!   of the current solution ([`dp`]);
//! * the iterated local-search driver ([`driver`]);
//! * brute-force oracles for ground truth in tests ([`oracle`]);
//! * instance generators and an experiment-matrix runner backing the CLI
//!   ([`generator`], [`experiment`]).

pub mod acceptance;
pub mod dissection;
pub mod dp;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod instance;
pub mod io;
pub mod oracle;
pub mod seeding;

pub use error::Error;
pub use instance::{Instance, Point, Solution};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
