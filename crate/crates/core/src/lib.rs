//! Explicit solution of the optimal open/close switching problem with a
//! permanent abandonment option under geometric Brownian motion.
//!
//! [`model`] holds problem data and the closed-form integrals, [`classify`]
//! decides which of the eight solution regimes applies, [`solver`] computes
//! the free boundaries, [`value`] assembles the piecewise value functions and
//! [`verify`] checks the result against the HJB system and Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod rootfind;

pub use error::{Result, SwitchError};
pub use model::{
    compute_roots, CostParams, FundamentalRoots, MarketParams, PayoffSpec, PowerTerm, Problem,
    ProblemData, StepTerm, Weight,
};
pub mod classify;
pub mod solver;

pub use classify::{classify, CaseId, Classification, Thresholds};
pub use solver::{solve_case, CaseSolve, Coefficients, FreeBoundaries, Residual};
pub mod value;

pub use value::{build_solution, Action, Interval, Piece, PieceForm, RegionMap, Solution};
pub mod verify;

pub mod cli;
