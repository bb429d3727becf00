//! Sample size determination and simulation for randomised basket trials
//! that borrow strength across subtrials through commensurate priors.
//!
//! A basket trial runs K parallel randomised subtrials, one per patient
//! subgroup, each comparing an experimental arm E against a control arm C on
//! a normally distributed endpoint. The treatment effect in subtrial k is
//! borrowed into subtrial q with a strength governed by a pre-specified
//! pairwise commensurability weight, and the per-subtrial sample sizes are
//! chosen so that every subtrial reaches a decisive efficacy or futility
//! conclusion at its planned analysis.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`]: scalar primitives (normal quantiles, Gamma mixtures,
//!   Hellinger distance, moment-matched precision variances).
//! * [`commensurate`]: the borrowing model (weight matrices, per-subtrial
//!   designs, synthesis weights, collective priors, posteriors).
//! * [`solver`]: required precisions and the coupled sample size equations,
//!   solved by a damped Newton iteration with nonnegativity projection.
//! * [`decision`]: the posterior efficacy/futility decision rule.
//! * [`sim`]: Monte Carlo verification of operating characteristics.
//! * [`config`] and [`report`]: the JSON design-file format and the table,
//!   JSON and CSV renderers used by the command line interface.

// Numeric kernels index several slices in lockstep; indexed loops keep the
// coordinate arithmetic visible.
#![allow(clippy::needless_range_loop)]

pub mod commensurate;
pub mod config;
pub mod decision;
pub mod error;
pub mod report;
pub mod sim;
pub mod solver;
pub mod stats;

pub use commensurate::{BasketDesign, NormalSummary, SubtrialDesign, WeightMatrix};
pub use decision::{decide, TrialDecision, Verdict};
pub use error::{Error, Result};
pub use sim::{
    run_study, tp_fp_sweep, Allocation, Model, OperatingCharacteristics, ScenarioConfig,
    SubtrialRates, SweepRow, SweepSettings,
};
pub use solver::{
    required_precision, sample_size_borrowing, sample_size_no_borrowing, DecisionSpec, Direction,
    SampleSizeSolution, SolveMode,
};
pub use stats::GammaMixtureHyper;
