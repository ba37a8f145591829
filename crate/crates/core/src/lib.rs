//! Condition-based production control for systems whose deterioration
//! accelerates with the production rate.
//!
//! The crate solves the finite-horizon control problem by a backward
//! finite-difference recursion ([`hjb`]), checks the structure of the
//! resulting policies ([`structure`]), optimizes the maintenance interval
//! ([`tactical`]), compares against a static fixed-rate baseline
//! ([`baseline`]), learns an unknown base rate with a Gamma prior
//! ([`bayes`]) and evaluates policies by simulation ([`sim`]). Small fleets
//! sharing a demand rate are handled by [`multi`]; experiment files are
//! read by [`config`].

pub mod baseline;
pub mod bayes;
pub mod config;
pub mod csvfmt;
pub mod error;
pub mod hjb;
pub mod model;
pub mod multi;
pub mod search;
pub mod sim;
pub mod structure;
pub mod tactical;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use hjb::{solve, solve_with, ActionMode, SolutionGrid};
pub use model::{validate_instance, CostFunction, GridConfig, ProblemInstance, RateFunction, ValidatedInstance};
