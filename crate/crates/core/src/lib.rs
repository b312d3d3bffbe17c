//! Discrete choice under risk with random, alternative-specific
//! consideration.
//!
//! Households face menus of deductible lotteries, differ in a scalar risk
//! aversion drawn from a bounded distribution, and may only consider a
//! random subset of the menu before maximizing expected utility. This crate
//! provides:
//!
//! - utility families and certainty equivalents ([`utility`]),
//! - pairwise indifference cutoffs and menu diagnostics ([`cutoffs`]),
//! - bounded Beta-mixture preference distributions ([`dist`]),
//! - consideration-set mechanisms ([`consider`]),
//! - choice-probability kernels and likelihoods ([`choice`]),
//! - maximum-likelihood estimation, bootstrap, and model comparison
//!   ([`estimate`]),
//! - identification diagnostics on analytic choice-probability fields
//!   ([`ident`]),
//! - synthetic-population simulation ([`simulate`]),
//! - welfare accounting for consideration frictions ([`welfare`]),
//! - the on-disk dataset contract ([`data`]).

pub mod choice;
pub mod consider;
pub mod context;
pub mod cutoffs;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod ident;
pub mod numeric;
pub mod optim;
pub mod simulate;
pub mod utility;
pub mod welfare;

pub use context::{Alternative, DeductibleLottery, HouseholdContext, LotteryLeg};
pub use error::{Error, Result};
pub use utility::UtilityFamily;
