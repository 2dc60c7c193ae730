//! Exact analysis of the Like and Balanced Like online fair-division
//! mechanisms: randomized runs, outcome distributions, strategic behaviour,
//! envy and welfare, competitive ratios and prices of anarchy, plus the
//! instance generators and experiment sweeps built on top of them.

pub mod bench;
pub mod budget;
pub mod cli;
pub mod dist;
pub mod error;
pub mod format;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod strategy;
pub mod welfare;

pub use budget::Budget;
pub use error::{Error, Result};
pub use mechanisms::{MechanismKind, RngSeed};
pub use model::{sincere_bids, Allocation, BidProfile, CountState, Instance, OutcomeDistribution};
pub use rational::Rational;
