//! Budget-aware generalized second price auctions.
//!
//! Exact-arithmetic implementations of four GSP variants that handle budget
//! constraints in different ways, together with the stability toolkit around
//! them: envy-free checking and construction, bid profiles realizing a given
//! envy-free assignment, Nash verification with machine-checkable
//! certificates, and brute-force oracles (exact linear feasibility and grid
//! refutation) for desk-scale ground truth.

pub mod cli;
pub mod efconstruct;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod realize;
pub mod report;
pub mod scenario;
pub mod stability;

pub use mechanisms::Mechanism;
pub use model::{Bid, BidProfile, ExtendedUtility, Instance, Outcome, Player};
pub use rational::Rat;
