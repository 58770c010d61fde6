//! Ordering policies and evaluation tools for periodic-review, fixed-lifetime
//! perishable inventory with FIFO issuing and lost sales.
//!
//! The crate is organised bottom-up:
//!
//! - [`demand`]: conditional demand distributions, including the compound
//!   Poisson surgery model with a perfect count forecast.
//! - [`inventory`]: state, FIFO transitions and cost accounting.
//! - [`marginal`]: marginal shortage, holding and outdating costs charged to
//!   a single order.
//! - [`policies`]: dual-balancing, myopic lower bound, truncated-balancing and
//!   base-stock ordering rules.
//! - [`dp`]: exact dynamic programming and brute-force oracles for small instances.
//! - [`fifo`]: sufficient conditions under which FIFO issuing is optimal.
//! - [`sim`]: seeded Monte Carlo evaluation with common random numbers.

pub mod demand;
pub mod dp;
pub mod error;
pub mod fifo;
pub mod inventory;
pub mod marginal;
pub mod policies;
pub mod sim;

pub use error::{Error, Result};
