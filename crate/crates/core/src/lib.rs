//! Tree-learning laboratory for studying the pointwise behaviour of CART.
//!
//! The crate provides exact CART split search and growth, honest and CART+
//! trees, causal tree estimators under known randomisation, cost-complexity
//! pruning, honest random forests, brute-force reference implementations,
//! and a seeded Monte Carlo harness that writes CSV/SVG reports.

pub mod cart;
pub mod cli;
pub mod causal;
pub mod dgp;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod honest;
pub mod oracle;
pub mod prune;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
