//! Game-theoretic spectrum sharing: equilibria and learning dynamics for
//! multi-user power control over frequency-selective interference channels.
//!
//! * [`spectrum`] discretized channel model, rates and water-filling.
//! * [`continuous`] iterative water-filling, leader/follower search,
//!   weighted rate-sum oracle and rate-region sweeps.
//! * [`matrix`] finite normal-form games: Nash, Stackelberg and correlated
//!   equilibria.
//! * [`learning`] repeated-game engine with regret matching, fictitious
//!   play, reinforcement and myopic best-response learners.
//! * [`experiments`] value-of-knowledge evaluation and channel ensembles.

pub mod continuous;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod learning;
pub mod matrix;
pub mod spectrum;

pub use error::{Error, Result};
pub use exec::Execution;
