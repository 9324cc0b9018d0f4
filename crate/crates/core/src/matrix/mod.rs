//! Finite normal-form games: construction, best responses, dominance, pure
//! and mixed Nash equilibria, finite Stackelberg play and correlated
//! equilibria.

pub mod correlated;
pub mod equilibrium;
pub mod game;
pub mod lp;

pub use correlated::{is_correlated_equilibrium, optimize_ce, CeCheck, CeOptimum, JointDistribution};
pub use equilibrium::{
    best_response, best_response_dynamics, max_weighted_profile, mixed_nash_2x2, pure_nash, stackelberg_finite,
    strictly_dominant_action, FiniteStackelberg, MixedNash, MixedStrategy,
};
pub use game::{
    build_contention_game, build_power_game_2x2, build_power_game_grid, two_channel_game, NormalFormGame,
    MAX_GRID_PROFILES,
};
