//! Finite approximations for weakly coupled multi-agent control.
//!
//! A team of `N` exchangeable agents evolves as
//! `x^i_{t+1} = f(x^i_t, u^i_t, mu_t, w^i_t, w^0_t)` where `mu_t` is the
//! empirical distribution of all agent states (the mean-field term), `w^i`
//! is per-agent idiosyncratic noise and `w^0` is common noise shared within
//! a time step. The team minimizes the discounted average stage cost
//! `sum_t beta^t (1/N) sum_i c(x^i_t, u^i_t, mu_t)`.
//!
//! The problem is equivalent to a centralized Markov decision process whose
//! state is the empirical measure `mu` and whose action is a joint
//! state-action measure `Theta` with `Theta(., U) = mu(.)`. This crate makes
//! that MDP finite three different ways and quantifies the loss:
//!
//! - quantize agent states into grid cells and enumerate all `N`-agent
//!   empirical measures over the cells ([`mdp::build_finite_population_mdp`]);
//! - for the infinite-population limit, track the measure flow on the simplex
//!   and project it onto `n`-agent empirical measures with the nearest-neighbor
//!   map `rho` ([`mdp::build_aggregation_mdp`]);
//! - or replace the projection by multinomial sampling of `n` states from the
//!   flowed measure ([`mdp::build_sampling_mdp`]).
//!
//! Each finite MDP is solved by value iteration ([`solver::value_iteration`]),
//! the optimal measure-level action is disintegrated into a symmetric
//! per-agent randomized rule ([`solver::to_agent_policy`]), and the rule is
//! replayed in the original continuous-state system
//! ([`simulate::rollout_team`]) to measure regret against exact oracles
//! ([`simulate::brute_force_oracle`]). The [`diagnostics`] module evaluates
//! the closed-form suboptimality bounds, all of which require the contraction
//! condition `2 K_f beta < 1`.

pub mod diagnostics;
mod error;
pub mod grid;
pub mod mdp;
pub mod measures;
pub mod model;
pub mod registry;
pub(crate) mod seeding;
pub mod simulate;
pub mod solver;
pub mod textio;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
