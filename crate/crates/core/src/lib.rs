//! Analysis and simulation of cache replacement under time-varying content
//! popularity.
//!
//! A cache of `L` unit-size slots serves requests drawn from a catalog of
//! `N_c` contents whose popularity changes over time. The crate models the
//! cache as a distribution over its `binomial(N_c, L)` possible states and
//! studies replacement schemes through the per-request state transition field
//! `u(eta) = Theta eta - eta`:
//!
//! - [`state_space`]: enumeration of cache states, neighbor structure, and the
//!   cache-state matrix.
//! - [`popularity`]: shot-noise, Gaussian-pulse, static, and piecewise rate
//!   models; per-request popularity vectors; inhomogeneous-Poisson traces.
//! - [`schemes`]: exact conditional and overall transition matrices for
//!   random replacement (RR), replace-less-popular (LP), replace-the-least-
//!   popular (TLP-A/P), and LRU, including the LRU recency probabilities.
//! - [`analysis`]: SCP/CCP mappings, instantaneous fields and their content
//!   components, hit probabilities, the one-step hit-probability delta with
//!   its decomposition and bounds, and steady states.
//! - [`simulator`]: trace-driven Monte Carlo hit-ratio estimation with paired
//!   parameter sweeps.
//!
//! All randomness is ChaCha8-based and fully determined by explicit seeds.

pub mod analysis;
pub mod error;
pub mod matrix;
pub mod popularity;
pub mod rng;
pub mod schemes;
pub mod simulator;
pub mod state_space;

pub use analysis::{
    average_hit_prob_direct, average_hit_prob_stf, ccp_from_scp, ccp_step, content_stf,
    content_stf_closed, evolve_scp, field_grid, hit_prob_delta, instantaneous_hit_prob,
    instantaneous_stf, scp_from_ccp, state_hit_vector, steady_state, decomposed_delta,
    delta_bounds, CCPVector, FieldSample, SCPVector, STFVector, ScpEvolution, ScpFromCcp,
    StateHitVector,
};
pub use error::{Error, Result};
pub use matrix::{LruTableSource, TransitionMatrix};
pub use popularity::{
    gaussian_rate, popularity_at, predict, sample_model, sample_trace, shot_noise_rate,
    ModelConfig, ModelKind, PopularityVector, Predictor, RateModel, RequestTrace,
};
pub use schemes::{
    conditional_transition, general_phi_table, lru_conditional_prob, lru_joint_prob,
    overall_transition, LruConditionalTable, PhiTable, SchemeSpec,
};
pub use simulator::{
    empirical_scp, run_monte_carlo, run_trace, sweep_t0max, CacheSim, SimConfig, SimResult,
    SweepRow, TraceRunConfig,
};
pub use state_space::{binomial, CacheState, ContentId, StateSpace};
