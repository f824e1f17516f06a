//! Expectation estimators for functionals of random processes: Monte Carlo,
//! the shift (ergodic averaging along one random sequence) and quasi-Monte
//! Carlo, all driven from a lazily generated, memoizing tape of uniforms.
//!
//! The shift evaluates a model `F` on `ω, θω, θ²ω, ...`, where `θ` drops the
//! first uniform of the sequence. Consecutive samples therefore share almost
//! all of their random input, and [`tape::Tape`] keeps per-cell memo slots
//! so work that depends only on one uniform is done once.

pub mod estimators;
pub mod lowdisc;
pub mod markov;
pub mod report;
pub mod rng;
pub mod tape;
pub mod transport;

pub use estimators::{
    batch_means_variance, lil_band, mc_estimate, permuted, qmc_estimate, run_on_tape, shift_estimate,
    ConsumptionModel, CoordinatePermutation, EstimateError, EstimatorReport, Evaluation, FunctionModel,
    Method, ModelError, RunningStats,
};
pub use lowdisc::{koksma_hlawka_bound, radical_inverse, star_discrepancy_1d, HaltonSequence};
pub use markov::{gamblers_ruin, run_chain, ChainConsumption, RuinParams, RuinPayoff};
pub use rng::{seed_generator, GeneratorState};
pub use tape::{Tape, TapeCursor, TapeError, TransformId};
pub use transport::{simulate_tree, transport_model, FreePathLaw, TransportModel, TransportParams};
