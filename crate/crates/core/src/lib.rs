//! Derive smaller binary orthogonal arrays from bigger ones.
//!
//! Given an `OA(N, k, 2, t)` and a smaller index `λ′`, the task is to find
//! `p = N - λ′ 2^t` rows whose removal leaves an `OA(λ′ 2^t, k, 2, t)`.
//! Candidate row sets are weight-`p` bitstrings ([`RemovalMask`]) evolved by
//! a steady-state GA ([`evolve`]) with weight-preserving operators, scored by
//! the Minkowski distance of the reduced array's tuple counts from perfect
//! balance ([`fitness`]). Small instances can be solved exactly by
//! enumeration ([`oracle`]). [`runner`] drives repeated, seeded experiments.

pub mod evolve;
pub mod fitness;
pub mod mask;
pub mod oa;
pub mod oracle;
pub mod runner;

pub use evolve::{run_ga, CrossoverVariant, GaConfig, RunReport};
pub use fitness::{minkowski_fitness, Aggregation, FitnessConfig, FitnessEvaluator, FitnessValue};
pub use mask::RemovalMask;
pub use oa::{is_orthogonal_array, parity_check_array, remove_rows, replicate_and_shuffle, OaParams, OrthogonalArray};
pub use oracle::{exhaustive_search, verify_ga_result, OracleOptions, OracleReport};
pub use runner::{run_batch, BatchSummary, ExperimentSpec, Mode};
