//! Simulation toolkit for critical branching processes in random environment
//! whose associated random walk has heavy tails.
//!
//! The crate is organised bottom-up: [`env_laws`] describes the increment law
//! of the associated walk, [`random_walk`] samples the walk and its conditioned
//! versions, [`bpre`] holds the exact quenched formulas for geometric offspring
//! together with population simulation and annealed estimators, [`rwre`] runs
//! the equivalent random walk in random environment, and [`estimators`] is the
//! statistical toolkit all of them report through.

pub mod bpre;
pub mod env_laws;
pub mod estimators;
pub mod error;
pub mod math;
pub mod quadrature;
pub mod random_walk;
pub mod rwre;
pub mod streams;

pub use env_laws::{positivity_index_rho, EnvironmentLaw, LawSpec, Normalization, StabilityParams, TailProfile};
pub use error::{Error, Result};
pub use streams::{replica_stream, replicate, sub_seed, Stream};
