//! Testing discrete instrumental variables.
//!
//! The crate bundles the population and finite-sample necessary tests for
//! instrumental-variable validity, the Bayesian validity ratio computed from
//! response-variable marginal likelihoods, a simulation laboratory and an
//! end-to-end pipeline for tabular data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod mlik;
pub mod nectest;
pub mod numeric;
pub mod pipeline;
pub mod respvar;
pub mod simlab;

pub use data::{
    build_contingency, cond_prob_vector, validate_dataset, CondProbVector, ContingencyTable, Dataset, Levels,
    MissingPolicy,
};
pub use error::{Error, Result};
