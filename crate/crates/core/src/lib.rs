//! Online convex optimization in changing environments.
//!
//! A meta-learner keeps a geometric grid of constant-step OGD experts and
//! combines them with exponential weights, which removes the need to know the
//! comparator's path length in advance. The crate also carries the loss
//! environments, comparator sequences and regret accounting used to check the
//! closed-form guarantees at run time.

pub mod ader;
pub mod environments;
pub mod error;
pub mod experts;
pub mod geometry;
pub mod meta;

pub use ader::{
    run, AlgorithmConfig, ComparatorReport, RegretTrace, RoundRecord, Theorem, Variant,
};
pub use error::{Error, Result};
pub use geometry::{FeasibleSet, Vector};
