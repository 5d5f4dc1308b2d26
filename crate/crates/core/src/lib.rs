//! Counting-field-tilted quantum master equations.
//!
//! Builds Redfield, secular, symmetrized and coarse-grained generators for a
//! system weakly coupled to thermal baths, propagates tilted density matrices
//! to obtain heat statistics, and measures how far each generator is from
//! detailed balance, energy conservation and the fluctuation theorems. An
//! exact random-matrix bath provides reference heat curves.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bath;
pub mod consistency;
pub mod counting;
pub mod error;
pub mod exact;
pub mod generators;
pub mod models;
pub mod operator;
pub mod quadrature;
pub mod system;

pub use error::{Error, Result};
pub use operator::{CompositeSpace, Operator, SuperOperator, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
