//! Perfect simulation for Dirichlet-process mixtures of Markov chains.
//!
//! The crate is `no_std` (it needs `alloc`). Float math goes through `libm`,
//! parallel work is handed to an [`exec::Executor`], and all randomness comes
//! from a counter-based [`ledger::RandomLedger`] so every run is replayable.

#![no_std]

extern crate alloc;

pub mod anneal;
pub mod ars;
pub mod bounds;
pub mod cftp;
pub mod conditionals;
pub mod enumerate;
pub mod error;
pub mod exec;
pub mod ledger;
pub mod model;
pub mod partition;
pub mod perfect;
pub mod phigamma;
pub mod piecewise;
pub mod special;

mod math;

pub use error::{Error, Result};
