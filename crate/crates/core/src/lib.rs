//! Deep survival analysis: Cox-model losses, concordance metrics, a small
//! from-scratch network kernel, simulation data generators and the
//! training loop that ties them together.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod formats;
pub mod gradcheck;
pub mod metrics;
pub mod nn;
pub mod survival;
pub mod train;

pub use error::{DataError, NnError, SurvivalError, TrainError};
