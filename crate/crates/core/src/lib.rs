//! Mean-field SDEs whose diffusion switches on the moment g(t) = E||X_t - z||^p.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod curve;
pub mod error;
pub mod lifetime;
pub mod metrics;
pub mod model;
pub mod moment;
pub mod oscillation;
pub mod presets;
pub mod reduce;
pub mod rng;
pub mod simulate;

pub use curve::{Crossing, MomentCurve, Provenance};
pub use error::{BlowUp, Error, Result};
