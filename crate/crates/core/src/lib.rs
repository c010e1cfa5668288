//! Shock measures with second class particles for one-dimensional
//! interacting particle systems.
//!
//! The crate covers a family of nearest-neighbour growth models (asymmetric
//! simple exclusion, exponential generalized zero range, exponential
//! bricklayers) plus the branching coalescing random walk, and provides
//!
//! * [`models`]: rate functions and their structural checks,
//! * [`measures`]: stationary marginals, coupled shock measures, sampling,
//! * [`exact`]: generators and exact expectation engines that verify the
//!   random-walk identities for shock measures test function by test function,
//! * [`simulator`]: an event-driven coupled simulator that tracks second class
//!   particles (or the rightmost BCRW particle),
//! * [`hydro`]: flux functions, Rankine-Hugoniot velocities and the
//!   multi-shock current formulas.
//!
//! Data-parallel loops (basis residuals, simulation replicas) run on rayon
//! when the `parallel` feature is enabled; [`Exec::Sequential`] forces the
//! sequential path at runtime.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod hydro;
pub mod measures;
pub mod models;
mod par;
pub mod simulator;

pub use error::{Error, Result};
pub use par::Exec;
