//! Design of one-dimensional Schrödinger potentials whose bound state is as
//! long-lived as possible under time-periodic forcing.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: uniform grids, sampled potentials and design parameters.
//! * [`spectral`]: the finite-difference operator `H = -d²/dx² + V`, its
//!   ground state, outgoing resolvent, distorted plane waves and the
//!   zero-energy Wronskian.
//! * [`fgr`]: the Fermi golden rule rate `Γ[V]` and its functional gradients.
//! * [`optimizer`]: log-barrier L-BFGS minimisation of `Γ` over the admissible set.
//! * [`timedomain`]: forced Schrödinger evolution with absorbing layers, used
//!   to check the predicted lifetimes independently.
//! * [`config`]: the JSON run configuration shared by the CLI and the tests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fgr;
pub mod grid;
pub mod linalg;
pub mod optimizer;
pub mod spectral;
pub mod timedomain;

pub use error::{PdpError, Result};
pub use fgr::{FgrResult, GradientField};
pub use grid::{BetaMode, DesignParams, Grid, PotentialField};
pub use num_complex::Complex64;
pub use optimizer::{DesignRun, OptOptions, OptTrace, OptimizeOutcome};
pub use spectral::{BoundState, ScatteringState, WronskianResult};
pub use timedomain::{SimConfig, SimResult};
