//! Deterministic-equivalent test risk for ridge regression trained on a
//! two-group Gaussian mixture, with and without random projections, and a
//! Monte Carlo harness that checks it.
//!
//! The pipeline is `spectral` (population matrices in a shared eigenbasis)
//! -> `fixed_point` (scalar constants) -> `risk` (bias/variance per group and
//! the ODD/EDD/ADD metrics), with `simulator` producing finite-size draws and
//! `experiments` running grids and writing CSV/SVG.

pub mod error;
pub mod experiments;
pub mod fixed_point;
pub mod risk;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Group, JointSpectrum, NoiseAndRegularization, ScalingRegime};
