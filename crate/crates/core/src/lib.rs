//! Progressive implicit networks.
//!
//! A scene is represented as a base component plus a stack of weighted
//! residuals, `S(x) = c + sum_l w_l R_l(f_l(x))`. Each residual comes from a
//! small level MLP that sees one contiguous band of sorted Fourier-feature
//! frequencies (and the previous level's features), and a shared head maps
//! every level's features back into the signal domain. Dropping the higher
//! level MLPs yields coarser, self-contained reconstructions.
//!
//! The crate is organised bottom-up:
//!
//! - [`encoding`]: frequency banks and per-level Fourier features.
//! - [`numerics`]: dense tensors, layers with hand-derived gradients, Adam.
//! - [`model`]: the progressive network and the FF / SIREN baselines.
//! - [`training`]: losses and the deterministic training loop.
//! - [`tasks`]: 1D signals, images and truncated SDF sample sets.
//! - [`geometry`]: meshes, signed distance, marching cubes, Chamfer distance.
//! - [`analysis`]: metrics, level spectra, frequency-bin mapping and sweeps.

pub mod analysis;
pub mod encoding;
pub mod error;
pub mod geometry;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod tasks;
pub mod training;

pub use error::{PinError, Result};
