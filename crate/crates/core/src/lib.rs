//! Photon statistics of conditional photon subtraction from single-mode
//! thermal light.
//!
//! A thermal beam is split at a beam splitter; the reflected arm is measured
//! either by a photon-number-resolving counter (conclusive subtraction, CPS)
//! or by an on/off detector (inconclusive subtraction, IPS), and the
//! transmitted arm is kept conditionally. The crate computes the exact
//! conditional photon statistics, their Fano factors and non-Gaussianity
//! bounds, and emulates the pulsed photon-counting experiment shot by shot.
//!
//! - [`fock`]: truncated photon-number-diagonal states and their statistics.
//! - [`photon_ops`]: beam-splitter weights, detector POVM, lossy channel, joint tables.
//! - [`cps`]: conclusive photon subtraction.
//! - [`ips`]: inconclusive photon subtraction in phase space, Wigner grids.
//! - [`nongauss`]: non-Gaussianity and its detected-photon lower bound.
//! - [`lab`]: shot-level Monte Carlo of the detection chain and its analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cps;
pub mod error;
pub mod fock;
pub mod ips;
pub mod lab;
pub mod nongauss;
pub mod photon_ops;
pub mod table;

pub use error::{Error, Result};
pub use fock::{DiagonalState, ThermalParams};
pub use photon_ops::JointDistribution;
