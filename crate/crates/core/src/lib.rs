//! Simulation of grant-free NOMA uplink reception with a multi-antenna base
//! station: clustered users, Zadoff-Chu spreading over OFDM subcarriers,
//! per-cluster receive beamforming and block-sparse activity detection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod recovery;
pub mod scenario;
pub mod selftest;
pub mod spreading;
pub mod transceiver;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use numerics::{BlockIndexSet, CMat, CVec, C64};
