//! Adaptive subspace pursuit on a fixed beam-domain measurement.

use crate::beamforming::Measurement;
use crate::error::{Error, Result};
use crate::numerics::{BlockIndexSet, CMat};

use super::{block_correlation, find_top, ls_on_support, residual};

/// A consistent `(ĉ, Γ, r)` triple with `r = η̂ − D̂ĉ` for the measurement it
/// was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct AspState {
    pub symbols: CMat,
    pub support: BlockIndexSet,
    pub residual: CMat,
}

impl AspState {
    /// Zero estimate on `support` with the raw measurement as residual.
    pub fn initial(meas: &Measurement, support: BlockIndexSet) -> Self {
        Self {
            symbols: CMat::zeros(meas.users(), meas.slots()),
            support,
            residual: meas.combined.clone(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.residual.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AspOutcome {
    pub state: AspState,
    /// Iterations executed, including the final non-improving one.
    pub iterations: usize,
}

/// Runs up to `max_iterations` expand/prune rounds at sparsity `s` starting
/// from `init` and returns the last state whose residual energy strictly
/// decreased (or `init` if none did).
pub fn asp(meas: &Measurement, init: AspState, s: usize, max_iterations: usize) -> Result<AspOutcome> {
    let q = meas.users();
    if s == 0 || s > q || s > meas.combined.nrows() {
        return Err(Error::dim(
            "subspace pursuit",
            format!("sparsity {s} with {q} users and {} subcarriers", meas.combined.nrows()),
        ));
    }
    let mut best_energy = init.energy();
    let mut best = init;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let corr = block_correlation(&meas.gain, &best.residual);
        let expanded = best.support.union(&find_top(&corr, s)?);
        let w = ls_on_support(meas, &expanded)?;
        let energies: Vec<f64> = w.row_iter().map(|r| r.norm_squared()).collect();
        let support = find_top(&energies, s)?;
        let symbols = ls_on_support(meas, &support)?;
        let r = residual(meas, &symbols);
        let energy = r.norm_squared();
        if !(energy < best_energy) {
            break;
        }
        best_energy = energy;
        best = AspState { symbols, support, residual: r };
    }
    Ok(AspOutcome { state: best, iterations })
}
