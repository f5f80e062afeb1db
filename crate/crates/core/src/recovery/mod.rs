//! Block-sparse multi-user detection and data recovery.
//!
//! [`asp`] is the greedy support search on a fixed measurement, [`joint`]
//! alternates it with adaptive beamforming over a sweep of sparsity levels,
//! [`ic`] refines the symbol estimates by cancelling the other clusters, and
//! [`baseline`] is the single-antenna known-sparsity reference.

pub mod asp;
pub mod baseline;
pub mod ic;
pub mod joint;

use serde::{Deserialize, Serialize};

use crate::beamforming::{Loading, Measurement};
use crate::error::{Error, Result};
use crate::numerics::{ls_solve, BlockIndexSet, CMat, CVec};
use crate::spreading::EquivalentChannel;

pub use asp::{asp, AspOutcome, AspState};
pub use baseline::oracle_blocksp;
pub use ic::jabfsp_ic;
pub use joint::{initial_weights, jabfsp, jabfsp_cluster};

/// Beamformer used to form the first measurement of every cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialBeamformer {
    Sbf,
    Zf,
}

/// Algorithm constants shared by the receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Upper bound `s̄` of the sparsity search.
    pub max_sparsity: usize,
    /// ASP iteration cap `L1`.
    pub max_asp_iterations: usize,
    /// Interference-cancellation rounds `L2`.
    pub ic_rounds: usize,
    /// Inner refinement cap `L3` per cancellation round.
    pub ic_inner_iterations: usize,
    /// Relative residual change `ϑ₁` that ends the beamforming loop.
    pub stop_factor: f64,
    /// Hard cap on beamforming updates per sparsity level.
    pub max_bf_updates: usize,
    /// TPR threshold `γ́`.
    pub tpr_threshold: f64,
    /// Empirical SNR of the interfering clusters (dB).
    pub esnr_db: f64,
    /// Empirical activity rate of the interfering clusters.
    pub activity_hint: f64,
    pub loading: Loading,
    pub initial_beamformer: InitialBeamformer,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            max_sparsity: 8,
            max_asp_iterations: 10,
            ic_rounds: 3,
            ic_inner_iterations: 5,
            stop_factor: 1e-3,
            max_bf_updates: 10,
            tpr_threshold: 3.0,
            esnr_db: 13.0,
            activity_hint: 0.1,
            loading: Loading::NoiseScaled,
            initial_beamformer: InitialBeamformer::Sbf,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::config(msg.to_string()));
        if self.max_sparsity == 0 {
            return bad("max_sparsity must be at least 1");
        }
        if self.max_asp_iterations == 0 {
            return bad("max_asp_iterations must be at least 1");
        }
        if self.ic_inner_iterations == 0 {
            return bad("ic_inner_iterations must be at least 1");
        }
        if !(self.stop_factor > 0.0 && self.stop_factor.is_finite()) {
            return bad("stop_factor must be positive");
        }
        if !(self.tpr_threshold >= 1.0) {
            return bad("tpr_threshold must be at least 1");
        }
        if !self.esnr_db.is_finite() {
            return bad("esnr_db must be finite");
        }
        if !(0.0..=1.0).contains(&self.activity_hint) {
            return bad("activity_hint must lie in [0, 1]");
        }
        if let Loading::Fixed(v) = self.loading {
            if !(v >= 0.0 && v.is_finite()) {
                return bad("fixed loading must be non-negative");
            }
        }
        Ok(())
    }
}

/// What the receiver is allowed to know about a frame.
#[derive(Debug, Clone, Copy)]
pub struct ReceiverInput<'a> {
    pub y: &'a CMat,
    /// Noise power, when the loading rule may use it.
    pub noise_power: Option<f64>,
    pub eqch: &'a EquivalentChannel,
    /// Average steering vector `ā_n` of every cluster.
    pub centers: &'a [CVec],
}

/// Outcome of one sparsity hypothesis of the joint search.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityRecord {
    pub sparsity: usize,
    pub residual_energy: f64,
    pub support: BlockIndexSet,
    pub symbols: CMat,
    pub tpr: f64,
    pub weight: CVec,
    pub bf_updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub cluster: usize,
    pub support: BlockIndexSet,
    /// Q × T; rows outside `support` are zero.
    pub symbols: CMat,
    pub residual_energy: f64,
    pub weight: CVec,
    pub sparsity: usize,
    pub records: Vec<SparsityRecord>,
    /// No hypothesis passed the TPR gate.
    pub fallback: bool,
    /// Every hypothesis failed numerically.
    pub failed: bool,
}

/// Indices of the `count` largest values, ties toward the lower index.
pub fn find_top(values: &[f64], count: usize) -> Result<BlockIndexSet> {
    if count > values.len() {
        return Err(Error::dim(
            "find_top",
            format!("{count} of {} values", values.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx.sort_unstable();
    Ok(BlockIndexSet::from_sorted_unchecked(idx))
}

/// `‖D̂[q,T]ᴴ r‖²` for every user, evaluated as the row energies of `B̂ᴴR`.
pub fn block_correlation(gain: &CMat, residual: &CMat) -> Vec<f64> {
    let corr = gain.adjoint() * residual;
    corr.row_iter().map(|r| r.norm_squared()).collect()
}

/// Block LS restricted to `support`; rows outside it are zero.
pub fn ls_on_support(meas: &Measurement, support: &BlockIndexSet) -> Result<CMat> {
    let mut x = CMat::zeros(meas.users(), meas.slots());
    if support.is_empty() {
        return Ok(x);
    }
    let sub = meas.gain.select_columns(support.indices());
    let sol = ls_solve(&sub, &meas.combined)?;
    for (i, q) in support.iter().enumerate() {
        x.row_mut(q).copy_from(&sol.row(i));
    }
    Ok(x)
}

/// `Ŷ − B̂X`, the residual `η̂ − D̂ĉ` in matrix form.
pub fn residual(meas: &Measurement, x: &CMat) -> CMat {
    &meas.combined - &meas.gain * x
}

/// Max over min row energy of `x` on `support`; infinite when a supported
/// row is zero or the support is empty.
pub fn tpr(x: &CMat, support: &BlockIndexSet) -> f64 {
    let energies: Vec<f64> = support.iter().map(|q| x.row(q).norm_squared()).collect();
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(0.0, f64::max);
    if energies.is_empty() || lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityDecision {
    /// Index into the hypothesis list (sparsity minus one).
    pub index: usize,
    pub fallback: bool,
}

/// TPR-gated minimum-residual rule. Hypotheses with infinite residual never
/// win; `None` when every residual is infinite.
pub fn decide_sparsity(tprs: &[f64], residuals: &[f64], threshold: f64) -> Option<SparsityDecision> {
    let argmin = |allowed: &dyn Fn(usize) -> bool| {
        (0..residuals.len())
            .filter(|&i| allowed(i) && residuals[i].is_finite())
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if residuals[b] <= residuals[i] => Some(b),
                _ => Some(i),
            })
    };
    if let Some(index) = argmin(&|i| tprs[i] <= threshold) {
        return Some(SparsityDecision { index, fallback: false });
    }
    argmin(&|_| true).map(|index| SparsityDecision { index, fallback: true })
}
