//! Single-antenna block subspace pursuit with known sparsity.

use crate::beamforming::build_measurement;
use crate::error::{Error, Result};
use crate::numerics::{BlockIndexSet, CMat, CVec, C64};
use crate::spreading::EquivalentChannel;

use super::{asp, AspState, RecoveryResult};

/// Runs the pursuit on antenna `antenna` of `y`, which should contain only
/// cluster `cluster`'s signal plus noise.
pub fn oracle_blocksp(
    y: &CMat,
    eqch: &EquivalentChannel,
    cluster: usize,
    sparsity: usize,
    antenna: usize,
    max_iterations: usize,
) -> Result<RecoveryResult> {
    if antenna >= eqch.antennas {
        return Err(Error::dim(
            "oracle baseline",
            format!("antenna {antenna} of {}", eqch.antennas),
        ));
    }
    let mut select = CVec::zeros(eqch.antennas);
    select[antenna] = C64::new(1.0, 0.0);
    let meas = build_measurement(y, eqch, cluster, &select)?;
    let init = AspState::initial(&meas, BlockIndexSet::empty());
    let out = asp(&meas, init, sparsity, max_iterations)?.state;
    let residual_energy = out.energy();
    Ok(RecoveryResult {
        cluster,
        residual_energy,
        sparsity,
        records: Vec::new(),
        fallback: false,
        failed: false,
        weight: select,
        symbols: out.symbols,
        support: out.support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::test_frame;

    #[test]
    fn noiseless_single_cluster_is_exact() {
        for seed in 0..10 {
            let f = test_frame(seed, &[20.0], 4, 40, 20, 7, 4, f64::INFINITY);
            let r = oracle_blocksp(&f.y, &f.eqch, 0, 4, 0, 10).unwrap();
            assert_eq!(r.support, f.supports[0]);
            assert!((&r.symbols - &f.symbols[0]).norm() < 1e-8);
        }
    }

    #[test]
    fn equals_pursuit_on_the_antenna_rows() {
        let f = test_frame(11, &[20.0], 3, 20, 12, 4, 3, 5.0);
        let r = oracle_blocksp(&f.y, &f.eqch, 0, 3, 2, 10).unwrap();
        let rows: Vec<usize> = (0..12).map(|k| k * 3 + 2).collect();
        let meas = crate::beamforming::Measurement {
            cluster: 0,
            combined: f.y.select_rows(&rows),
            gain: f.eqch.stacked(0).select_rows(&rows),
        };
        let direct = asp(&meas, AspState::initial(&meas, BlockIndexSet::empty()), 3, 10).unwrap();
        assert_eq!(r.support, direct.state.support);
        assert_eq!(r.symbols, direct.state.symbols);
        assert!(oracle_blocksp(&f.y, &f.eqch, 0, 3, 3, 10).is_err());
    }
}
