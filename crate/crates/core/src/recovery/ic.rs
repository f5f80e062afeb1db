//! Interference-cancellation refinement of the symbol estimates on fixed
//! supports, in synchronized (Jacobi) rounds across clusters.

use crate::beamforming::{build_measurement, dbf_weight, estimate_ipnc};
use crate::error::{Error, Result};
use crate::numerics::CMat;

use super::{ls_on_support, residual, ReceiverInput, RecoveryConfig, RecoveryResult};

pub fn jabfsp_ic(input: &ReceiverInput, init: &[RecoveryResult], cfg: &RecoveryConfig) -> Result<Vec<RecoveryResult>> {
    cfg.validate()?;
    let eqch = input.eqch;
    let n_clusters = eqch.num_clusters();
    if init.len() != n_clusters {
        return Err(Error::dim(
            "interference cancellation",
            format!("{n_clusters} clusters, {} initial results", init.len()),
        ));
    }
    let dbf = |n: usize, x: &CMat| -> Result<_> {
        let ipnc = estimate_ipnc(input.y, eqch, n, x)?;
        Ok(dbf_weight(&ipnc, cfg.loading, input.noise_power, &input.centers[n], n)?.weight)
    };

    let mut estimates: Vec<CMat> = init.iter().map(|r| r.symbols.clone()).collect();
    let mut weights = init
        .iter()
        .enumerate()
        .map(|(n, r)| dbf(n, &r.symbols))
        .collect::<Result<Vec<_>>>()?;
    let mut errors: Vec<f64> = init.iter().map(|r| r.residual_energy).collect();

    for _ in 0..cfg.ic_rounds {
        let snapshot = estimates.clone();
        for n in 0..n_clusters {
            let mut cancelled = input.y.clone();
            for (l, x) in snapshot.iter().enumerate() {
                if l != n {
                    cancelled -= eqch.stacked(l) * x;
                }
            }
            let support = &init[n].support;
            let mut xhat = snapshot[n].clone();
            let mut accepted = errors[n];
            for inner in 1..=cfg.ic_inner_iterations {
                let meas = build_measurement(&cancelled, eqch, n, &weights[n])?;
                let c = match ls_on_support(&meas, support) {
                    Ok(c) => c,
                    Err(e) if e.is_rank() => break,
                    Err(e) => return Err(e),
                };
                let e = residual(&meas, &c).norm_squared();
                if e < accepted && inner < cfg.ic_inner_iterations {
                    accepted = e;
                    weights[n] = dbf(n, &c)?;
                    xhat = c;
                } else {
                    break;
                }
            }
            errors[n] = accepted;
            estimates[n] = xhat;
        }
    }

    Ok(init
        .iter()
        .zip(estimates.into_iter().zip(weights).zip(errors))
        .map(|(r, ((symbols, weight), residual_energy))| RecoveryResult {
            symbols,
            weight,
            residual_energy,
            ..r.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::jabfsp;
    use crate::testutil::test_frame;

    fn seeded(f: &crate::testutil::TestFrame) -> Vec<RecoveryResult> {
        (0..f.eqch.num_clusters())
            .map(|n| RecoveryResult {
                cluster: n,
                support: f.supports[n].clone(),
                symbols: f.symbols[n].clone(),
                residual_energy: f64::INFINITY,
                weight: f.centers[n].clone(),
                sparsity: f.supports[n].len(),
                records: Vec::new(),
                fallback: false,
                failed: false,
            })
            .collect()
    }

    #[test]
    fn truth_is_a_fixed_point_without_noise() {
        let f = test_frame(1, &[-30.0, 0.0, 30.0], 5, 40, 20, 7, 4, f64::INFINITY);
        let init = seeded(&f);
        let out = jabfsp_ic(&f.input(), &init, &RecoveryConfig::default()).unwrap();
        for (r, x) in out.iter().zip(&f.symbols) {
            assert!((&r.symbols - x).norm() < 1e-8);
            assert_eq!(r.support, init[r.cluster].support);
        }
    }

    #[test]
    fn single_cluster_refines_on_original_frame() {
        let f = test_frame(2, &[0.0], 4, 40, 20, 7, 4, 3.0);
        let cfg = RecoveryConfig::default();
        let init = jabfsp(&f.input(), &cfg, true).unwrap();
        let out = jabfsp_ic(&f.input(), &init, &cfg).unwrap();
        assert_eq!(out[0].support, init[0].support);
        assert!(out[0].residual_energy <= init[0].residual_energy);
        for q in (0..40).filter(|q| !out[0].support.contains(*q)) {
            assert_eq!(out[0].symbols.row(q).norm(), 0.0);
        }
    }

    #[test]
    fn rejects_mismatched_init() {
        let f = test_frame(3, &[-30.0, 0.0], 4, 10, 10, 3, 2, 10.0);
        let init = seeded(&f);
        assert!(jabfsp_ic(&f.input(), &init[..1], &RecoveryConfig::default()).is_err());
    }
}
