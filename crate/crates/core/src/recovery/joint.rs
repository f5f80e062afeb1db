//! Joint adaptive beamforming and subspace pursuit with a TPR-gated sparsity
//! decision.

use crate::beamforming::{build_measurement, dbf_weight, estimate_ipnc, sbf_weight, zf_weights, BeamWeight};
use crate::error::{Error, Result};
use crate::numerics::{BlockIndexSet, CMat, CVec};

use super::{asp, decide_sparsity, tpr, AspState, InitialBeamformer, ReceiverInput, RecoveryConfig, RecoveryResult, SparsityRecord};

/// First-pass weights for every cluster.
pub fn initial_weights(input: &ReceiverInput, cfg: &RecoveryConfig) -> Result<Vec<BeamWeight>> {
    let n = input.eqch.num_clusters();
    if input.centers.len() != n {
        return Err(Error::dim(
            "initial beamforming",
            format!("{n} clusters, {} steering centers", input.centers.len()),
        ));
    }
    match cfg.initial_beamformer {
        InitialBeamformer::Sbf => {
            let activity = vec![cfg.activity_hint; n];
            let esnr = vec![cfg.esnr_db; n];
            (0..n)
                .map(|c| sbf_weight(input.eqch, c, &activity, &esnr, &input.centers[c]))
                .collect()
        }
        InitialBeamformer::Zf => zf_weights(input.centers),
    }
}

/// Runs the sparsity search for every cluster. With `adaptive = false` the
/// initial weight is kept throughout (the fixed-beam variant).
pub fn jabfsp(input: &ReceiverInput, cfg: &RecoveryConfig, adaptive: bool) -> Result<Vec<RecoveryResult>> {
    cfg.validate()?;
    let weights = initial_weights(input, cfg)?;
    weights
        .iter()
        .map(|w| jabfsp_cluster(input, w, cfg, adaptive))
        .collect()
}

struct Step {
    state: AspState,
    /// Weight of the measurement `state` was computed on.
    weight: CVec,
}

pub fn jabfsp_cluster(
    input: &ReceiverInput,
    initial: &BeamWeight,
    cfg: &RecoveryConfig,
    adaptive: bool,
) -> Result<RecoveryResult> {
    let n = initial.cluster;
    let eqch = input.eqch;
    let q = eqch.users;
    let t = input.y.ncols();
    let max_s = cfg.max_sparsity.min(q).min(eqch.subcarriers);
    let base = build_measurement(input.y, eqch, n, &initial.weight)?;

    let mut records = Vec::with_capacity(max_s);
    let mut prev_support = BlockIndexSet::empty();
    for s in 1..=max_s {
        let mut meas = base.clone();
        let mut steps = vec![Step {
            state: AspState::initial(&meas, prev_support.clone()),
            weight: initial.weight.clone(),
        }];
        let mut weight = initial.weight.clone();
        let mut updates = 0;
        let outcome: Result<()> = loop {
            let last = &steps.last().expect("non-empty").state;
            let state = match asp(&meas, last.clone(), s, cfg.max_asp_iterations) {
                Ok(out) => out.state,
                Err(e) => break Err(e),
            };
            // NaN (zero previous residual) counts as converged.
            let change = (state.energy() - last.energy()).abs() / last.energy();
            steps.push(Step { state, weight: weight.clone() });
            if !(change >= cfg.stop_factor) || updates >= cfg.max_bf_updates {
                break Ok(());
            }
            if adaptive {
                let xhat = &steps.last().expect("non-empty").state.symbols;
                let ipnc = estimate_ipnc(input.y, eqch, n, xhat)?;
                weight = dbf_weight(&ipnc, cfg.loading, input.noise_power, &input.centers[n], n)?.weight;
                meas = build_measurement(input.y, eqch, n, &weight)?;
            }
            updates += 1;
        };
        let record = match outcome {
            Ok(()) => {
                // The state before the last pass: the final pass only
                // confirmed convergence.
                let chosen = &steps[steps.len() - 2];
                SparsityRecord {
                    sparsity: s,
                    residual_energy: chosen.state.energy(),
                    tpr: tpr(&chosen.state.symbols, &chosen.state.support),
                    support: chosen.state.support.clone(),
                    symbols: chosen.state.symbols.clone(),
                    weight: chosen.weight.clone(),
                    bf_updates: updates,
                }
            }
            Err(e) if e.is_rank() => SparsityRecord {
                sparsity: s,
                residual_energy: f64::INFINITY,
                tpr: f64::INFINITY,
                support: prev_support.clone(),
                symbols: CMat::zeros(q, t),
                weight: initial.weight.clone(),
                bf_updates: updates,
            },
            Err(e) => return Err(e),
        };
        prev_support = record.support.clone();
        records.push(record);
    }

    let tprs: Vec<f64> = records.iter().map(|r| r.tpr).collect();
    let residuals: Vec<f64> = records.iter().map(|r| r.residual_energy).collect();
    Ok(match decide_sparsity(&tprs, &residuals, cfg.tpr_threshold) {
        Some(d) => {
            let r = &records[d.index];
            RecoveryResult {
                cluster: n,
                support: r.support.clone(),
                symbols: r.symbols.clone(),
                residual_energy: r.residual_energy,
                weight: r.weight.clone(),
                sparsity: r.sparsity,
                fallback: d.fallback,
                failed: false,
                records,
            }
        }
        None => RecoveryResult {
            cluster: n,
            support: BlockIndexSet::empty(),
            symbols: CMat::zeros(q, t),
            residual_energy: f64::INFINITY,
            weight: initial.weight.clone(),
            sparsity: 0,
            fallback: true,
            failed: true,
            records,
        },
    })
}
