//! Monte Carlo trials and parameter sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{BlockIndexSet, CMat};
use crate::recovery::{jabfsp, jabfsp_ic, oracle_blocksp, ReceiverInput, RecoveryResult};
use crate::scenario::{
    cluster_average_steering, cluster_users, draw_geometry, perturb_csi, sample_channels, steering_vector,
    UserGeometry,
};
use crate::spreading::{assign_signatures, equivalent_channel};
use crate::transceiver::{draw_activity, draw_noise, modulate, powers_for_snr, superpose, Activity, FrameTruth};

use super::config::{ExperimentConfig, ReceiverKind};
use super::metrics::{evaluate, Metrics, MetricsSum};

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Scenario = 0,
    Signatures = 1,
    Data = 2,
    Noise = 3,
    Csi = 4,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `sweep_index`: a splitmix64 chain
/// over the master seed and both counters, so any trial can be regenerated
/// on its own.
pub fn trial_seed(master: u64, sweep_index: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ sweep_index) ^ trial)
}

/// Everything produced by one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub truth: FrameTruth,
    /// One entry per configured receiver, in configuration order.
    pub receivers: Vec<(ReceiverKind, Vec<RecoveryResult>, Vec<Metrics>)>,
}

/// Regroups drawn users by K-means on their direction. Clusters must come
/// out with the configured size.
fn clustered_geometry(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<UserGeometry>>> {
    let sc = &cfg.scenario;
    let q = cfg.system.users_per_cluster;
    let mut drawn = match &sc.user_angles_deg {
        Some(angles) => angles
            .iter()
            .map(|row| row.iter().map(|&theta_deg| UserGeometry { theta_deg, large_scale: 1.0 }).collect())
            .collect(),
        None => draw_geometry(&sc.cluster_centers_deg, sc.cluster_width_deg, q, rng)?,
    };
    if let Some(rho) = &sc.large_scale_fading {
        for (users, amps) in drawn.iter_mut().zip(rho) {
            for (user, &a) in users.iter_mut().zip(amps) {
                user.large_scale = a;
            }
        }
    }
    let m = cfg.system.antennas;
    if m < 2 {
        // One antenna carries no direction information.
        return Ok(drawn);
    }
    let users: Vec<UserGeometry> = drawn.into_iter().flatten().collect();
    let steering: Vec<_> = users
        .iter()
        .map(|u| steering_vector(u.theta_deg, m, cfg.system.spacing_ratio))
        .collect();
    let assignment = cluster_users(&steering, cfg.num_clusters(), sc.kmeans_restarts, rng)?;
    let sizes = assignment.sizes();
    if sizes.iter().any(|&s| s != q) {
        return Err(Error::config(format!(
            "clustering produced sizes {sizes:?}, expected {q} users each"
        )));
    }
    Ok((0..cfg.num_clusters())
        .map(|c| assignment.members(c).into_iter().map(|i| users[i]).collect())
        .collect())
}

pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialOutcome> {
    let sys = &cfg.system;
    let (q, k, t, m) = (sys.users_per_cluster, sys.subcarriers, sys.slots, sys.antennas);
    let n_clusters = cfg.num_clusters();

    let mut rng = stream(seed, Stream::Scenario);
    let geometry = clustered_geometry(cfg, &mut rng)?;
    let channels = sample_channels(&geometry, m, k, sys.spacing_ratio, &mut rng);
    let signatures = assign_signatures(k, q, &sys.zc_roots, &mut stream(seed, Stream::Signatures))?;
    let eq_true = equivalent_channel(&channels, &signatures)?;

    // Receiver-side knowledge.
    let rx_channels = perturb_csi(&channels, cfg.scenario.csi_error_percent, &mut stream(seed, Stream::Csi));
    let eq_rx = equivalent_channel(&rx_channels, &signatures)?;
    let centers = cluster_average_steering(&rx_channels);

    let mut rng = stream(seed, Stream::Data);
    let (noise_power, powers) = powers_for_snr(&cfg.scenario.snr_db);
    let supports = (0..n_clusters)
        .map(|n| {
            let activity = match cfg.traffic.activity_rate {
                Some(a) => Activity::Rate(a),
                None => Activity::Fixed(cfg.traffic.active_users[n]),
            };
            draw_activity(q, activity, &mut rng)
        })
        .collect::<Result<Vec<BlockIndexSet>>>()?;
    let symbols: Vec<CMat> = supports
        .iter()
        .zip(&powers)
        .map(|(s, &p)| modulate(s, q, t, sys.constellation, p, &mut rng))
        .collect();
    let noise = draw_noise(m * k, t, noise_power, &mut stream(seed, Stream::Noise));
    let y = superpose(&eq_true, &symbols, &noise)?;
    let truth = FrameTruth {
        supports,
        symbols,
        constellation: sys.constellation,
        powers,
    };

    let input = ReceiverInput {
        y: &y,
        noise_power: cfg.receiver.known_noise.then_some(noise_power),
        eqch: &eq_rx,
        centers: &centers,
    };
    let alg = &cfg.algorithm;
    let mut adaptive: Option<Vec<RecoveryResult>> = None;
    let mut fixed: Option<Vec<RecoveryResult>> = None;
    let mut receivers = Vec::with_capacity(cfg.receiver.receivers.len());
    for &kind in &cfg.receiver.receivers {
        let results = match kind {
            ReceiverKind::Jabfsp | ReceiverKind::JabfspIc => {
                if adaptive.is_none() {
                    adaptive = Some(jabfsp(&input, alg, true)?);
                }
                let base = adaptive.as_ref().expect("computed above");
                if kind == ReceiverKind::JabfspIc {
                    jabfsp_ic(&input, base, alg)?
                } else {
                    base.clone()
                }
            }
            ReceiverKind::SbfAsp | ReceiverKind::SbfAspIc => {
                if fixed.is_none() {
                    fixed = Some(jabfsp(&input, alg, false)?);
                }
                let base = fixed.as_ref().expect("computed above");
                if kind == ReceiverKind::SbfAspIc {
                    jabfsp_ic(&input, base, alg)?
                } else {
                    base.clone()
                }
            }
            ReceiverKind::OracleBsasp => (0..n_clusters)
                .map(|n| {
                    let s = truth.supports[n].len();
                    if s == 0 {
                        return Ok(empty_result(n, q, t));
                    }
                    let own = eq_true.stacked(n) * &truth.symbols[n] + &noise;
                    oracle_blocksp(&own, &eq_rx, n, s, cfg.receiver.oracle_antenna, alg.max_asp_iterations)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let metrics = results
            .iter()
            .map(|r| {
                let n = r.cluster;
                evaluate(
                    &r.symbols,
                    &r.support,
                    &truth.symbols[n],
                    &truth.supports[n],
                    truth.constellation,
                    truth.powers[n],
                )
            })
            .collect();
        receivers.push((kind, results, metrics));
    }
    Ok(TrialOutcome { truth, receivers })
}

fn empty_result(cluster: usize, q: usize, t: usize) -> RecoveryResult {
    RecoveryResult {
        cluster,
        support: BlockIndexSet::empty(),
        symbols: CMat::zeros(q, t),
        residual_energy: 0.0,
        weight: crate::numerics::CVec::zeros(0),
        sparsity: 0,
        records: Vec::new(),
        fallback: false,
        failed: false,
    }
}

/// One aggregated output row. `cluster` is the 1-based cluster number, or
/// `None` for the cluster average.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub receiver: String,
    pub cluster: Option<usize>,
    pub der: f64,
    pub ser: f64,
    pub f_mean: f64,
    pub m_mean: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ResultRow {
    /// Canonical row order: sweep parameter, value, receiver, then clusters
    /// in index order followed by the average.
    pub fn sort_key(&self) -> (&str, u64, &str, (u8, usize)) {
        // Order-preserving bit pattern for finite floats.
        let bits = self.sweep_value.to_bits();
        let ordered = if self.sweep_value.is_sign_negative() { !bits } else { bits | (1 << 63) };
        let cluster = self.cluster.map_or((1, 0), |c| (0, c));
        (&self.sweep_param, ordered, &self.receiver, cluster)
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Name used for the sweep column when a single configuration is run.
pub const NO_SWEEP: &str = "none";

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))
}

/// Runs `cfg.trials` trials at every point and aggregates them. Trials are
/// spread over `cfg.threads` workers; the reduction runs in trial order so
/// the output does not depend on the worker count.
pub fn run_points(cfg: &ExperimentConfig, param: &str, points: &[(f64, ExperimentConfig)]) -> Result<Vec<ResultRow>> {
    let pool = build_pool(cfg.threads)?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Vec<(ReceiverKind, Vec<Metrics>)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| {
                let seed = trial_seed(cfg.seed, p as u64, t as u64);
                run_trial(&points[p].1, seed).map(|o| {
                    o.receivers.into_iter().map(|(kind, _, metrics)| (kind, metrics)).collect()
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    for (p, (value, point)) in points.iter().enumerate() {
        let n = point.num_clusters();
        for (ri, &kind) in point.receiver.receivers.iter().enumerate() {
            let mut per_cluster = vec![MetricsSum::default(); n];
            let mut overall = MetricsSum::default();
            for trial in &outcomes[p * cfg.trials..(p + 1) * cfg.trials] {
                let (got, metrics) = &trial[ri];
                debug_assert_eq!(*got, kind);
                for (c, m) in metrics.iter().enumerate() {
                    per_cluster[c].add(m);
                    overall.add(m);
                }
            }
            let row = |cluster: Option<usize>, s: &MetricsSum| {
                let mean = s.mean();
                ResultRow {
                    sweep_param: param.to_string(),
                    sweep_value: *value,
                    receiver: kind.name().to_string(),
                    cluster,
                    der: mean.der,
                    ser: mean.ser,
                    f_mean: mean.false_alarms,
                    m_mean: mean.misses,
                    trials: cfg.trials,
                    seed: cfg.seed,
                }
            };
            for (c, s) in per_cluster.iter().enumerate() {
                rows.push(row(Some(c + 1), s));
            }
            rows.push(row(None, &overall));
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Runs the configured sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("configuration has no [sweep] section".to_string()))?;
    let points = sweep
        .values
        .iter()
        .map(|&v| Ok((v, cfg.at(sweep.param, v)?)))
        .collect::<Result<Vec<_>>>()?;
    run_points(cfg, sweep.param.name(), &points)
}

/// Runs the configuration as a single point, ignoring any sweep.
pub fn run_single(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut point = cfg.clone();
    point.sweep = None;
    run_points(cfg, NO_SWEEP, &[(0.0, point)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::field_reassign_with_default)]
    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.trials = 3;
        cfg.system.users_per_cluster = 12;
        cfg.system.subcarriers = 10;
        cfg.system.slots = 3;
        cfg.traffic.active_users = vec![2, 1, 3];
        cfg.algorithm.max_sparsity = 4;
        cfg
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..4 {
            for t in 0..50 {
                assert!(seen.insert(trial_seed(9, p, t)));
            }
        }
        assert_eq!(trial_seed(9, 1, 2), trial_seed(9, 1, 2));
        assert_ne!(trial_seed(9, 1, 2), trial_seed(10, 1, 2));
    }

    #[test]
    fn trial_is_deterministic_and_shaped() {
        let cfg = small();
        let a = run_trial(&cfg, 77).unwrap();
        let b = run_trial(&cfg, 77).unwrap();
        assert_eq!(a.truth.symbols, b.truth.symbols);
        for ((ka, ra, ma), (kb, rb, mb)) in a.receivers.iter().zip(&b.receivers) {
            assert_eq!((ka, ra, ma), (kb, rb, mb));
            assert_eq!(ma.len(), 3);
        }
        assert_eq!(a.truth.supports.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![2, 1, 3]);
    }

    #[test]
    fn noiseless_single_cluster_is_error_free() {
        // T = 7 keeps the TPR of a correct 16QAM support well under the
        // threshold.
        let mut cfg = small();
        cfg.system.slots = 7;
        cfg.system.subcarriers = 20;
        cfg.system.users_per_cluster = 20;
        cfg.scenario.cluster_centers_deg = vec![0.0];
        cfg.scenario.snr_db = vec![300.0];
        cfg.traffic.active_users = vec![3];
        cfg.receiver.receivers = ReceiverKind::ALL.to_vec();
        for seed in 0..5 {
            let out = run_trial(&cfg, seed).unwrap();
            for (kind, _, metrics) in &out.receivers {
                assert_eq!(metrics[0].der, 0.0, "{kind}");
                assert_eq!(metrics[0].ser, 0.0, "{kind}");
            }
        }
    }

    #[test]
    fn rows_cover_every_cluster_and_receiver() {
        let mut cfg = small();
        cfg.receiver.receivers = vec![ReceiverKind::Jabfsp, ReceiverKind::OracleBsasp];
        let rows = run_single(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 4);
        assert!(rows.iter().all(|r| r.sweep_param == NO_SWEEP && r.trials == 3));
        assert_eq!(rows[3].cluster, None);
        assert_eq!(rows[0].receiver, "jabfsp");
    }

    #[test]
    fn explicit_angles_and_fading_are_honored() {
        let mut cfg = small();
        cfg.trials = 4;
        cfg.system.constellation = crate::transceiver::Constellation::Qpsk;
        cfg.scenario.cluster_centers_deg = vec![-20.0, 20.0];
        cfg.scenario.snr_db = vec![20.0; 2];
        cfg.traffic.active_users = vec![2, 2];
        cfg.scenario.user_angles_deg = Some(vec![vec![-20.0; 12], vec![20.0; 12]]);
        cfg.receiver.receivers = vec![ReceiverKind::Jabfsp];
        cfg.validate().unwrap();
        let clean = run_single(&cfg).unwrap();
        assert!(clean[0].der == 0.0 && clean[1].der == 0.0, "{clean:?}");

        cfg.scenario.large_scale_fading = Some(vec![vec![1e-4; 12], vec![1.0; 12]]);
        let faded = run_single(&cfg).unwrap();
        assert!(faded[0].der > 0.2, "{faded:?}");
        assert_eq!(faded[1].der, 0.0);

        cfg.scenario.large_scale_fading = Some(vec![vec![1.0; 12]]);
        assert!(cfg.validate().is_err());
        cfg.scenario.large_scale_fading = Some(vec![vec![1.0; 12], vec![0.0; 12]]);
        assert!(cfg.validate().is_err());
        cfg.scenario.large_scale_fading = None;
        cfg.scenario.user_angles_deg = Some(vec![vec![-20.0; 12], vec![95.0; 12]]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sort_order_handles_negative_values() {
        let mk = |v: f64, c: Option<usize>| ResultRow {
            sweep_param: "snr_db".into(),
            sweep_value: v,
            receiver: "jabfsp".into(),
            cluster: c,
            der: 0.0,
            ser: 0.0,
            f_mean: 0.0,
            m_mean: 0.0,
            trials: 1,
            seed: 0,
        };
        let mut rows = vec![mk(2.0, None), mk(-2.0, Some(2)), mk(0.0, Some(1)), mk(-2.0, Some(1)), mk(-0.5, None)];
        sort_rows(&mut rows);
        let order: Vec<(f64, Option<usize>)> = rows.iter().map(|r| (r.sweep_value, r.cluster)).collect();
        assert_eq!(order, vec![(-2.0, Some(1)), (-2.0, Some(2)), (-0.5, None), (0.0, Some(1)), (2.0, None)]);
    }
}
