use gfnoma::evaluation::config::{ReceiverConfig, SweepConfig};
use gfnoma::evaluation::report::{csv_string, parse_csv};
use gfnoma::evaluation::{run_single, run_sweep, run_trial, trial_seed, ExperimentConfig, ReceiverKind, SweepParam};
use gfnoma::transceiver::Constellation;

fn small(trials: usize, receivers: &[ReceiverKind]) -> ExperimentConfig {
    let defaults = ExperimentConfig::default();
    ExperimentConfig {
        trials,
        seed: 17,
        receiver: ReceiverConfig { receivers: receivers.to_vec(), ..defaults.receiver.clone() },
        ..defaults
    }
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let mut cfg = small(6, &ReceiverKind::ALL);
    cfg.sweep = Some(SweepConfig { param: SweepParam::Slots, values: vec![5.0, 7.0] });
    let csv = |threads| {
        let mut c = cfg.clone();
        c.threads = threads;
        csv_string(&run_sweep(&c).unwrap())
    };
    let one = csv(1);
    assert_eq!(one, csv(3));
    assert_eq!(one, csv(1));
    let rows = parse_csv(&one).unwrap();
    // Two points, five receivers, three clusters plus the mean.
    assert_eq!(rows.len(), 2 * 5 * 4);
}

#[test]
fn different_master_seeds_differ() {
    let mut a = small(20, &[ReceiverKind::OracleBsasp]);
    a.scenario.snr_db = vec![-4.0; 3];
    let mut b = a.clone();
    b.seed += 1;
    assert_ne!(csv_string(&run_single(&a).unwrap()), csv_string(&run_single(&b).unwrap()));
}

#[test]
fn noiseless_constant_modulus_frames_are_recovered_exactly() {
    // Constant-modulus symbols keep the power ratio of the true support at 1.
    let mut cfg = small(8, &ReceiverKind::ALL);
    cfg.system.constellation = Constellation::Qpsk;
    cfg.scenario.snr_db = vec![300.0; 3];
    for row in run_single(&cfg).unwrap() {
        assert_eq!(row.der, 0.0, "{row:?}");
        assert_eq!(row.ser, 0.0, "{row:?}");
    }
}

#[test]
fn single_trial_rows_match_run_trial() {
    let cfg = small(1, &[ReceiverKind::Jabfsp, ReceiverKind::JabfspIc]);
    let rows = run_single(&cfg).unwrap();
    let outcome = run_trial(&cfg, trial_seed(cfg.seed, 0, 0)).unwrap();
    for (kind, _, metrics) in &outcome.receivers {
        for (c, m) in metrics.iter().enumerate() {
            let row = rows
                .iter()
                .find(|r| r.receiver == kind.name() && r.cluster == Some(c + 1))
                .unwrap();
            assert_eq!(row.der, m.der);
            assert_eq!(row.ser, m.ser);
            assert_eq!(row.f_mean, m.false_alarms as f64);
            assert_eq!(row.m_mean, m.misses as f64);
        }
        let mean = rows.iter().find(|r| r.receiver == kind.name() && r.cluster.is_none()).unwrap();
        let avg = metrics.iter().map(|m| m.der).sum::<f64>() / metrics.len() as f64;
        assert!((mean.der - avg).abs() < 1e-15);
    }
}

#[test]
fn single_antenna_single_cluster_agrees_with_the_baseline() {
    let mut cfg = small(1, &[ReceiverKind::Jabfsp, ReceiverKind::OracleBsasp]);
    cfg.system.antennas = 1;
    cfg.system.constellation = Constellation::Qpsk;
    cfg.scenario.cluster_centers_deg = vec![0.0];
    cfg.scenario.snr_db = vec![10.0];
    cfg.traffic.active_users = vec![4];
    let mut same = 0;
    for t in 0..60 {
        let out = run_trial(&cfg, trial_seed(cfg.seed, 0, t)).unwrap();
        let (joint, oracle) = (&out.receivers[0].1[0], &out.receivers[1].1[0]);
        // A single antenna leaves nothing to steer.
        assert!((joint.weight[0].norm() - 1.0).abs() < 1e-12);
        if joint.support == oracle.support {
            same += 1;
            assert!((&joint.symbols - &oracle.symbols).norm() < 1e-9 * oracle.symbols.norm().max(1.0));
        }
    }
    assert!(same >= 57, "{same}/60");
}

#[test]
fn unbalanced_activity_is_supported() {
    let mut cfg = small(4, &[ReceiverKind::Jabfsp]);
    cfg.traffic.active_users = vec![2, 4, 6];
    cfg.scenario.snr_db = vec![6.0, 4.0, 2.0];
    let rows = run_single(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.der.is_finite() && r.ser.is_finite()));
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut cfg = small(1, &[ReceiverKind::Jabfsp]);
    cfg.traffic.active_users = vec![4, 4];
    assert!(run_single(&cfg).is_err());
    let mut cfg = small(1, &[ReceiverKind::Jabfsp]);
    assert!(run_sweep(&cfg).is_err(), "a sweep needs an axis");
    cfg.system.users_per_cluster = 41;
    cfg.system.subcarriers = 20;
    cfg.system.zc_roots = vec![1, 3];
    assert!(run_single(&cfg).is_err());
}
