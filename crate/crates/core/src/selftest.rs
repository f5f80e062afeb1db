//! Quick invariant checks runnable from the command line.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beamforming::{dbf_weight, sbf_weight, Loading};
use crate::evaluation::experiment::run_points;
use crate::evaluation::report::{csv_string, parse_csv};
use crate::evaluation::config::SystemConfig;
use crate::evaluation::{ExperimentConfig, SweepParam};
use crate::numerics::{block_pinv, pinv_full_col, BlockIndexSet, CMat, C64};
use crate::recovery::{asp, AspState};
use crate::beamforming::Measurement;
use crate::scenario::{cluster_average_steering, draw_geometry, sample_channels};
use crate::spreading::{assign_signatures, equivalent_channel};
use crate::transceiver::{draw_activity, modulate, Activity, Constellation};

fn random_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn check_block_pinv(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..20 {
        let rows = rng.random_range(8..=40);
        let na = rng.random_range(1..=6);
        let nb = rng.random_range(1..=6);
        let a = random_cmat(rng, rows, na);
        let b = random_cmat(rng, rows, nb);
        let mut c = CMat::zeros(rows, na + nb);
        c.columns_mut(0, na).copy_from(&a);
        c.columns_mut(na, nb).copy_from(&b);
        let full = pinv_full_col(&c).map_err(|e| e.to_string())?;
        let split = block_pinv(&a, &b).map_err(|e| e.to_string())?.stacked();
        let err = (full - split).norm();
        if err >= 1e-9 {
            return Err(format!("block and direct pseudo-inverse differ by {err:.2e}"));
        }
    }
    Ok(())
}

fn check_noiseless_pursuit(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut exact = 0;
    for _ in 0..50 {
        let gain = random_cmat(rng, 20, 40);
        let sup = draw_activity(40, Activity::Fixed(4), rng).map_err(|e| e.to_string())?;
        let x = modulate(&sup, 40, 7, Constellation::Qam16, 1.0, rng);
        let meas = Measurement { cluster: 0, combined: &gain * &x, gain };
        let out = asp(&meas, AspState::initial(&meas, BlockIndexSet::empty()), 4, 10)
            .map_err(|e| e.to_string())?;
        if out.state.support == sup && (&out.state.symbols - &x).norm() < 1e-8 * x.norm() {
            exact += 1;
        }
    }
    if exact >= 49 {
        Ok(())
    } else {
        Err(format!("exact recovery in {exact}/50 noiseless frames"))
    }
}

fn check_beam_constraint(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..10 {
        let geom = draw_geometry(&[-30.0, -10.0, 10.0], 5.0, 10, rng).map_err(|e| e.to_string())?;
        let ch = sample_channels(&geom, 5, 8, 0.5, rng);
        let sig = assign_signatures(8, 10, &[], rng).map_err(|e| e.to_string())?;
        let eq = equivalent_channel(&ch, &sig).map_err(|e| e.to_string())?;
        let centers = cluster_average_steering(&ch);
        for (n, a) in centers.iter().enumerate() {
            let sbf = sbf_weight(&eq, n, &[0.1; 3], &[13.0; 3], a).map_err(|e| e.to_string())?;
            let ipnc = random_cmat(rng, 40, 7);
            let dbf = dbf_weight(&ipnc, Loading::NoiseScaled, Some(0.5), a, n).map_err(|e| e.to_string())?;
            let worst = sbf.constraint_error().max(dbf.constraint_error());
            if worst >= 1e-10 {
                return Err(format!("beam constraint violated by {worst:.2e}"));
            }
        }
    }
    Ok(())
}

fn tiny_config(threads: usize) -> ExperimentConfig {
    let defaults = ExperimentConfig::default();
    ExperimentConfig {
        trials: 4,
        threads,
        system: SystemConfig { users_per_cluster: 20, ..defaults.system.clone() },
        ..defaults
    }
}

fn check_determinism(_: &mut ChaCha8Rng) -> Result<(), String> {
    let run = |threads| -> Result<String, String> {
        let cfg = tiny_config(threads);
        let points = [0.0, 4.0]
            .iter()
            .map(|&v| Ok((v, cfg.at(SweepParam::SnrDb, v)?)))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let rows = run_points(&cfg, SweepParam::SnrDb.name(), &points).map_err(|e| e.to_string())?;
        Ok(csv_string(&rows))
    };
    let one = run(1)?;
    let many = run(3)?;
    if one != many {
        return Err("CSV differs between 1 and 3 worker threads".into());
    }
    let parsed = parse_csv(&one).map_err(|e| e.to_string())?;
    if csv_string(&parsed) != one {
        return Err("CSV does not survive a parse round trip".into());
    }
    Ok(())
}

type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

/// Runs every check, printing one PASS/FAIL line each. Returns whether all
/// passed.
pub fn run_selftest(out: &mut impl Write, seed: u64) -> std::io::Result<bool> {
    let checks: [(&str, Check); 4] = [
        ("block pseudo-inverse matches direct pseudo-inverse", check_block_pinv),
        ("noiseless subspace pursuit is exact", check_noiseless_pursuit),
        ("beam weights satisfy the unit-gain constraint", check_beam_constraint),
        ("sweeps are independent of the worker count", check_determinism),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = true;
    for (name, check) in checks {
        match check(&mut rng) {
            Ok(()) => writeln!(out, "PASS  {name}")?,
            Err(why) => {
                all = false;
                writeln!(out, "FAIL  {name}: {why}")?;
            }
        }
    }
    Ok(all)
}
