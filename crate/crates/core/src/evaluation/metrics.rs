//! Detection and symbol error counting.

use crate::numerics::{BlockIndexSet, CMat};
use crate::transceiver::Constellation;

/// Per-cluster, per-trial error counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub der: f64,
    pub ser: f64,
    pub false_alarms: usize,
    pub misses: usize,
    pub symbol_errors: usize,
}

/// `(f + m) / Q` with `f = |est∖truth|`, `m = |truth∖est|`.
pub fn compute_der(est: &BlockIndexSet, truth: &BlockIndexSet, users: usize) -> (f64, usize, usize) {
    let f = est.difference(truth).len();
    let m = truth.difference(est).len();
    ((f + m) as f64 / users as f64, f, m)
}

/// Hard-decision symbol errors on the correctly detected rows; returns the
/// SER `p_d + S_e/(QT)` and `S_e`.
pub fn compute_ser(
    xhat: &CMat,
    xtrue: &CMat,
    est: &BlockIndexSet,
    truth: &BlockIndexSet,
    constellation: Constellation,
    power: f64,
) -> (f64, usize) {
    let (q, t) = xtrue.shape();
    let (der, _, _) = compute_der(est, truth, q);
    let mut errors = 0;
    for row in est.intersection(truth).iter() {
        for col in 0..t {
            let decided = constellation.nearest(xhat[(row, col)], power);
            let sent = constellation.nearest(xtrue[(row, col)], power);
            errors += usize::from(decided != sent);
        }
    }
    (der + errors as f64 / (q * t) as f64, errors)
}

pub fn evaluate(
    xhat: &CMat,
    est: &BlockIndexSet,
    xtrue: &CMat,
    truth: &BlockIndexSet,
    constellation: Constellation,
    power: f64,
) -> Metrics {
    let (der, f, m) = compute_der(est, truth, xtrue.nrows());
    let (ser, s_e) = compute_ser(xhat, xtrue, est, truth, constellation, power);
    Metrics { der, ser, false_alarms: f, misses: m, symbol_errors: s_e }
}

/// Running mean of [`Metrics`] in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsSum {
    pub der: f64,
    pub ser: f64,
    pub false_alarms: f64,
    pub misses: f64,
    pub count: usize,
}

impl MetricsSum {
    pub fn add(&mut self, m: &Metrics) {
        self.der += m.der;
        self.ser += m.ser;
        self.false_alarms += m.false_alarms as f64;
        self.misses += m.misses as f64;
        self.count += 1;
    }

    pub fn mean(&self) -> MetricsSum {
        let n = self.count.max(1) as f64;
        MetricsSum {
            der: self.der / n,
            ser: self.ser / n,
            false_alarms: self.false_alarms / n,
            misses: self.misses / n,
            count: self.count,
        }
    }
}
