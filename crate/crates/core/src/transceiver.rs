//! Ground-truth frame synthesis: block-sparse activity, modulated symbols
//! and the noisy multi-antenna received matrix `Y = Σ G̃_n X_n + V`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BlockIndexSet, CMat, C64};
use crate::scenario::cn01;
use crate::spreading::EquivalentChannel;

/// Unit-average-power constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Constellation {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn points(self) -> Vec<C64> {
        match self {
            Constellation::Bpsk => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
            Constellation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                // Gray order: 00, 01, 11, 10
                vec![
                    C64::new(a, a),
                    C64::new(-a, a),
                    C64::new(-a, -a),
                    C64::new(a, -a),
                ]
            }
            Constellation::Qam16 => {
                // Gray-mapped per axis: 00→−3, 01→−1, 11→+1, 10→+3.
                let levels = [-3.0, -1.0, 3.0, 1.0];
                let scale = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|i| C64::new(levels[i >> 2] * scale, levels[i & 3] * scale))
                    .collect()
            }
        }
    }

    /// Index of the point nearest to `z / sqrt(power)`.
    pub fn nearest(self, z: C64, power: f64) -> usize {
        let z = z / power.sqrt();
        self.points()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (z - p).norm_sqr()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
            .0
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Constellation::Bpsk),
            "qpsk" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            other => Err(Error::config(format!("unknown constellation '{other}'"))),
        }
    }
}

impl TryFrom<String> for Constellation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Constellation> for String {
    fn from(c: Constellation) -> String {
        c.to_string()
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Bpsk => "bpsk",
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "16qam",
        })
    }
}

/// How many users are active in a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activity {
    /// Exactly this many users, chosen uniformly.
    Fixed(usize),
    /// Each user independently active with this probability.
    Rate(f64),
}

pub fn draw_activity(users: usize, activity: Activity, rng: &mut impl Rng) -> Result<BlockIndexSet> {
    match activity {
        Activity::Fixed(s) => {
            if s > users {
                return Err(Error::config(format!("{s} active users exceed {users}")));
            }
            let idx = rand::seq::index::sample(rng, users, s).into_vec();
            BlockIndexSet::new(idx, users)
        }
        Activity::Rate(alpha) => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::config(format!("activity rate {alpha} outside [0, 1]")));
            }
            let idx = (0..users).filter(|_| rng.random::<f64>() < alpha).collect();
            Ok(BlockIndexSet::from_sorted_unchecked(idx))
        }
    }
}

/// Symbol matrix (Q × T) with i.i.d. constellation symbols of average power
/// `power` on the active rows and zeros elsewhere.
pub fn modulate(
    support: &BlockIndexSet,
    users: usize,
    slots: usize,
    constellation: Constellation,
    power: f64,
    rng: &mut impl Rng,
) -> CMat {
    let points = constellation.points();
    let amp = power.sqrt();
    let mut x = CMat::zeros(users, slots);
    for q in support.iter() {
        for t in 0..slots {
            x[(q, t)] = points[rng.random_range(0..points.len())] * amp;
        }
    }
    x
}

/// Ground truth for one frame.
#[derive(Debug, Clone)]
pub struct FrameTruth {
    pub supports: Vec<BlockIndexSet>,
    pub symbols: Vec<CMat>,
    pub constellation: Constellation,
    /// Per-cluster symbol power σ_n².
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    /// MK × T.
    pub y: CMat,
    pub noise_power: f64,
}

/// i.i.d. CN(0, power) matrix.
pub fn draw_noise(rows: usize, cols: usize, power: f64, rng: &mut impl Rng) -> CMat {
    let sd = power.sqrt();
    CMat::from_fn(rows, cols, |_, _| cn01(rng) * sd)
}

/// `Σ_n G̃_n X_n + noise`.
pub fn superpose(eqch: &EquivalentChannel, symbols: &[CMat], noise: &CMat) -> Result<CMat> {
    if symbols.len() != eqch.num_clusters() {
        return Err(Error::dim(
            "superposition",
            format!("{} symbol matrices for {} clusters", symbols.len(), eqch.num_clusters()),
        ));
    }
    let mut y = noise.clone();
    for (g, x) in eqch.clusters.iter().zip(symbols) {
        if x.nrows() != g.ncols() || x.ncols() != y.ncols() || g.nrows() != y.nrows() {
            return Err(Error::dim(
                "superposition",
                format!(
                    "G̃ {}x{}, X {}x{}, Y {}x{}",
                    g.nrows(),
                    g.ncols(),
                    x.nrows(),
                    x.ncols(),
                    y.nrows(),
                    y.ncols()
                ),
            ));
        }
        y += g * x;
    }
    Ok(y)
}

pub fn synthesize_received(
    eqch: &EquivalentChannel,
    symbols: &[CMat],
    noise_power: f64,
    rng: &mut impl Rng,
) -> Result<ReceivedFrame> {
    let slots = symbols.first().map_or(0, |x| x.ncols());
    let noise = draw_noise(eqch.antennas * eqch.subcarriers, slots, noise_power, rng);
    Ok(ReceivedFrame {
        y: superpose(eqch, symbols, &noise)?,
        noise_power,
    })
}

/// Noise power and per-cluster symbol powers for a list of per-cluster SNRs
/// in dB: the strongest cluster gets unit power.
pub fn powers_for_snr(snr_db: &[f64]) -> (f64, Vec<f64>) {
    let top = snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let noise = 10f64.powf(-top / 10.0);
    let powers = snr_db.iter().map(|s| 10f64.powf((s - top) / 10.0)).collect();
    (noise, powers)
}
