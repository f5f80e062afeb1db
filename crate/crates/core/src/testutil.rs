use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{BlockIndexSet, CMat, CVec, C64};
use crate::recovery::ReceiverInput;
use crate::scenario::{cluster_average_steering, draw_geometry, sample_channels};
use crate::spreading::{assign_signatures, equivalent_channel, EquivalentChannel};
use crate::transceiver::{draw_activity, draw_noise, modulate, superpose, Activity, Constellation};

pub(crate) fn random_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

pub(crate) struct TestFrame {
    pub eqch: EquivalentChannel,
    pub centers: Vec<CVec>,
    pub supports: Vec<BlockIndexSet>,
    pub symbols: Vec<CMat>,
    pub y: CMat,
    pub noise_power: f64,
}

impl TestFrame {
    pub fn input(&self) -> ReceiverInput<'_> {
        ReceiverInput {
            y: &self.y,
            noise_power: Some(self.noise_power),
            eqch: &self.eqch,
            centers: &self.centers,
        }
    }
}

/// Unit-power 16QAM frame with clusters `width` degrees wide around
/// `centers_deg`; `snr_db = ∞` gives a noiseless frame.
#[allow(clippy::too_many_arguments)]
pub(crate) fn test_frame(
    seed: u64,
    centers_deg: &[f64],
    m: usize,
    q: usize,
    k: usize,
    t: usize,
    s: usize,
    snr_db: f64,
) -> TestFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = draw_geometry(centers_deg, 10.0, q, &mut rng).unwrap();
    let ch = sample_channels(&geom, m, k, 0.5, &mut rng);
    let sig = assign_signatures(k, q, &[], &mut rng).unwrap();
    let eqch = equivalent_channel(&ch, &sig).unwrap();
    let supports: Vec<BlockIndexSet> = (0..centers_deg.len())
        .map(|_| draw_activity(q, Activity::Fixed(s), &mut rng).unwrap())
        .collect();
    let symbols: Vec<CMat> = supports
        .iter()
        .map(|sup| modulate(sup, q, t, Constellation::Qam16, 1.0, &mut rng))
        .collect();
    let noise_power = 10f64.powf(-snr_db / 10.0);
    let noise = draw_noise(m * k, t, noise_power, &mut rng);
    let y = superpose(&eqch, &symbols, &noise).unwrap();
    TestFrame {
        centers: cluster_average_steering(&ch),
        eqch,
        supports,
        symbols,
        y,
        noise_power,
    }
}
