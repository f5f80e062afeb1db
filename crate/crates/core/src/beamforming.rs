//! Receive beamforming for one cluster and construction of the beam-domain
//! measurement fed to the sparse-recovery stage.
//!
//! All weights minimize a quadratic form `bᴴΦb` under the unit-gain
//! constraint `bᴴā = 1`, whose solution is `Φ⁻¹ā / (āᴴΦ⁻¹ā)`:
//!
//! * statistical (SBF): `Φ = Σ_{l≠n} α_l δ_l Σ_k G̃_{l,k}G̃_{l,k}ᴴ + K·I`,
//!   with the noise power normalized to one and `δ_l` an empirical SNR;
//! * dynamic (DBF): `Φ = R̂ + εI`, `R̂` the sample covariance of the
//!   interference-plus-noise estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, identity, loaded_solve, tol, CMat, CVec, C64};
use crate::spreading::EquivalentChannel;

/// A beamforming weight together with the direction it is constrained to.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeight {
    pub cluster: usize,
    pub weight: CVec,
    pub target: CVec,
}

impl BeamWeight {
    /// `|bᴴā − 1|`.
    pub fn constraint_error(&self) -> f64 {
        (self.weight.dotc(&self.target) - C64::new(1.0, 0.0)).norm()
    }

    fn normalized(cluster: usize, x: CVec, target: &CVec) -> Result<Self> {
        let gain = target.dotc(&x);
        if gain.norm() == 0.0 || !gain.re.is_finite() {
            return Err(Error::Contract("beam target has zero response".into()));
        }
        Ok(Self {
            cluster,
            weight: x / gain,
            target: target.clone(),
        })
    }

    /// Quadratic cost `bᴴΦb`.
    pub fn cost(&self, phi: &CMat) -> f64 {
        self.weight.dotc(&(phi * &self.weight)).re
    }
}

/// Minimum-variance weight `(Φ + εI)⁻¹ā / (āᴴ(Φ + εI)⁻¹ā)`.
pub fn mvdr_weight(phi: &CMat, loading: f64, target: &CVec, cluster: usize) -> Result<BeamWeight> {
    let x = loaded_solve(phi, loading, target)?;
    BeamWeight::normalized(cluster, x, target)
}

/// SBF quadratic form for `cluster`. `activity` and `esnr_db` are indexed by
/// cluster; the entries for `cluster` itself are ignored.
pub fn sbf_covariance(
    eqch: &EquivalentChannel,
    cluster: usize,
    activity: &[f64],
    esnr_db: &[f64],
) -> Result<CMat> {
    let n = eqch.num_clusters();
    if activity.len() != n || esnr_db.len() != n {
        return Err(Error::dim(
            "statistical beamforming",
            format!("{n} clusters, {} activity hints, {} ESNRs", activity.len(), esnr_db.len()),
        ));
    }
    let m = eqch.antennas;
    let mut phi = identity(m).scale(eqch.subcarriers as f64);
    for l in (0..n).filter(|&l| l != cluster) {
        if !esnr_db[l].is_finite() {
            return Err(Error::config(format!("empirical SNR {} dB is not finite", esnr_db[l])));
        }
        let w = activity[l] * 10f64.powf(esnr_db[l] / 10.0);
        phi += eqch.spatial_gram(l).scale(w);
    }
    Ok(phi)
}

pub fn sbf_weight(
    eqch: &EquivalentChannel,
    cluster: usize,
    activity: &[f64],
    esnr_db: &[f64],
    target: &CVec,
) -> Result<BeamWeight> {
    let phi = sbf_covariance(eqch, cluster, activity, esnr_db)?;
    mvdr_weight(&phi, 0.0, target, cluster)
}

/// Interference-plus-noise estimate `y_{k,t} − G̃_{n,k} x̂_t`, laid out like
/// `Y` (MK × T).
pub fn estimate_ipnc(y: &CMat, eqch: &EquivalentChannel, cluster: usize, xhat: &CMat) -> Result<CMat> {
    let g = eqch.stacked(cluster);
    if xhat.nrows() != g.ncols() || xhat.ncols() != y.ncols() || g.nrows() != y.nrows() {
        return Err(Error::dim(
            "IpNC estimate",
            format!("Y {}x{}, X̂ {}x{}", y.nrows(), y.ncols(), xhat.nrows(), xhat.ncols()),
        ));
    }
    let mut out = y.clone();
    // X̂ is row-sparse; skip the zero rows.
    for q in 0..xhat.nrows() {
        let row = xhat.row(q);
        if row.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        out -= g.column(q) * row;
    }
    Ok(out)
}

/// `R̂ = 1/(KT) Σ_k Σ_t î_{k,t} î_{k,t}ᴴ` from an MK × T IpNC matrix.
pub fn ipnc_covariance(ipnc: &CMat, antennas: usize) -> CMat {
    let k = ipnc.nrows() / antennas;
    let mut r = CMat::zeros(antennas, antennas);
    for kk in 0..k {
        let blk = ipnc.rows(kk * antennas, antennas);
        r += blk * blk.adjoint();
    }
    r.unscale((k * ipnc.ncols()).max(1) as f64)
}

/// How the DBF diagonal loading is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum Loading {
    /// `K · σ_v²` with the noise power known to the simulator.
    NoiseScaled,
    /// `σ_v²`, the per-sample noise floor of `R̂`.
    NoisePower,
    /// `1e-3 · tr(R̂)/M`.
    TraceScaled,
    Fixed(f64),
}

impl Loading {
    pub fn resolve(self, cov: &CMat, noise_power: Option<f64>, subcarriers: usize) -> f64 {
        let trace_rule = || 1e-3 * cov.trace().re / cov.nrows() as f64;
        let eps = match (self, noise_power) {
            (Loading::NoiseScaled, Some(p)) => subcarriers as f64 * p,
            (Loading::NoisePower, Some(p)) => p,
            (Loading::NoiseScaled | Loading::NoisePower | Loading::TraceScaled, _) => trace_rule(),
            (Loading::Fixed(v), _) => v,
        };
        eps.max(tol::MIN_LOADING)
    }
}

/// DBF weight from an MK × T IpNC estimate.
pub fn dbf_weight(
    ipnc: &CMat,
    loading: Loading,
    noise_power: Option<f64>,
    target: &CVec,
    cluster: usize,
) -> Result<BeamWeight> {
    let m = target.len();
    if m == 0 || !ipnc.nrows().is_multiple_of(m) {
        return Err(Error::dim(
            "dynamic beamforming",
            format!("IpNC has {} rows for {m} antennas", ipnc.nrows()),
        ));
    }
    let r = ipnc_covariance(ipnc, m);
    let eps = loading.resolve(&r, noise_power, ipnc.nrows() / m);
    mvdr_weight(&r, eps, target, cluster)
}

/// Zero-forcing weights toward the cluster centers: `b_nᴴ ā_l = δ_{nl}`.
pub fn zf_weights(centers: &[CVec]) -> Result<Vec<BeamWeight>> {
    let m = centers.first().map_or(0, |c| c.len());
    let a = CMat::from_fn(m, centers.len(), |i, j| centers[j][i]);
    let w = numerics::pinv_full_col(&a)?.adjoint();
    Ok(centers
        .iter()
        .enumerate()
        .map(|(n, c)| BeamWeight {
            cluster: n,
            weight: w.column(n).clone_owned(),
            target: c.clone(),
        })
        .collect())
}

/// Beam-domain observation for one cluster. The parameter matrix
/// `D̂ = B̂ ⊗ I_T` is kept implicit through `gain`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub cluster: usize,
    /// `Ŷ_n = (I_K ⊗ b)ᴴ Y` (K × T).
    pub combined: CMat,
    /// `B̂_{n,n} = (I_K ⊗ b)ᴴ G̃_n` (K × Q).
    pub gain: CMat,
}

impl Measurement {
    pub fn slots(&self) -> usize {
        self.combined.ncols()
    }

    pub fn users(&self) -> usize {
        self.gain.ncols()
    }

    /// `η̂ = vec(Ŷᵀ)`.
    pub fn eta(&self) -> CVec {
        numerics::vec(&self.combined.transpose())
    }

    /// Explicit `B̂ ⊗ I_T`; for verification only.
    pub fn parameter_matrix(&self) -> CMat {
        numerics::kron(&self.gain, &identity(self.slots()))
    }
}

pub fn build_measurement(
    y: &CMat,
    eqch: &EquivalentChannel,
    cluster: usize,
    weight: &CVec,
) -> Result<Measurement> {
    let k = eqch.subcarriers;
    Ok(Measurement {
        cluster,
        combined: numerics::combine_kron(y, weight, k)?,
        gain: numerics::combine_kron(eqch.stacked(cluster), weight, k)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BlockIndexSet;
    use crate::scenario::{
        cluster_average_steering, draw_geometry, sample_channels, steering_vector,
    };
    use crate::spreading::{assign_signatures, equivalent_channel};
    use crate::testutil::random_cmat;
    use crate::transceiver::{modulate, superpose, Constellation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(rng: &mut ChaCha8Rng, m: usize, q: usize, k: usize) -> (EquivalentChannel, Vec<CVec>) {
        let geom = draw_geometry(&[-30.0, -10.0, 10.0], 5.0, q, rng).unwrap();
        let ch = sample_channels(&geom, m, k, 0.5, rng);
        let sig = assign_signatures(k, q, &[], rng).unwrap();
        (equivalent_channel(&ch, &sig).unwrap(), cluster_average_steering(&ch))
    }

    #[test]
    fn sbf_without_interferers_is_scaled_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (eq, abar) = scenario(&mut rng, 5, 10, 8);
        let single = eq.only(1);
        let b = sbf_weight(&single, 0, &[0.1], &[13.0], &abar[1]).unwrap();
        let expect = &abar[1] / C64::new(abar[1].norm_squared(), 0.0);
        assert!((&b.weight - expect).norm() < 1e-12);
        let a = steering_vector(3.0, 5, 0.5);
        let b = mvdr_weight(&CMat::zeros(5, 5), 1.0, &a, 0).unwrap();
        assert!((&b.weight - a.unscale(5.0)).norm() < 1e-12);
    }

    #[test]
    fn sbf_constraint_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (eq, abar) = scenario(&mut rng, 5, 10, 8);
            for (n, a) in abar.iter().enumerate() {
                let b = sbf_weight(&eq, n, &[0.1; 3], &[13.0; 3], a).unwrap();
                assert!(b.constraint_error() < 1e-10);
            }
        }
        let (eq, abar) = scenario(&mut rng, 5, 10, 8);
        assert!(sbf_weight(&eq, 0, &[0.1; 3], &[f64::NEG_INFINITY; 3], &abar[0]).is_err());
    }

    #[test]
    fn sbf_beats_projected_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (eq, abar) = scenario(&mut rng, 5, 10, 8);
        let phi = sbf_covariance(&eq, 1, &[0.1; 3], &[13.0; 3]).unwrap();
        let b = sbf_weight(&eq, 1, &[0.1; 3], &[13.0; 3], &abar[1]).unwrap();
        let best = b.cost(&phi);
        let a = &abar[1];
        for _ in 0..1000 {
            let d = random_cmat(&mut rng, 5, 1).column(0).clone_owned();
            let mut cand = &b.weight + d;
            // Project back onto bᴴā = 1.
            let err = a.dotc(&cand) - C64::new(1.0, 0.0);
            cand -= a * (err / a.norm_squared());
            let cb = BeamWeight { cluster: 1, weight: cand, target: a.clone() };
            assert!(cb.constraint_error() < 1e-10);
            assert!(best <= cb.cost(&phi) + 1e-9);
        }
    }

    #[test]
    fn dbf_zero_ipnc_gives_scaled_target() {
        let a = steering_vector(-10.0, 4, 0.5);
        let b = dbf_weight(&CMat::zeros(12, 5), Loading::Fixed(0.1), None, &a, 0).unwrap();
        assert!((&b.weight - a.unscale(4.0)).norm() < 1e-12);
        assert!(b.constraint_error() < 1e-10);
    }

    #[test]
    fn dbf_nulls_orthogonal_interferer() {
        // Two antennas, target broadside, interferer at the orthogonal
        // direction u = [1, −1]. The constrained optimum is b = ā/2 with
        // bᴴu → 0; with a non-orthogonal interferer the response shrinks
        // like 1/(1 + P) in the interferer power P.
        let a = steering_vector(0.0, 2, 0.5);
        let u = steering_vector(30.0, 2, 0.5);
        let mut prev = f64::INFINITY;
        for p in [1.0f64, 10.0, 100.0, 1e4] {
            let samples = CMat::from_fn(2, 8, |m, t| u[m] * p.sqrt() * if t % 2 == 0 { 1.0 } else { -1.0 });
            let b = dbf_weight(&samples, Loading::Fixed(1.0), None, &a, 0).unwrap();
            let leak = b.weight.dotc(&u).norm();
            // Closed form for R = P·uuᴴ, ε = 1: x = ā − P(uᴴā)/(1 + P·M) u.
            let m = 2.0;
            let uha = u.dotc(&a);
            let x = &a - &u * (uha * p / (1.0 + p * m));
            let expect = &x / a.dotc(&x);
            assert!((&b.weight - expect).norm() < 1e-10);
            assert!(leak < prev);
            prev = leak;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn ipnc_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (eq, _) = scenario(&mut rng, 4, 10, 6);
        let one = eq.only(0);
        let sup = BlockIndexSet::new(vec![1, 4, 7], 10).unwrap();
        let x = modulate(&sup, 10, 5, Constellation::Qam16, 1.0, &mut rng);
        let y = superpose(&one, std::slice::from_ref(&x), &CMat::zeros(24, 5)).unwrap();
        assert!(estimate_ipnc(&y, &one, 0, &x).unwrap().norm() < 1e-12);
        assert_eq!(estimate_ipnc(&y, &one, 0, &CMat::zeros(10, 5)).unwrap(), y);

        // î = i + G̃ (X − X̂) with i the true IpNC.
        let x2 = modulate(&sup, 10, 5, Constellation::Qam16, 1.0, &mut rng);
        let v = crate::transceiver::draw_noise(24, 5, 0.2, &mut rng);
        let y = superpose(&eq.only(0), std::slice::from_ref(&x), &v).unwrap()
            + eq.stacked(1) * &x2;
        let truth_ipnc = &y - eq.stacked(0) * &x;
        let xhat = modulate(&sup, 10, 5, Constellation::Qpsk, 1.0, &mut rng);
        let est = estimate_ipnc(&y, &eq, 0, &xhat).unwrap();
        let decomposed = truth_ipnc + eq.stacked(0) * (&x - &xhat);
        assert!((est - decomposed).norm() < 1e-10);
    }

    #[test]
    fn measurement_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (eq, abar) = scenario(&mut rng, 4, 10, 6);
        let sup = BlockIndexSet::new(vec![0, 3], 10).unwrap();
        let x = modulate(&sup, 10, 3, Constellation::Qam16, 1.0, &mut rng);
        let b = sbf_weight(&eq, 0, &[0.1; 3], &[13.0; 3], &abar[0]).unwrap();
        let y = random_cmat(&mut rng, 24, 3);
        let meas = build_measurement(&y, &eq, 0, &b.weight).unwrap();
        let c = numerics::vec(&x.transpose());
        let lhs = meas.parameter_matrix() * c;
        let rhs = numerics::vec(&(&meas.gain * &x).transpose());
        assert!((lhs - rhs).norm() < 1e-12);
        assert_eq!(meas.eta().len(), 6 * 3);
        assert_eq!(meas.eta()[1], meas.combined[(0, 1)]);
    }

    #[test]
    fn single_antenna_measurement_is_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (eq, _) = scenario(&mut rng, 1, 6, 5);
        let y = random_cmat(&mut rng, 5, 2);
        let one = CVec::from_element(1, C64::new(1.0, 0.0));
        let meas = build_measurement(&y, &eq, 2, &one).unwrap();
        assert_eq!(meas.combined, y);
        assert_eq!(&meas.gain, eq.stacked(2));
    }

    #[test]
    fn zero_forcing_nulls_other_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (_, abar) = scenario(&mut rng, 5, 10, 10);
        let w = zf_weights(&abar).unwrap();
        for (n, b) in w.iter().enumerate() {
            for (l, a) in abar.iter().enumerate() {
                let r = b.weight.dotc(a);
                let expect = if n == l { 1.0 } else { 0.0 };
                assert!((r - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }
}
