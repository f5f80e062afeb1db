//! Zadoff-Chu spreading signatures and the equivalent spread channel.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{CMat, C64};
use crate::scenario::ChannelSet;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Length-`len` Zadoff-Chu sequence with root `beta` and shift `shift`.
///
/// The phase numerator is reduced modulo `2·len` in integer arithmetic, so
/// the result is exactly periodic in `shift` with period `len`.
pub fn zadoff_chu(len: usize, beta: usize, shift: i64) -> Result<Vec<C64>> {
    if len == 0 || beta == 0 || beta >= len || gcd(beta as u64, len as u64) != 1 {
        return Err(Error::config(format!(
            "Zadoff-Chu root {beta} must lie in (0, {len}) and be coprime to {len}"
        )));
    }
    let modulus = 2 * len as i128;
    let odd = len % 2 == 1;
    Ok((0..len as i128)
        .map(|k| {
            let lin = if odd { k + 1 + 2 * shift as i128 } else { k + 2 * shift as i128 };
            let num = (beta as i128 * k * lin).rem_euclid(modulus);
            C64::from_polar(1.0, -PI * num as f64 / len as f64)
        })
        .collect())
}

/// Smallest `count` roots in `(0, len)` coprime to `len`.
pub fn default_roots(len: usize, count: usize) -> Vec<usize> {
    (1..len)
        .filter(|&b| gcd(b as u64, len as u64) == 1)
        .take(count)
        .collect()
}

/// Signatures for the `Q` users of one cluster; the same set is reused in
/// every cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSet {
    pub len: usize,
    pub signatures: Vec<Vec<C64>>,
    /// `(root, shift)` that generated each user's signature.
    pub plan: Vec<(usize, i64)>,
}

impl SignatureSet {
    pub fn num_users(&self) -> usize {
        self.signatures.len()
    }

    /// All-ones signatures (no spreading); useful for degenerate checks.
    pub fn unspread(len: usize, users: usize) -> Self {
        Self {
            len,
            signatures: vec![vec![C64::new(1.0, 0.0); len]; users],
            plan: vec![(0, 0); users],
        }
    }
}

/// Assigns `users` distinct signatures. Shifts repeat with period `len`, so
/// `ceil(users / len)` roots are taken from `roots` (or the smallest coprime
/// roots when `roots` is empty), `len` shifts each, and the candidate list
/// is randomly permuted across users.
pub fn assign_signatures(
    len: usize,
    users: usize,
    roots: &[usize],
    rng: &mut impl Rng,
) -> Result<SignatureSet> {
    let needed = users.div_ceil(len.max(1));
    let roots: Vec<usize> = if roots.is_empty() {
        default_roots(len, needed)
    } else {
        roots.to_vec()
    };
    if roots.len() < needed {
        return Err(Error::config(format!(
            "{users} users need {needed} Zadoff-Chu roots of length {len}, only {} available",
            roots.len()
        )));
    }
    let mut plan: Vec<(usize, i64)> = roots
        .iter()
        .take(needed)
        .flat_map(|&r| (0..len as i64).map(move |s| (r, s)))
        .take(users)
        .collect();
    plan.shuffle(rng);
    let signatures = plan
        .iter()
        .map(|&(r, s)| zadoff_chu(len, r, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SignatureSet {
        len,
        signatures,
        plan,
    })
}

/// Per-cluster equivalent channels `G̃_n` (MK × Q): block `k` holds columns
/// `s_{n,q,k} g_{n,q,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    pub antennas: usize,
    pub subcarriers: usize,
    pub users: usize,
    pub clusters: Vec<CMat>,
}

impl EquivalentChannel {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn stacked(&self, n: usize) -> &CMat {
        &self.clusters[n]
    }

    /// `G̃_{n,k}` (M × Q).
    pub fn block(&self, n: usize, k: usize) -> CMat {
        self.clusters[n]
            .rows(k * self.antennas, self.antennas)
            .clone_owned()
    }

    /// `Σ_k G̃_{n,k} G̃_{n,k}ᴴ` (M × M).
    pub fn spatial_gram(&self, n: usize) -> CMat {
        let m = self.antennas;
        (0..self.subcarriers).fold(CMat::zeros(m, m), |acc, k| {
            let blk = self.clusters[n].rows(k * m, m);
            acc + blk * blk.adjoint()
        })
    }

    /// Single-cluster view (used for interference-free baselines).
    pub fn only(&self, n: usize) -> Self {
        Self {
            clusters: vec![self.clusters[n].clone()],
            ..*self
        }
    }
}

/// Builds `G̃_n` for every cluster from channels and the shared signatures.
pub fn equivalent_channel(
    channels: &ChannelSet,
    signatures: &SignatureSet,
) -> Result<EquivalentChannel> {
    let (m, k) = (channels.antennas, channels.subcarriers);
    if signatures.len != k {
        return Err(Error::dim(
            "equivalent channel",
            format!("signature length {} vs {k} subcarriers", signatures.len),
        ));
    }
    let q = signatures.num_users();
    let mut clusters = Vec::with_capacity(channels.num_clusters());
    for users in &channels.clusters {
        if users.len() != q {
            return Err(Error::dim(
                "equivalent channel",
                format!("cluster has {} users, {q} signatures", users.len()),
            ));
        }
        let mut g = CMat::zeros(m * k, q);
        for (qi, user) in users.iter().enumerate() {
            for kk in 0..k {
                let coef = signatures.signatures[qi][kk] * user.fading[kk] * user.large_scale;
                for mm in 0..m {
                    g[(kk * m + mm, qi)] = coef * user.steering[mm];
                }
            }
        }
        clusters.push(g);
    }
    Ok(EquivalentChannel {
        antennas: m,
        subcarriers: k,
        users: q,
        clusters,
    })
}
