//! Physical scenario: user angles, ULA steering vectors, slow-fading
//! channels, direction-based clustering and CSI perturbation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{CVec, C64};

/// ULA response `exp(−j2π m (d/λ) sin θ)` for `m = 0..M`.
pub fn steering_vector(theta_deg: f64, antennas: usize, spacing_ratio: f64) -> CVec {
    let phase = -2.0 * PI * spacing_ratio * theta_deg.to_radians().sin();
    CVec::from_fn(antennas, |m, _| {
        if m == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, phase * m as f64)
        }
    })
}

/// Normalized direction `φ = 2 (d/λ) sin θ`.
pub fn normalized_direction(theta_deg: f64, spacing_ratio: f64) -> f64 {
    2.0 * spacing_ratio * theta_deg.to_radians().sin()
}

/// Recovers `φ` from the phase progression of a steering (or gain) vector.
/// Unambiguous while `|φ| < 1`, which holds for half-wavelength spacing.
pub fn direction_from_vector(a: &CVec) -> f64 {
    if a.len() < 2 || a[0].norm() == 0.0 {
        return 0.0;
    }
    -(a[1] / a[0]).arg() / PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    pub theta_deg: f64,
    /// Large-scale fading amplitude ρ.
    pub large_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub theta_deg: f64,
    pub large_scale: f64,
    pub steering: CVec,
    /// Small-scale fading η per subcarrier, fixed for the frame.
    pub fading: Vec<C64>,
}

impl UserChannel {
    /// `g_k = ρ η_k a`.
    pub fn gain(&self, k: usize) -> CVec {
        &self.steering * (self.fading[k] * self.large_scale)
    }
}

/// Per-cluster, per-user channel state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub antennas: usize,
    pub subcarriers: usize,
    pub clusters: Vec<Vec<UserChannel>>,
}

impl ChannelSet {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn users_per_cluster(&self) -> usize {
        self.clusters.first().map_or(0, Vec::len)
    }

    pub fn user(&self, n: usize, q: usize) -> &UserChannel {
        &self.clusters[n][q]
    }
}

/// Draws user angles uniformly inside each cluster's band.
pub fn draw_geometry(
    centers_deg: &[f64],
    width_deg: f64,
    users_per_cluster: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<UserGeometry>>> {
    let half = width_deg / 2.0;
    centers_deg
        .iter()
        .map(|&c| {
            if (c.abs() + half) >= 90.0 {
                return Err(Error::config(format!(
                    "cluster band {c}±{half} degrees reaches endfire"
                )));
            }
            Ok((0..users_per_cluster)
                .map(|_| UserGeometry {
                    theta_deg: c - half + width_deg * rng.random::<f64>(),
                    large_scale: 1.0,
                })
                .collect())
        })
        .collect()
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Unit-variance circular complex Gaussian sample.
pub fn cn01(rng: &mut impl Rng) -> C64 {
    complex_gaussian(rng)
}

/// Builds the channel set; `η` is i.i.d. CN(0,1) per user and subcarrier.
pub fn sample_channels(
    geometry: &[Vec<UserGeometry>],
    antennas: usize,
    subcarriers: usize,
    spacing_ratio: f64,
    rng: &mut impl Rng,
) -> ChannelSet {
    let clusters = geometry
        .iter()
        .map(|users| {
            users
                .iter()
                .map(|u| UserChannel {
                    theta_deg: u.theta_deg,
                    large_scale: u.large_scale,
                    steering: steering_vector(u.theta_deg, antennas, spacing_ratio),
                    fading: (0..subcarriers).map(|_| complex_gaussian(rng)).collect(),
                })
                .collect()
        })
        .collect();
    ChannelSet {
        antennas,
        subcarriers,
        clusters,
    }
}

/// `|a₁ᴴa₂| / M`.
pub fn channel_correlation(a1: &CVec, a2: &CVec) -> f64 {
    a1.dotc(a2).norm() / a1.len() as f64
}

/// Result of grouping users by direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster label per user, in input order.
    pub labels: Vec<usize>,
    /// Cluster centroids in normalized direction, strictly increasing.
    pub centroids: Vec<f64>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == cluster).then_some(i))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.num_clusters()).map(|c| self.members(c).len()).collect()
    }
}

fn assign_1d(points: &[f64], centroids: &[f64], labels: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (p, l) in points.iter().zip(labels.iter_mut()) {
        let (best, d) = centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (p - c) * (p - c)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        *l = best;
        wcss += d;
    }
    wcss
}

fn lloyd_1d(points: &[f64], mut centroids: Vec<f64>) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = vec![usize::MAX; points.len()];
    let mut prev = labels.clone();
    let mut wcss = assign_1d(points, &centroids, &mut labels);
    for _ in 0..100 {
        if labels == prev {
            break;
        }
        prev.clone_from(&labels);
        let k = centroids.len();
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            } else {
                // Reseed an empty cluster at the worst-fitted point.
                let far = points
                    .iter()
                    .zip(&labels)
                    .map(|(p, &l)| (p - centroids[l]).abs())
                    .enumerate()
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                centroids[c] = points[far];
            }
        }
        wcss = assign_1d(points, &centroids, &mut labels);
    }
    (labels, centroids, wcss)
}

/// k-means++ seeding: each further seed is drawn with probability
/// proportional to its squared distance from the nearest chosen seed.
fn plus_plus_seeds(points: &[f64], clusters: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut seeds = vec![points[rng.random_range(0..points.len())]];
    while seeds.len() < clusters {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| seeds.iter().map(|s| (p - s).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // Every point coincides with a seed.
            Err(_) => rng.random_range(0..points.len()),
        };
        seeds.push(points[next]);
    }
    seeds
}

/// K-means on the scalar normalized direction recovered from each user's
/// steering vector. Best of `restarts` k-means++ initializations by
/// within-cluster sum of squares; labels are ordered by centroid.
pub fn cluster_users(
    steering: &[CVec],
    clusters: usize,
    restarts: usize,
    rng: &mut impl Rng,
) -> Result<ClusterAssignment> {
    if clusters == 0 || clusters > steering.len() {
        return Err(Error::config(format!(
            "cannot form {clusters} clusters from {} users",
            steering.len()
        )));
    }
    let points: Vec<f64> = steering.iter().map(direction_from_vector).collect();
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd_1d(&points, plus_plus_seeds(&points, clusters, rng));
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (labels, centroids, _) = best.expect("at least one restart");
    let mut order: Vec<usize> = (0..clusters).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let mut relabel = vec![0; clusters];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    Ok(ClusterAssignment {
        labels: labels.iter().map(|&l| relabel[l]).collect(),
        centroids: order.iter().map(|&o| centroids[o]).collect(),
    })
}

/// `ā = (1/Q) Σ a_q`.
pub fn average_steering(steering: &[CVec]) -> CVec {
    let m = steering[0].len();
    let sum = steering.iter().fold(CVec::zeros(m), |acc, a| acc + a);
    sum.unscale(steering.len() as f64)
}

/// `ā = (1/Q) Σ g_q / g_q(1)` from channel gains on one subcarrier.
pub fn average_steering_from_gains(gains: &[CVec]) -> CVec {
    let m = gains[0].len();
    let sum = gains
        .iter()
        .fold(CVec::zeros(m), |acc, g| acc + g.map(|z| z / g[0]));
    sum.unscale(gains.len() as f64)
}

/// Per-cluster average steering vectors computed from gains on subcarrier 0.
pub fn cluster_average_steering(channels: &ChannelSet) -> Vec<CVec> {
    channels
        .clusters
        .iter()
        .map(|users| {
            let gains: Vec<CVec> = users.iter().map(|u| u.gain(0)).collect();
            average_steering_from_gains(&gains)
        })
        .collect()
}

fn disturb(x: f64, percent: f64, rng: &mut impl Rng) -> f64 {
    let half = x.abs() * percent / 100.0;
    x + half * (2.0 * rng.random::<f64>() - 1.0)
}

fn disturb_complex(z: C64, percent: f64, rng: &mut impl Rng) -> C64 {
    let re = disturb(z.re, percent, rng);
    let im = disturb(z.im, percent, rng);
    C64::new(re, im)
}

/// Receiver-side CSI copy with each fading value and steering element
/// disturbed uniformly: real and imaginary parts independently, each with
/// half-range `p%` of that part's magnitude.
pub fn perturb_csi(channels: &ChannelSet, percent: f64, rng: &mut impl Rng) -> ChannelSet {
    let mut out = channels.clone();
    if percent == 0.0 {
        return out;
    }
    for user in out.clusters.iter_mut().flatten() {
        for eta in user.fading.iter_mut() {
            *eta = disturb_complex(*eta, percent, rng);
        }
        for a in user.steering.iter_mut() {
            *a = disturb_complex(*a, percent, rng);
        }
    }
    out
}
