//! Experiment configuration read from TOML.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::RecoveryConfig;
use crate::spreading::default_roots;
use crate::transceiver::Constellation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub antennas: usize,
    pub users_per_cluster: usize,
    pub subcarriers: usize,
    pub slots: usize,
    /// Element spacing over wavelength, `d/λ`.
    pub spacing_ratio: f64,
    pub constellation: Constellation,
    /// Zadoff-Chu roots; empty selects the smallest coprime ones.
    pub zc_roots: Vec<usize>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 5,
            users_per_cluster: 40,
            subcarriers: 20,
            slots: 7,
            spacing_ratio: 0.5,
            constellation: Constellation::Qam16,
            zc_roots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cluster_centers_deg: Vec<f64>,
    pub cluster_width_deg: f64,
    /// Per-cluster SNR in dB.
    pub snr_db: Vec<f64>,
    /// Receiver-side CSI error `p` in percent.
    pub csi_error_percent: f64,
    pub kmeans_restarts: usize,
    /// Explicit user angles, one list of `users_per_cluster` entries per
    /// cluster; replaces the random draw inside each band.
    pub user_angles_deg: Option<Vec<Vec<f64>>>,
    /// Per-user large-scale fading amplitude ρ, laid out like
    /// `user_angles_deg`; every user has ρ = 1 when absent.
    pub large_scale_fading: Option<Vec<Vec<f64>>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cluster_centers_deg: vec![-30.0, -10.0, 10.0],
            cluster_width_deg: 5.0,
            snr_db: vec![2.0; 3],
            csi_error_percent: 0.0,
            kmeans_restarts: 10,
            user_angles_deg: None,
            large_scale_fading: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Exact number of active users per cluster.
    pub active_users: Vec<usize>,
    /// When set, users are active independently with this probability and
    /// `active_users` is ignored.
    pub activity_rate: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { active_users: vec![4; 3], activity_rate: None }
    }
}

/// Receiver under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReceiverKind {
    /// Joint adaptive beamforming and subspace pursuit.
    Jabfsp,
    /// The above followed by interference cancellation.
    JabfspIc,
    /// Fixed initial beam, same sparsity search.
    SbfAsp,
    /// Fixed initial beam followed by interference cancellation.
    SbfAspIc,
    /// Single antenna, interference-free frame, known sparsity.
    OracleBsasp,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 5] = [
        ReceiverKind::Jabfsp,
        ReceiverKind::JabfspIc,
        ReceiverKind::SbfAsp,
        ReceiverKind::SbfAspIc,
        ReceiverKind::OracleBsasp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Jabfsp => "jabfsp",
            ReceiverKind::JabfspIc => "jabfsp-ic",
            ReceiverKind::SbfAsp => "sbf-asp",
            ReceiverKind::SbfAspIc => "sbf-asp-ic",
            ReceiverKind::OracleBsasp => "oracle-bsasp",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::ALL
            .into_iter()
            .find(|r| r.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = ReceiverKind::ALL.iter().map(|r| r.name()).collect();
                Error::config(format!("unknown receiver '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

impl TryFrom<String> for ReceiverKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ReceiverKind> for String {
    fn from(r: ReceiverKind) -> Self {
        r.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub receivers: Vec<ReceiverKind>,
    /// Whether the loading rule may use the true noise power.
    pub known_noise: bool,
    /// Antenna used by the single-antenna baseline.
    pub oracle_antenna: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            receivers: vec![ReceiverKind::Jabfsp, ReceiverKind::JabfspIc],
            known_noise: true,
            oracle_antenna: 0,
        }
    }
}

/// Quantity varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Sets every cluster's SNR to the value.
    SnrDb,
    Slots,
    Antennas,
    Subcarriers,
    CsiErrorPercent,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SnrDb => "snr_db",
            SweepParam::Slots => "slots",
            SweepParam::Antennas => "antennas",
            SweepParam::Subcarriers => "subcarriers",
            SweepParam::CsiErrorPercent => "csi_error_percent",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParam::Slots | SweepParam::Antennas | SweepParam::Subcarriers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    pub system: SystemConfig,
    pub scenario: ScenarioConfig,
    pub traffic: TrafficConfig,
    pub receiver: ReceiverConfig,
    pub algorithm: RecoveryConfig,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 1,
            threads: 0,
            system: SystemConfig::default(),
            scenario: ScenarioConfig::default(),
            traffic: TrafficConfig::default(),
            receiver: ReceiverConfig::default(),
            algorithm: RecoveryConfig::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn num_clusters(&self) -> usize {
        self.scenario.cluster_centers_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        let s = &self.system;
        let n = self.num_clusters();
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        for (name, v) in [
            ("antennas", s.antennas),
            ("users_per_cluster", s.users_per_cluster),
            ("subcarriers", s.subcarriers),
            ("slots", s.slots),
            ("clusters", n),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(s.spacing_ratio > 0.0 && s.spacing_ratio <= 0.5) {
            return bad(format!("spacing_ratio {} must lie in (0, 0.5]", s.spacing_ratio));
        }
        if s.zc_roots.is_empty() {
            let needed = s.users_per_cluster.div_ceil(s.subcarriers);
            if default_roots(s.subcarriers, needed).len() < needed {
                return bad(format!(
                    "{} users need {needed} Zadoff-Chu roots of length {}",
                    s.users_per_cluster, s.subcarriers
                ));
            }
        }
        let sc = &self.scenario;
        if sc.snr_db.len() != n {
            return bad(format!("snr_db has {} entries for {n} clusters", sc.snr_db.len()));
        }
        if sc.snr_db.iter().any(|v| !v.is_finite()) {
            return bad("snr_db entries must be finite".into());
        }
        if !(sc.cluster_width_deg >= 0.0) {
            return bad("cluster_width_deg must be non-negative".into());
        }
        if !(sc.csi_error_percent >= 0.0 && sc.csi_error_percent.is_finite()) {
            return bad("csi_error_percent must be non-negative".into());
        }
        let per_user = |name: &str, table: &Option<Vec<Vec<f64>>>, ok: fn(f64) -> bool| -> Result<()> {
            let Some(table) = table else { return Ok(()) };
            if table.len() != n || table.iter().any(|row| row.len() != s.users_per_cluster) {
                return bad(format!("{name} must hold {n} lists of {} entries", s.users_per_cluster));
            }
            if table.iter().flatten().any(|&v| !ok(v)) {
                return bad(format!("{name} has an entry out of range"));
            }
            Ok(())
        };
        per_user("user_angles_deg", &sc.user_angles_deg, |v| v.abs() < 90.0)?;
        per_user("large_scale_fading", &sc.large_scale_fading, |v| v > 0.0 && v.is_finite())?;
        let t = &self.traffic;
        match t.activity_rate {
            Some(a) if !(0.0..=1.0).contains(&a) => {
                return bad(format!("activity_rate {a} outside [0, 1]"));
            }
            Some(_) => {}
            None => {
                if t.active_users.len() != n {
                    return bad(format!(
                        "active_users has {} entries for {n} clusters",
                        t.active_users.len()
                    ));
                }
                if let Some(&a) = t.active_users.iter().find(|&&a| a > s.users_per_cluster) {
                    return bad(format!("{a} active users exceed {} per cluster", s.users_per_cluster));
                }
            }
        }
        if self.receiver.receivers.is_empty() {
            return bad("at least one receiver is required".into());
        }
        if self.receiver.oracle_antenna >= s.antennas {
            return bad(format!(
                "oracle_antenna {} out of range for {} antennas",
                self.receiver.oracle_antenna, s.antennas
            ));
        }
        self.algorithm.validate()?;
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep values must not be empty".into());
            }
            if sw.values.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("sweep values must be strictly increasing".into());
            }
            for &v in &sw.values {
                self.at(sw.param, v)?;
            }
        }
        Ok(())
    }

    /// Copy of the configuration with `param` set to `value`, validated.
    pub fn at(&self, param: SweepParam, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::config(format!("sweep value {value} is not finite")));
        }
        let count = || -> Result<usize> {
            if param.integral() && (value.fract() != 0.0 || value < 1.0) {
                return Err(Error::config(format!(
                    "{} must be a positive integer, got {value}",
                    param.name()
                )));
            }
            Ok(value as usize)
        };
        let mut out = self.clone();
        out.sweep = None;
        match param {
            SweepParam::SnrDb => out.scenario.snr_db = vec![value; self.num_clusters()],
            SweepParam::Slots => out.system.slots = count()?,
            SweepParam::Antennas => out.system.antennas = count()?,
            SweepParam::Subcarriers => out.system.subcarriers = count()?,
            SweepParam::CsiErrorPercent => out.scenario.csi_error_percent = value,
        }
        out.validate()?;
        Ok(out)
    }
}
