//! Experiment configuration, read from TOML. Unknown keys are rejected at
//! every level.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::training::SpInit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Op,
    Is,
    Sp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocator {
    Naive,
    Qc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Digital {
    Zf,
    Mmse,
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocator::Naive => "naive",
            Allocator::Qc => "QC",
        })
    }
}

impl fmt::Display for Digital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Digital::Zf => "ZF",
            Digital::Mmse => "MMSE",
        })
    }
}

/// One curve of an experiment: training scheme, allocator and digital
/// precoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub scheme: Scheme,
    pub allocator: Allocator,
    pub digital: Digital,
    /// Fraction of the exhaustive slot count spent on SP initial training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max_ratio: Option<f64>,
}

impl Variant {
    pub fn new(scheme: Scheme, allocator: Allocator, digital: Digital) -> Self {
        Self {
            scheme,
            allocator,
            digital,
            d_max_ratio: None,
        }
    }

    pub fn sp(ratio: f64, allocator: Allocator, digital: Digital) -> Self {
        Self {
            scheme: Scheme::Sp,
            allocator,
            digital,
            d_max_ratio: Some(ratio),
        }
    }

    /// `OP`, `IS` or `SP(<ratio>)`.
    pub fn scheme_label(&self) -> String {
        match self.scheme {
            Scheme::Op => "OP".into(),
            Scheme::Is => "IS".into(),
            Scheme::Sp => format!("SP({})", self.d_max_ratio.unwrap_or(f64::NAN)),
        }
    }

    /// Curve name such as `OP-QC-ZF` or `OP-ZF`.
    pub fn label(&self) -> String {
        match self.allocator {
            Allocator::Naive => format!("{}-{}", self.scheme_label(), self.digital),
            Allocator::Qc => format!("{}-QC-{}", self.scheme_label(), self.digital),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.scheme, self.d_max_ratio) {
            (Scheme::Sp, Some(r)) if r > 0.0 && r <= 1.0 => Ok(()),
            (Scheme::Sp, r) => Err(Error::Config(format!(
                "SP needs d_max_ratio in (0, 1], got {r:?}"
            ))),
            (_, Some(_)) => Err(Error::Config("d_max_ratio only applies to SP".into())),
            (_, None) => Ok(()),
        }
    }
}

/// How the per-user gain threshold is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaRule {
    /// The same absolute threshold on `|w^H H f|` for every user.
    Fixed { value: f64 },
    /// `factor * sigma_dl`, with `sigma_dl` fixed by the power convention.
    NoiseStd {
        factor: f64,
        convention: PowerConvention,
    },
}

/// Which side of the downlink SNR is held at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConvention {
    /// `sigma_dl^2 = 1`, `P_dl = K SNR_dl`.
    UnitNoise,
    /// `P_dl = 1`, `sigma_dl^2 = 1 / (K SNR_dl)`.
    UnitPower,
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::NoiseStd {
            factor: 10.0,
            convention: PowerConvention::UnitPower,
        }
    }
}

impl GammaRule {
    /// Threshold for `k` users at downlink SNR `snr_dl_db`.
    pub fn threshold(&self, k: usize, snr_dl_db: f64) -> f64 {
        match *self {
            GammaRule::Fixed { value } => value,
            GammaRule::NoiseStd { factor, convention } => match convention {
                PowerConvention::UnitNoise => factor,
                PowerConvention::UnitPower => {
                    factor * (1.0 / (k as f64 * 10f64.powf(snr_dl_db / 10.0))).sqrt()
                }
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            GammaRule::Fixed { value } => value,
            GammaRule::NoiseStd { factor, .. } => factor,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("threshold parameter {v} must be finite and nonnegative")))
        }
    }
}

/// Array geometry, user count and SNRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    /// RF chains available for downlink streams.
    pub n_rf: usize,
    /// RF chains used per training slot; defaults to `n_rf`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_rf: Option<usize>,
    pub k_users: usize,
    /// `inf` makes training noiseless.
    pub snr_ul_db: f64,
    pub snr_dl_db: f64,
    /// Pilot length; defaults to `k_users`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_bs: 64,
            n_ue: 16,
            n_rf: 16,
            training_rf: None,
            k_users: 10,
            snr_ul_db: 20.0,
            snr_dl_db: 10.0,
            tau: None,
        }
    }
}

impl SystemConfig {
    pub fn training_rf(&self) -> usize {
        self.training_rf.unwrap_or(self.n_rf)
    }

    pub fn tau(&self) -> usize {
        self.tau.unwrap_or(self.k_users)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.n_ue == 0 || self.n_rf == 0 || self.k_users == 0 {
            return Err(Error::Config("array sizes, RF chains and users must be positive".into()));
        }
        if self.k_users > self.n_rf {
            return Err(Error::Config(format!(
                "K = {} users exceeds N_RF = {} RF chains",
                self.k_users, self.n_rf
            )));
        }
        if self.training_rf() == 0 || !self.n_bs.is_multiple_of(self.training_rf()) {
            return Err(Error::Config(format!(
                "N_BS = {} is not divisible by the {} training RF chains",
                self.n_bs,
                self.training_rf()
            )));
        }
        if self.tau() < self.k_users {
            return Err(Error::Config("pilot length shorter than the user count".into()));
        }
        if self.snr_ul_db.is_nan() || self.snr_ul_db == f64::NEG_INFINITY || !self.snr_dl_db.is_finite() {
            return Err(Error::Config("SNR values must be finite (uplink may be +inf)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub t_crosses: usize,
    pub sp_init: SpInit,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            t_crosses: 2,
            sp_init: SpInit::Checkerboard,
        }
    }
}

/// Parameter swept by the `sweep` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    KUsers,
    SnrDlDb,
    NUe,
    NBs,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::KUsers => "k_users",
            Axis::SnrDlDb => "snr_dl_db",
            Axis::NUe => "n_ue",
            Axis::NBs => "n_bs",
        }
    }

    /// Copy of `system` with the axis set to `value`.
    pub fn apply(&self, system: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut s = system.clone();
        let as_count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value < u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} needs a positive integer, got {value}", self.name())))
            }
        };
        match self {
            Axis::KUsers => s.k_users = as_count()?,
            Axis::SnrDlDb => s.snr_dl_db = value,
            Axis::NUe => s.n_ue = as_count()?,
            Axis::NBs => s.n_bs = as_count()?,
        }
        if *self == Axis::KUsers && system.tau.is_some_and(|t| t < s.k_users) {
            s.tau = Some(s.k_users);
        }
        s.validate()?;
        Ok(s)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k_users" => Ok(Axis::KUsers),
            "snr_dl_db" => Ok(Axis::SnrDlDb),
            "n_ue" => Ok(Axis::NUe),
            "n_bs" => Ok(Axis::NBs),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected k_users, snr_dl_db, n_ue or n_bs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub system: SystemConfig,
    pub channel: ChannelSpec,
    pub training: TrainingConfig,
    pub gamma: GammaRule,
    pub variants: Vec<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 2000,
            seed: 1,
            threads: None,
            system: SystemConfig::default(),
            channel: ChannelSpec::default(),
            training: TrainingConfig::default(),
            gamma: GammaRule::default(),
            variants: vec![
                Variant::new(Scheme::Op, Allocator::Naive, Digital::Zf),
                Variant::new(Scheme::Op, Allocator::Qc, Digital::Zf),
            ],
            sweep: None,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        self.system.validate()?;
        self.channel.validate()?;
        self.gamma.validate()?;
        for v in &self.variants {
            v.validate()?;
        }
        Ok(())
    }
}
