//! Experiment configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use dmdsc_core::data::SynthConfig;
use dmdsc_core::net::{Activation, NetConfig};
use dmdsc_core::train::{MarginMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::fsutil::read_to_string;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed. Run `r` of a sweep uses `seed + r` for data, init and
    /// shuffling.
    pub seed: u64,
    /// Known/unknown class splits evaluated per run.
    pub trials: usize,
    /// Seeds averaged per sweep cell.
    pub runs: usize,
    pub out: PathBuf,
    pub data: DataSection,
    pub net: NetSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub num_known: usize,
    pub num_unknown: usize,
    pub input_dim: usize,
    pub majority: usize,
    pub imbalance_ratio: f64,
    pub cluster_std: f64,
    pub center_separation: f64,
    pub bg_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden_dims: Vec<usize>,
    /// Defaults to the number of known classes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size_known: usize,
    pub batch_size_bg: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub lambda_inter: f64,
    pub lambda_bg: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub radius: f64,
    pub eval_every: usize,
    pub margin_mode: String,
    pub square_margins: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1,
            runs: 5,
            out: PathBuf::from("dmdsc-out"),
            data: DataSection::default(),
            net: NetSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            num_known: s.num_known,
            num_unknown: s.num_unknown,
            input_dim: s.input_dim,
            majority: s.majority,
            imbalance_ratio: s.imbalance_ratio,
            cluster_std: s.cluster_std,
            center_separation: s.center_separation,
            bg_samples: s.bg_samples,
        }
    }
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            hidden_dims: vec![64, 64],
            embed_dim: None,
            activation: Activation::default().name().to_string(),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size_known: t.batch_size_known,
            batch_size_bg: t.batch_size_bg,
            learning_rate: t.learning_rate,
            rms_decay: t.rms_decay,
            rms_epsilon: t.rms_epsilon,
            lambda_inter: t.lambda_inter,
            lambda_bg: t.lambda_bg,
            m_min: t.m_min,
            m_max: t.m_max,
            radius: t.radius,
            eval_every: t.eval_every,
            margin_mode: t.margin_mode.name().to_string(),
            square_margins: t.square_margins,
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Defaults, or defaults overlaid with `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn synth_config(&self, seed: u64) -> SynthConfig {
        let d = &self.data;
        SynthConfig {
            num_known: d.num_known,
            num_unknown: d.num_unknown,
            input_dim: d.input_dim,
            majority: d.majority,
            imbalance_ratio: d.imbalance_ratio,
            cluster_std: d.cluster_std,
            center_separation: d.center_separation,
            bg_samples: d.bg_samples,
            seed,
        }
    }

    pub fn activation(&self) -> Result<Activation> {
        Activation::parse(&self.net.activation)
            .ok_or_else(|| Error::Config(format!("unknown activation {:?} (use relu or tanh)", self.net.activation)))
    }

    pub fn margin_mode(&self) -> Result<MarginMode> {
        MarginMode::parse(&self.train.margin_mode).ok_or_else(|| {
            Error::Config(format!(
                "unknown margin mode {:?} (use dynamic or uniform)",
                self.train.margin_mode
            ))
        })
    }

    /// Network for data of dimension `input_dim` with `num_classes` known
    /// classes.
    pub fn net_config(&self, input_dim: usize, num_classes: usize, seed: u64) -> Result<NetConfig> {
        Ok(NetConfig {
            input_dim,
            hidden_dims: self.net.hidden_dims.clone(),
            embed_dim: self.net.embed_dim.unwrap_or(num_classes),
            activation: self.activation()?,
            seed,
        })
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            epochs: t.epochs,
            batch_size_known: t.batch_size_known,
            batch_size_bg: t.batch_size_bg,
            learning_rate: t.learning_rate,
            rms_decay: t.rms_decay,
            rms_epsilon: t.rms_epsilon,
            lambda_inter: t.lambda_inter,
            lambda_bg: t.lambda_bg,
            m_min: t.m_min,
            m_max: t.m_max,
            radius: t.radius,
            seed,
            eval_every: t.eval_every,
            margin_mode: self.margin_mode()?,
            square_margins: t.square_margins,
        })
    }

    /// Checks everything up front so no work starts on a bad config.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.runs == 0 {
            return Err(Error::Config("trials and runs must be at least 1".into()));
        }
        self.synth_config(self.seed).validate()?;
        self.train_config(self.seed)?.validate()?;
        let c = self.data.num_known;
        let net = self.net_config(self.data.input_dim, c, self.seed)?;
        net.validate()?;
        if net.embed_dim + 1 < c {
            return Err(dmdsc_core::Error::DimensionTooSmall {
                embed_dim: net.embed_dim,
                num_classes: c,
            }
            .into());
        }
        Ok(())
    }
}
