//! Run configuration: defaults, a flat `key = value` file format, and
//! command-line overrides. Later sources win: flag > file > default.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcc_core::dataio::MatrixFormat;
use dcc_core::dccopt::DccConfig;
use dcc_core::graph::Metric;
use dcc_core::nncore::{AdamConfig, AdamMomentum, Architecture};
use dcc_core::robust::Objective;
use dcc_core::sdae::PretrainConfig;
use dcc_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dcc,
    Rcc,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dcc" => Ok(Mode::Dcc),
            "rcc" => Ok(Mode::Rcc),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}' (expected dcc or rcc)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dcc => "dcc",
            Mode::Rcc => "rcc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// `None` infers the format from the file extension.
    pub format: Option<MatrixFormat>,
    pub labels: Option<PathBuf>,
    /// Rescale every feature to `[0, 1]` on load.
    pub normalize: bool,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub metric: Metric,
    pub continuation_period: usize,
    pub edges_per_batch: usize,
    pub adam_lr: f64,
    pub adam_momentum: f64,
    pub momentum_as: AdamMomentum,
    pub epoch_cap: usize,
    pub stop_fraction: f64,
    pub pretrain: PretrainConfig,
    pub seed: u64,
    pub mode: Mode,
    pub out: PathBuf,
    /// Reuse an existing graph file instead of building one.
    pub graph: Option<PathBuf>,
    /// Reuse a pretrained autoencoder instead of pretraining.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dcc = DccConfig::default();
        Self {
            data: None,
            format: None,
            labels: None,
            normalize: true,
            embed_dim: 10,
            hidden: vec![500, 500, 2000],
            k: 10,
            metric: Metric::Cosine,
            continuation_period: dcc.continuation_period,
            edges_per_batch: dcc.edges_per_batch,
            adam_lr: dcc.adam.lr,
            adam_momentum: dcc.adam.beta1,
            momentum_as: AdamMomentum::Beta1,
            epoch_cap: dcc.epoch_cap,
            stop_fraction: dcc.stop_fraction,
            pretrain: PretrainConfig::default(),
            seed: 0,
            mode: Mode::Dcc,
            out: PathBuf::from("dcc-out"),
            graph: None,
            checkpoint: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("bad value '{value}' for '{key}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad value '{value}' for '{key}': expected true or false"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "format" => self.format = Some(value.parse()?),
            "labels" => self.labels = Some(PathBuf::from(value)),
            "normalize" => self.normalize = parse_bool(key, value)?,
            "d" | "embed_dim" => self.embed_dim = parse_value(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|w| parse_value(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?;
            }
            "k" => self.k = parse_value(key, value)?,
            "metric" => self.metric = value.parse()?,
            "continuation_period" | "m" => self.continuation_period = parse_value(key, value)?,
            "edges_per_batch" => self.edges_per_batch = parse_value(key, value)?,
            "lr" => self.adam_lr = parse_value(key, value)?,
            "momentum" => self.adam_momentum = parse_value(key, value)?,
            "momentum_as" => {
                self.momentum_as = match value {
                    "beta1" => AdamMomentum::Beta1,
                    "beta2" => AdamMomentum::Beta2,
                    other => return Err(Error::InvalidConfig(format!("unknown momentum reading '{other}'"))),
                }
            }
            "epoch_cap" => self.epoch_cap = parse_value(key, value)?,
            "stop_fraction" => self.stop_fraction = parse_value(key, value)?,
            "pretrain_epochs" => self.pretrain.per_layer_epochs = parse_value(key, value)?,
            "finetune_epochs" => self.pretrain.finetune_epochs = parse_value(key, value)?,
            "pretrain_batch" => self.pretrain.minibatch_size = parse_value(key, value)?,
            "dropout" => self.pretrain.dropout = parse_value(key, value)?,
            "pretrain_lr" => self.pretrain.sgd.base_lr = parse_value(key, value)?,
            "scale_pretrain_lr" => self.pretrain.scale_lr_by_dim = parse_bool(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "mode" => self.mode = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "graph" => self.graph = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            other => return Err(Error::InvalidConfig(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str, location: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: format!("{location}:{}", no + 1),
                message: format!("expected key = value, got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.k == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("d, k and hidden widths must be positive".into()));
        }
        self.dcc_config().validate()?;
        self.pretrain_config().validate()
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no data path given (use --data)".into()))
    }

    pub fn architecture(&self, input_dim: usize) -> Result<Architecture> {
        let mut widths = vec![input_dim];
        widths.extend(&self.hidden);
        widths.push(self.embed_dim);
        Architecture::new(widths)
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            seed: self.seed,
            ..self.pretrain
        }
    }

    pub fn dcc_config(&self) -> DccConfig {
        DccConfig {
            continuation_period: self.continuation_period,
            edges_per_batch: self.edges_per_batch,
            adam: AdamConfig::with_momentum(self.adam_lr, self.adam_momentum, self.momentum_as),
            epoch_cap: self.epoch_cap,
            stop_fraction: self.stop_fraction,
            objective: match self.mode {
                Mode::Dcc => Objective::Dcc,
                Mode::Rcc => Objective::Rcc,
            },
            seed: self.seed,
            ..DccConfig::default()
        }
    }
}
