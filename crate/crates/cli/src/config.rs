//! Flat `key = value` experiment configuration and the bundled presets.
//!
//! Keys are matched case-insensitively, so `n_Filters` and `n_filters` name
//! the same field. Unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use apnea_core::dataset::SplitFractions;
use apnea_core::nn::ModelConfig;

use crate::error::CliError;

pub const DATA_DIR_ENV: &str = "APNEA_ECG_DIR";

pub const PRESET_NAMES: [&str; 6] = ["w500", "w1000", "w1500", "w2000", "w2500", "smoke"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Windowed dataset containers built from the Apnea-ECG records.
    ApneaEcg,
    /// Seeded synthetic rows generated in memory.
    Synthetic { rows_per_class: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub data_directory: Option<PathBuf>,
    pub records_manifest: Option<PathBuf>,
    pub dataset_directory: PathBuf,
    pub output_directory: Option<PathBuf>,
    pub source: DataSource,
    pub split: SplitFractions,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "w500".into(),
            data_directory: None,
            records_manifest: None,
            dataset_directory: PathBuf::from("datasets"),
            output_directory: None,
            source: DataSource::ApneaEcg,
            split: SplitFractions::default(),
            model: ModelConfig::default(),
        }
    }
}

/// `(window, filters, kernel, batch, epochs)` of each published experiment.
const TABLE_PRESETS: [(&str, usize, usize, usize, usize, usize); 5] = [
    ("w500", 500, 150, 150, 8192, 50),
    ("w1000", 1000, 250, 250, 4096, 50),
    ("w1500", 1500, 100, 1000, 4096, 50),
    ("w2000", 2000, 100, 500, 4096, 50),
    ("w2500", 2500, 100, 800, 4096, 50),
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    if name == "smoke" {
        return Some(ExperimentConfig {
            name: "smoke".into(),
            source: DataSource::Synthetic { rows_per_class: 100 },
            model: ModelConfig {
                window_size: 64,
                n_filters: 4,
                kernel_size: 9,
                hidden_units: 8,
                batch_size: 16,
                epochs: 40,
                learning_rate: 0.01,
                ..ModelConfig::default()
            },
            ..ExperimentConfig::default()
        });
    }
    let &(name, window_size, n_filters, kernel_size, batch_size, epochs) =
        TABLE_PRESETS.iter().find(|p| p.0 == name)?;
    Some(ExperimentConfig {
        name: name.into(),
        model: ModelConfig {
            window_size,
            n_filters,
            kernel_size,
            batch_size,
            epochs,
            ..ModelConfig::default()
        },
        ..ExperimentConfig::default()
    })
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

impl ExperimentConfig {
    /// Parses a configuration on top of the defaults, or on top of the
    /// preset named by a leading `preset = ...` line.
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(CliError::Config(format!("line {}: key {key} given twice", n + 1)));
            }
            if key == "preset" {
                if !seen.is_empty() {
                    return Err(CliError::Config("preset must be the first key".into()));
                }
                cfg = preset(value).ok_or_else(|| CliError::Config(format!("unknown preset {value:?}")))?;
            } else {
                cfg.set(&key, value)
                    .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
            }
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let m = &mut self.model;
        match key {
            "name" => self.name = v.to_string(),
            "data_directory" => self.data_directory = opt_path(v),
            "records_manifest" => self.records_manifest = opt_path(v),
            "dataset_directory" => self.dataset_directory = PathBuf::from(v),
            "output_directory" => self.output_directory = opt_path(v),
            "dataset_source" => {
                self.source = match v {
                    "apnea-ecg" => DataSource::ApneaEcg,
                    "synthetic" => DataSource::Synthetic {
                        rows_per_class: match self.source {
                            DataSource::Synthetic { rows_per_class } => rows_per_class,
                            DataSource::ApneaEcg => 100,
                        },
                    },
                    _ => return Err(CliError::Config(format!("dataset_source must be apnea-ecg or synthetic, got {v:?}"))),
                }
            }
            "synthetic_rows_per_class" => {
                self.source = DataSource::Synthetic {
                    rows_per_class: parse_num(key, v)?,
                }
            }
            "window_size" => m.window_size = parse_num(key, v)?,
            "n_filters" => m.n_filters = parse_num(key, v)?,
            "k_size" => m.kernel_size = parse_num(key, v)?,
            "pool_size" => m.pool_size = parse_num(key, v)?,
            "pool_stride" => m.pool_stride = parse_num(key, v)?,
            "hidden_units" => m.hidden_units = parse_num(key, v)?,
            "batch_size" => m.batch_size = parse_num(key, v)?,
            "epochs" => m.epochs = parse_num(key, v)?,
            "learning_rate" => m.learning_rate = parse_num(key, v)?,
            "adam_beta1" => m.adam_beta1 = parse_num(key, v)?,
            "adam_beta2" => m.adam_beta2 = parse_num(key, v)?,
            "adam_epsilon" => m.adam_epsilon = parse_num(key, v)?,
            "dropout" => m.dropout = parse_num(key, v)?,
            "conv_relu" => m.conv_relu = parse_bool(key, v)?,
            "early_stopping_patience" => {
                m.early_stopping_patience = match v {
                    "none" => None,
                    _ => Some(parse_num(key, v)?),
                }
            }
            "seed" => m.seed = parse_num(key, v)?,
            "train_fraction" => self.split.train = parse_num(key, v)?,
            "test_fraction" => self.split.test = parse_num(key, v)?,
            "validation_fraction" => self.split.validation = parse_num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        self.split.validate()?;
        if let DataSource::Synthetic { rows_per_class: 0 } = self.source {
            return Err(CliError::Config("synthetic_rows_per_class must be at least 1".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.model.seed
    }

    /// Every field, in a form [`ExperimentConfig::parse`] reads back to an
    /// equal value.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let m = &self.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("data_directory", path(&self.data_directory));
        kv("records_manifest", path(&self.records_manifest));
        kv("dataset_directory", self.dataset_directory.display().to_string());
        kv("output_directory", path(&self.output_directory));
        match self.source {
            DataSource::ApneaEcg => kv("dataset_source", "apnea-ecg".into()),
            DataSource::Synthetic { rows_per_class } => {
                kv("dataset_source", "synthetic".into());
                kv("synthetic_rows_per_class", rows_per_class.to_string());
            }
        }
        kv("window_size", m.window_size.to_string());
        kv("n_filters", m.n_filters.to_string());
        kv("k_size", m.kernel_size.to_string());
        kv("pool_size", m.pool_size.to_string());
        kv("pool_stride", m.pool_stride.to_string());
        kv("hidden_units", m.hidden_units.to_string());
        kv("batch_size", m.batch_size.to_string());
        kv("epochs", m.epochs.to_string());
        kv("learning_rate", format!("{:?}", m.learning_rate));
        kv("adam_beta1", format!("{:?}", m.adam_beta1));
        kv("adam_beta2", format!("{:?}", m.adam_beta2));
        kv("adam_epsilon", format!("{:?}", m.adam_epsilon));
        kv("dropout", format!("{:?}", m.dropout));
        kv("conv_relu", m.conv_relu.to_string());
        kv(
            "early_stopping_patience",
            m.early_stopping_patience.map_or("none".into(), |p| p.to_string()),
        );
        kv("seed", m.seed.to_string());
        kv("train_fraction", format!("{:?}", self.split.train));
        kv("test_fraction", format!("{:?}", self.split.test));
        kv("validation_fraction", format!("{:?}", self.split.validation));
        s
    }

    /// Data directory from the configuration, else from `APNEA_ECG_DIR`.
    pub fn resolve_data_directory(&self) -> Result<PathBuf, CliError> {
        if let Some(d) = &self.data_directory {
            return Ok(d.clone());
        }
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config(format!("no data directory: pass --data-dir or set {DATA_DIR_ENV}")))
    }

    pub fn dataset_path(&self, window: usize) -> PathBuf {
        self.dataset_directory.join(format!("w{window}.osaw"))
    }

    pub fn run_directory(&self) -> PathBuf {
        self.output_directory
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }
}
