//! Flat TOML run configuration for `itl-ae train`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use itl_ae::data_io::{
    load_idx_dataset, make_synthetic, read_csv_samples, DatasetHandle, SYNTHETIC_NAMES,
};
use itl_ae::network::mlp_specs;
use itl_ae::trainer::streams;
use itl_ae::{
    Activation, Architecture, DivergenceKind, KernelWidth, OptimizerConfig, PriorKind, PriorSpec,
    Rng, TrainConfig,
};

use crate::CliError;

/// RNG stream used for synthetic data generation, next to the trainer's streams.
const DATA_STREAM: u64 = streams::PRIOR + 1;

fn default_dataset() -> String {
    "ring8".into()
}
fn default_n_samples() -> usize {
    2048
}
fn default_data_noise() -> f64 {
    0.2
}
fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_latent_dim() -> usize {
    2
}
fn default_relu() -> String {
    "relu".into()
}
fn default_identity() -> String {
    "identity".into()
}
fn default_one() -> f64 {
    1.0
}
fn default_divergence() -> String {
    "euclidean".into()
}
fn default_prior() -> String {
    "gaussian".into()
}
fn default_turns() -> f64 {
    PriorSpec::DEFAULT_TURNS
}
fn default_prior_noise() -> f64 {
    PriorSpec::DEFAULT_NOISE_STD
}
fn default_batch_size() -> usize {
    64
}
fn default_epochs() -> usize {
    100
}
fn default_optimizer() -> String {
    "adam".into()
}
fn default_lr() -> f64 {
    1e-3
}
fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_data_noise")]
    pub data_noise: f64,

    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_relu")]
    pub hidden_activation: String,
    #[serde(default = "default_identity")]
    pub latent_activation: String,
    #[serde(default = "default_identity")]
    pub output_activation: String,

    #[serde(default = "default_one")]
    pub lambda: f64,
    #[serde(default = "default_divergence")]
    pub divergence: String,
    #[serde(default = "default_one")]
    pub sigma: f64,

    #[serde(default = "default_prior")]
    pub prior: String,
    #[serde(default)]
    pub prior_location: f64,
    /// Defaults to 5 for Gaussian and 1 otherwise.
    #[serde(default)]
    pub prior_scale: Option<f64>,
    #[serde(default = "default_turns")]
    pub prior_turns: f64,
    #[serde(default = "default_prior_noise")]
    pub prior_noise_std: f64,

    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Defaults to `batch_size`.
    #[serde(default)]
    pub prior_batch_size: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,

    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write a checkpoint every this many epochs; 0 keeps only the final model.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// When false the `seconds` metric is written as 0 so reruns are byte-identical.
    #[serde(default = "default_true")]
    pub record_seconds: bool,
}

/// Everything `train` needs, validated.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub train: TrainConfig,
    pub arch: Architecture,
    pub dataset: DatasetHandle,
    pub run_dir: PathBuf,
}

fn key_error(key: &str, err: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("config key `{key}`: {err}"))
}

fn parse_key<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| key_error(key, e))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, CliError> {
        let kind: PriorKind = parse_key("prior", &self.prior)?;
        let mut spec = PriorSpec::default_for(kind, self.latent_dim);
        spec.location = self.prior_location;
        if let Some(s) = self.prior_scale {
            spec.scale = s;
        }
        spec.turns = self.prior_turns;
        spec.noise_std = self.prior_noise_std;
        spec.validate().map_err(|e| key_error("prior", e))?;
        if spec.dim != self.latent_dim {
            return Err(key_error(
                "prior",
                format!(
                    "{} prior is {}-D but latent_dim = {}",
                    self.prior, spec.dim, self.latent_dim
                ),
            ));
        }
        Ok(spec)
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig, CliError> {
        let cfg = match self.optimizer.to_ascii_lowercase().as_str() {
            "adam" => OptimizerConfig::Adam {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            "sgd" => OptimizerConfig::Sgd {
                lr: self.lr,
                momentum: self.momentum,
            },
            other => {
                return Err(key_error(
                    "optimizer",
                    format!("unknown optimizer {other:?}, expected adam or sgd"),
                ))
            }
        };
        cfg.validate().map_err(|e| key_error("optimizer", e))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let sigma = KernelWidth::new(self.sigma).map_err(|e| key_error("sigma", e))?;
        let divergence: DivergenceKind = parse_key("divergence", &self.divergence)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(key_error(
                "lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if self.batch_size == 0 {
            return Err(key_error("batch_size", "must be at least 1"));
        }
        if self.prior_batch_size == Some(0) {
            return Err(key_error("prior_batch_size", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(key_error("epochs", "must be at least 1"));
        }
        let cfg = TrainConfig {
            lambda: self.lambda,
            divergence,
            sigma,
            prior: self.prior_spec()?,
            batch_size: self.batch_size,
            prior_batch_size: self.prior_batch_size.unwrap_or(self.batch_size),
            epochs: self.epochs,
            optimizer: self.optimizer_config()?,
            seed: self.seed,
        };
        cfg.validate()
            .map_err(|e| CliError::validation(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Encoder `data -> hidden... -> latent`, decoder mirrored.
    pub fn architecture(&self, data_dim: usize) -> Result<Architecture, CliError> {
        if self.latent_dim == 0 {
            return Err(key_error("latent_dim", "must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(key_error("hidden", "layer sizes must be at least 1"));
        }
        let hidden: Activation = parse_key("hidden_activation", &self.hidden_activation)?;
        let latent: Activation = parse_key("latent_activation", &self.latent_activation)?;
        let output: Activation = parse_key("output_activation", &self.output_activation)?;
        let mut enc_sizes = vec![data_dim];
        enc_sizes.extend(&self.hidden);
        enc_sizes.push(self.latent_dim);
        let dec_sizes: Vec<usize> = enc_sizes.iter().rev().copied().collect();
        let arch = Architecture {
            encoder: mlp_specs(&enc_sizes, hidden, latent),
            decoder: mlp_specs(&dec_sizes, hidden, output),
        };
        arch.validate().map_err(|e| key_error("hidden", e))?;
        Ok(arch)
    }

    pub fn load_dataset(&self) -> Result<DatasetHandle, CliError> {
        let need_path = || {
            self.data_path.as_deref().ok_or_else(|| {
                key_error(
                    "data_path",
                    format!("required when dataset = {:?}", self.dataset),
                )
            })
        };
        match self.dataset.as_str() {
            "csv" => {
                let batch =
                    read_csv_samples(need_path()?).map_err(|e| key_error("data_path", e))?;
                DatasetHandle::new(batch.into_matrix(), None).map_err(|e| key_error("data_path", e))
            }
            "idx" => load_idx_dataset(need_path()?, self.labels_path.as_deref())
                .map_err(|e| key_error("data_path", e)),
            name if SYNTHETIC_NAMES.contains(&name) => {
                if self.n_samples == 0 {
                    return Err(key_error("n_samples", "must be at least 1"));
                }
                let mut rng = Rng::with_stream(self.seed, DATA_STREAM);
                make_synthetic(name, self.n_samples, self.data_noise, &mut rng)
                    .map_err(|e| key_error("data_noise", e))
            }
            other => Err(key_error(
                "dataset",
                format!(
                    "unknown dataset {other:?}, expected csv, idx, {}",
                    SYNTHETIC_NAMES.join(", ")
                ),
            )),
        }
    }

    /// Short content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..6])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir
            .join(format!("run-{}-seed{}", self.hash(), self.seed))
    }

    /// Validates every key and loads the dataset without touching the output directory.
    pub fn resolve(self) -> Result<ResolvedRun, CliError> {
        let train = self.train_config()?;
        let dataset = self.load_dataset()?;
        if dataset.is_empty() {
            return Err(key_error("dataset", "no samples"));
        }
        let arch = self.architecture(dataset.dim())?;
        let run_dir = self.run_dir();
        Ok(ResolvedRun {
            config: self,
            train,
            arch,
            dataset,
            run_dir,
        })
    }
}
