//! JSON model checkpoints.
//!
//! Layout (version 1):
//!
//! ```json
//! {
//!   "format": "itl-ae-checkpoint",
//!   "version": 1,
//!   "epoch": 199,
//!   "prior": { "kind": "gaussian", "dim": 2, "location": 0.0, "scale": 1.0, "turns": 1.5, "noise_std": 0.05 },
//!   "encoder": [ { "in_dim": 2, "out_dim": 32, "activation": "relu",
//!                  "weights": [/* out_dim * in_dim values, row-major */],
//!                  "bias": [/* out_dim values */] }, ... ],
//!   "decoder": [ ... ]
//! }
//! ```
//!
//! `epoch` and `prior` are optional. Numbers are written in shortest
//! round-trip form and parsed exactly, so save followed by load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, LayerSpec, NetworkParams};
use crate::numerics::Matrix;
use crate::priors::PriorSpec;
use crate::trainer::Autoencoder;

pub const FORMAT: &str = "itl-ae-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<PriorSpec>,
    encoder: Vec<LayerRecord>,
    decoder: Vec<LayerRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Autoencoder,
    /// Prior the encoder was trained against.
    pub prior: Option<PriorSpec>,
    pub epoch: Option<usize>,
}

fn to_records(p: &NetworkParams) -> Vec<LayerRecord> {
    p.layers()
        .iter()
        .map(|l| LayerRecord {
            in_dim: l.spec.in_dim,
            out_dim: l.spec.out_dim,
            activation: l.spec.activation,
            weights: l.weights.as_slice().to_vec(),
            bias: l.bias.clone(),
        })
        .collect()
}

fn from_records(records: Vec<LayerRecord>) -> Result<NetworkParams> {
    let layers = records
        .into_iter()
        .map(|r| {
            Ok(Layer {
                spec: LayerSpec::new(r.in_dim, r.out_dim, r.activation),
                weights: Matrix::new(r.out_dim, r.in_dim, r.weights)?,
                bias: r.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkParams::from_layers(layers)
}

impl Checkpoint {
    pub fn new(model: Autoencoder) -> Self {
        Self {
            model,
            prior: None,
            epoch: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: FORMAT.to_string(),
            version: VERSION,
            epoch: self.epoch,
            prior: self.prior,
            encoder: to_records(&self.model.encoder),
            decoder: to_records(&self.model.decoder),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::invalid(
                "checkpoint",
                format!("unknown format {:?}", file.format),
            ));
        }
        if file.version != VERSION {
            return Err(Error::invalid(
                "checkpoint",
                format!("unsupported version {}", file.version),
            ));
        }
        let model = Autoencoder {
            encoder: from_records(file.encoder)?,
            decoder: from_records(file.decoder)?,
        };
        model.architecture().validate()?;
        if let Some(p) = &file.prior {
            p.validate()?;
        }
        Ok(Self {
            model,
            prior: file.prior,
            epoch: file.epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Format {
                path: path.to_path_buf(),
                reason: j.to_string(),
            },
            other => other,
        })
    }
}
