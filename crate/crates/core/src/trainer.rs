//! Minibatch training of autoencoders whose latent codes are pushed toward a
//! prior by an ITL divergence.
//!
//! The per-batch objective is `mse(x, D(E(x))) + lambda * D(E(x), P)` where `P` is
//! a fresh batch drawn from the prior. The decoder only sees the reconstruction
//! path; the encoder receives the reconstruction gradient plus `lambda` times the
//! divergence gradient at the latent layer, in a single backward pass.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    divergence, divergence_with_grad, DivergenceKind, KernelWidth, SampleBatch,
};
use crate::network::{mse_loss, validate_chain, Gradients, LayerSpec, NetworkParams};
use crate::numerics::{Matrix, Rng};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::priors::{sample_prior, PriorSpec};

/// RNG stream ids derived from the master seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const PRIOR: u64 = 2;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub divergence: DivergenceKind,
    pub sigma: KernelWidth,
    pub prior: PriorSpec,
    pub batch_size: usize,
    pub prior_batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: Euclidean divergence, `sigma = 1`, `lambda = 1`,
    /// batches of 64 and Adam at `1e-3`.
    pub fn new(prior: PriorSpec) -> Self {
        Self {
            lambda: 1.0,
            divergence: DivergenceKind::Euclidean,
            sigma: KernelWidth::new(1.0).expect("positive"),
            prior,
            batch_size: 64,
            prior_batch_size: 64,
            epochs: 100,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.prior_batch_size == 0 {
            return Err(Error::invalid("prior_batch_size", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        self.prior.validate()?;
        self.optimizer.validate()
    }

    /// Legal but questionable settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda > 0.0 && (self.batch_size < 2 || self.prior_batch_size < 2) {
            out.push("divergence estimates from single-sample batches are degenerate".to_string());
        }
        if self.prior.dim > 8 && self.batch_size < 256 {
            out.push(format!(
                "latent dimension {} with batch size {}: ITL estimates need larger batches in high dimension",
                self.prior.dim, self.batch_size
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl Architecture {
    pub fn data_dim(&self) -> usize {
        self.encoder[0].in_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].out_dim
    }

    pub fn validate(&self) -> Result<()> {
        validate_chain(&self.encoder)?;
        validate_chain(&self.decoder)?;
        let dec_in = self.decoder[0].in_dim;
        let dec_out = self.decoder[self.decoder.len() - 1].out_dim;
        if dec_in != self.latent_dim() {
            return Err(Error::invalid(
                "architecture",
                format!(
                    "encoder emits {} latent values but decoder expects {dec_in}",
                    self.latent_dim()
                ),
            ));
        }
        if dec_out != self.data_dim() {
            return Err(Error::invalid(
                "architecture",
                format!(
                    "decoder emits {dec_out} values but data has {}",
                    self.data_dim()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    pub encoder: NetworkParams,
    pub decoder: NetworkParams,
}

impl Autoencoder {
    /// Initialises the encoder, then the decoder, from one RNG.
    pub fn init(arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let encoder = NetworkParams::init(&arch.encoder, rng)?;
        let decoder = NetworkParams::init(&arch.decoder, rng)?;
        Ok(Self { encoder, decoder })
    }

    /// The model `train` starts from for this seed.
    pub fn initial(arch: &Architecture, seed: u64) -> Result<Self> {
        Self::init(arch, &mut Rng::with_stream(seed, streams::INIT))
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            encoder: self.encoder.specs(),
            decoder: self.decoder.specs(),
        }
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.apply(x)
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.decoder.apply(z)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub recon_loss: f64,
    pub divergence: f64,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub recon_loss: f64,
    pub divergence: f64,
    pub cost: f64,
    pub seconds: f64,
}

/// Optimiser state for both halves of an autoencoder.
#[derive(Clone, Debug)]
pub struct AutoencoderOptimizer {
    pub encoder: OptimizerState,
    pub decoder: OptimizerState,
}

impl AutoencoderOptimizer {
    pub fn new(config: OptimizerConfig, model: &Autoencoder) -> Self {
        Self {
            encoder: OptimizerState::new(config, &model.encoder),
            decoder: OptimizerState::new(config, &model.decoder),
        }
    }
}

fn ensure_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} ({v})")))
    }
}

fn ensure_finite_params(what: &str, p: &NetworkParams) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Gradients of the full objective for one batch against a given prior batch.
pub fn objective_gradients(
    model: &Autoencoder,
    x: &Matrix,
    prior_batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<(StepMetrics, Gradients, Gradients)> {
    let (codes, enc_trace) = model.encoder.forward(x)?;
    if !codes.is_finite() {
        return Err(Error::NonFinite("latent codes".into()));
    }
    let (recon, dec_trace) = model.decoder.forward(&codes)?;
    let (recon_loss, grad_recon) = mse_loss(x, &recon)?;
    ensure_finite("reconstruction loss", recon_loss)?;
    let (dec_grads, mut grad_codes) = model.decoder.backward(&dec_trace, &grad_recon)?;

    let codes = SampleBatch::new(codes)?;
    let div = if cfg.lambda != 0.0 {
        let (report, grad_div) =
            divergence_with_grad(cfg.divergence, &codes, prior_batch, cfg.sigma)?;
        if !grad_div.is_finite() {
            return Err(Error::NonFinite("divergence gradient".into()));
        }
        grad_codes.add_scaled(&grad_div, cfg.lambda)?;
        report.value
    } else {
        divergence(cfg.divergence, &codes, prior_batch, cfg.sigma)?.value
    };
    ensure_finite("divergence", div)?;

    let (enc_grads, _) = model.encoder.backward(&enc_trace, &grad_codes)?;
    ensure_finite_params("decoder gradient", &dec_grads)?;
    ensure_finite_params("encoder gradient", &enc_grads)?;

    let metrics = StepMetrics {
        recon_loss,
        divergence: div,
        cost: recon_loss + cfg.lambda * div,
    };
    Ok((metrics, enc_grads, dec_grads))
}

/// The scalar objective, for checking gradients.
pub fn objective(
    model: &Autoencoder,
    x: &Matrix,
    prior_batch: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<StepMetrics> {
    let codes = model.encode(x)?;
    let recon = model.decode(&codes)?;
    let (recon_loss, _) = mse_loss(x, &recon)?;
    let div = divergence(
        cfg.divergence,
        &SampleBatch::new(codes)?,
        prior_batch,
        cfg.sigma,
    )?
    .value;
    Ok(StepMetrics {
        recon_loss,
        divergence: div,
        cost: recon_loss + cfg.lambda * div,
    })
}

/// One optimiser update on batch `x`, drawing the prior batch from `prior_rng`.
///
/// The returned metrics describe the batch before the update.
pub fn train_step(
    model: &mut Autoencoder,
    opt: &mut AutoencoderOptimizer,
    x: &Matrix,
    cfg: &TrainConfig,
    prior_rng: &mut Rng,
) -> Result<StepMetrics> {
    let prior_batch = sample_prior(&cfg.prior, cfg.prior_batch_size, prior_rng)?;
    let (metrics, enc_grads, dec_grads) = objective_gradients(model, x, &prior_batch, cfg)?;
    opt.encoder.apply(&mut model.encoder, &enc_grads)?;
    opt.decoder.apply(&mut model.decoder, &dec_grads)?;
    ensure_finite_params("encoder parameters after update", &model.encoder)?;
    ensure_finite_params("decoder parameters after update", &model.decoder)?;
    Ok(metrics)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Autoencoder,
    pub metrics: Vec<EpochMetrics>,
}

/// Seed-determined minibatch order for every epoch. The last batch may be short.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn train(data: &Matrix, cfg: &TrainConfig, arch: &Architecture) -> Result<TrainOutcome> {
    train_with(data, cfg, arch, |_, _| Ok(()))
}

/// Runs `cfg.epochs` epochs, calling `on_epoch` after each with the epoch's
/// metrics and the current model.
pub fn train_with<F>(
    data: &Matrix,
    cfg: &TrainConfig,
    arch: &Architecture,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochMetrics, &Autoencoder) -> Result<()>,
{
    cfg.validate()?;
    arch.validate()?;
    if data.rows() == 0 {
        return Err(Error::Empty("training dataset"));
    }
    if data.cols() != arch.data_dim() {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: data.shape(),
            right: (arch.data_dim(), arch.latent_dim()),
        });
    }
    if cfg.prior.dim != arch.latent_dim() {
        return Err(Error::invalid(
            "prior dim",
            format!(
                "prior has dim {} but latent codes have dim {}",
                cfg.prior.dim,
                arch.latent_dim()
            ),
        ));
    }

    let mut model = Autoencoder::initial(arch, cfg.seed)?;
    let mut opt = AutoencoderOptimizer::new(cfg.optimizer, &model);
    let mut shuffle_rng = Rng::with_stream(cfg.seed, streams::SHUFFLE);
    let mut prior_rng = Rng::with_stream(cfg.seed, streams::PRIOR);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let (mut recon, mut div, mut cost) = (0.0, 0.0, 0.0);
        for batch in epoch_batches(data.rows(), cfg.batch_size, &mut shuffle_rng) {
            let x = data.select_rows(&batch);
            let m =
                train_step(&mut model, &mut opt, &x, cfg, &mut prior_rng).map_err(|e| match e {
                    Error::NonFinite(what) => Error::NonFinite(format!("{what} in epoch {epoch}")),
                    other => other,
                })?;
            let w = batch.len() as f64;
            recon += w * m.recon_loss;
            div += w * m.divergence;
            cost += w * m.cost;
        }
        let n = data.rows() as f64;
        let metrics = EpochMetrics {
            epoch,
            recon_loss: recon / n,
            divergence: div / n,
            cost: cost / n,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics, &model)?;
        history.push(metrics);
    }
    Ok(TrainOutcome {
        model,
        metrics: history,
    })
}
