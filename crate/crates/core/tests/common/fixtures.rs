//! Training fixtures: the ring8 setup and a plain autoencoder loop.

use itl_ae::data_io::make_synthetic;
use itl_ae::estimators::euclidean_divergence;
use itl_ae::estimators::{divergence, divergence_grad_x};
use itl_ae::network::{mlp_specs, mse_loss, Activation, ForwardTrace};
use itl_ae::optim::OptimizerState;
use itl_ae::priors::sample_prior;
use itl_ae::trainer::{objective, objective_gradients, streams, Architecture, Autoencoder};
use itl_ae::{
    DivergenceKind, KernelWidth, Matrix, NetworkParams, PriorSpec, Rng, SampleBatch, TrainConfig,
};

use super::{batch, Points};

pub const RING_SEED: u64 = 7;

pub fn ring8() -> Matrix {
    make_synthetic("ring8", 2048, 0.2, &mut Rng::new(RING_SEED))
        .unwrap()
        .data
}

pub fn ring_arch() -> Architecture {
    Architecture {
        encoder: mlp_specs(&[2, 32, 32, 2], Activation::Relu, Activation::Identity),
        decoder: mlp_specs(&[2, 32, 32, 2], Activation::Relu, Activation::Identity),
    }
}

pub fn ring_cfg(lambda: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        lambda,
        epochs,
        seed: RING_SEED,
        ..TrainConfig::new(PriorSpec::gaussian(2, 1.0))
    }
}

/// Full-data divergence of the codes against a fixed 2048-sample prior batch, and full-data MSE.
pub fn measure(model: &Autoencoder, data: &Matrix, cfg: &TrainConfig) -> (f64, f64) {
    let codes = SampleBatch::new(model.encode(data).unwrap()).unwrap();
    let prior = sample_prior(&cfg.prior, 2048, &mut Rng::new(99)).unwrap();
    let div = euclidean_divergence(&codes, &prior, cfg.sigma)
        .unwrap()
        .value;
    let (mse, _) = mse_loss(data, &model.reconstruct(data).unwrap()).unwrap();
    (div, mse)
}

pub fn params_bits(p: &NetworkParams) -> Vec<u64> {
    p.tensors().flatten().map(|v| v.to_bits()).collect()
}

pub fn small_relu_model(seed: u64) -> Autoencoder {
    let arch = Architecture {
        encoder: mlp_specs(&[3, 8, 2], Activation::Relu, Activation::Identity),
        decoder: mlp_specs(&[2, 8, 3], Activation::Relu, Activation::Identity),
    };
    Autoencoder::initial(&arch, seed).unwrap()
}

/// Smallest |pre-activation| over every ReLU unit for batch `x`.
pub fn closest_kink(model: &Autoencoder, x: &Matrix) -> f64 {
    let (codes, enc) = model.encoder.forward(x).unwrap();
    let (_, dec) = model.decoder.forward(&codes).unwrap();
    let first = |t: &ForwardTrace| t.pre_activations()[0].as_slice().to_vec();
    first(&enc)
        .into_iter()
        .chain(first(&dec))
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Plain autoencoder loop written against the network and optimiser APIs only.
pub fn plain_autoencoder(
    data: &Matrix,
    cfg: &TrainConfig,
    arch: &Architecture,
) -> (Autoencoder, Vec<f64>) {
    let mut model = Autoencoder::initial(arch, cfg.seed).unwrap();
    let mut enc_opt = OptimizerState::new(cfg.optimizer, &model.encoder);
    let mut dec_opt = OptimizerState::new(cfg.optimizer, &model.decoder);
    let mut shuffle = Rng::with_stream(cfg.seed, streams::SHUFFLE);
    let mut recon_history = Vec::new();
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.rows()).collect();
        shuffle.shuffle(&mut order);
        let mut recon = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let x = data.select_rows(idx);
            let (z, enc_trace) = model.encoder.forward(&x).unwrap();
            let (out, dec_trace) = model.decoder.forward(&z).unwrap();
            let (loss, g_out) = mse_loss(&x, &out).unwrap();
            let (dec_grads, g_z) = model.decoder.backward(&dec_trace, &g_out).unwrap();
            let (enc_grads, _) = model.encoder.backward(&enc_trace, &g_z).unwrap();
            enc_opt.apply(&mut model.encoder, &enc_grads).unwrap();
            dec_opt.apply(&mut model.decoder, &dec_grads).unwrap();
            recon += idx.len() as f64 * loss;
        }
        recon_history.push(recon / data.rows() as f64);
    }
    (model, recon_history)
}

/// Normwise relative error `max |analytic - fd| / max |fd|`; single near-zero
/// components would make a per-entry ratio meaningless.
fn normwise_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    diff / scale.max(1e-12)
}

/// `divergence_grad_x` against central differences with step `h`.
pub fn divergence_grad_rel(
    kind: DivergenceKind,
    x: &Points,
    y: &SampleBatch,
    w: KernelWidth,
    h: f64,
) -> f64 {
    let grad = divergence_grad_x(kind, &batch(x), y, w).unwrap();
    let f = |pts: &Points| divergence(kind, &batch(pts), y, w).unwrap().value;
    let mut numeric = Vec::new();
    for i in 0..x.len() {
        for j in 0..x[0].len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i][j] += h;
            minus[i][j] -= h;
            numeric.push((f(&plus) - f(&minus)) / (2.0 * h));
        }
    }
    normwise_rel(grad.as_slice(), &numeric)
}

/// Encoder-weight gradient of the full objective against central differences.
pub fn fused_grad_rel(
    model: &Autoencoder,
    x: &Matrix,
    prior: &SampleBatch,
    cfg: &TrainConfig,
    h: f64,
) -> f64 {
    let (_, enc_grads, _) = objective_gradients(model, x, prior, cfg).unwrap();
    let analytic: Vec<f64> = enc_grads.tensors().flatten().copied().collect();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|idx| {
            let eval = |delta: f64| {
                let mut m = model.clone();
                *m.encoder.tensors_mut().flatten().nth(idx).unwrap() += delta;
                objective(&m, x, prior, cfg).unwrap().cost
            };
            (eval(h) - eval(-h)) / (2.0 * h)
        })
        .collect();
    normwise_rel(&analytic, &numeric)
}

/// Up to `count` kink-free (model, batch, prior batch) draws for gradient checks.
pub fn fused_cases(
    kind: DivergenceKind,
    count: usize,
) -> Vec<(Autoencoder, Matrix, SampleBatch, TrainConfig)> {
    let mut cases = Vec::new();
    for seed in 0..200u64 {
        if cases.len() == count {
            break;
        }
        let model = small_relu_model(seed);
        let mut rng = Rng::with_stream(seed, 9);
        let x = itl_ae::numerics::normal_draws(&mut rng, 16, 3, 0.0, 1.0).unwrap();
        if closest_kink(&model, &x) < 1e-3 {
            continue;
        }
        let cfg = TrainConfig {
            lambda: 0.7,
            divergence: kind,
            sigma: KernelWidth::new(1.0).unwrap(),
            prior_batch_size: 16,
            ..TrainConfig::new(PriorSpec::gaussian(2, 1.0))
        };
        let prior = sample_prior(&cfg.prior, 16, &mut rng).unwrap();
        cases.push((model, x, prior, cfg));
    }
    cases
}
