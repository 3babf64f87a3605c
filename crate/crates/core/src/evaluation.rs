//! Parzen-window log-likelihood benchmark for generative decoders.
//!
//! Samples are generated by decoding prior draws, a Gaussian Parzen model is
//! fitted on them in data space, its kernel size is picked on validation data,
//! and the mean test log-likelihood (nats) is reported. Densities are computed
//! entirely in the log domain so 784-dimensional inputs do not underflow.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{KernelWidth, SampleBatch};
use crate::network::NetworkParams;
use crate::numerics::{log_sum_exp, pairwise_sq_dists, Rng};
use crate::priors::{sample_prior, PriorSpec};

const CHUNK_ROWS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub mean_log_likelihood: f64,
    pub std_error: f64,
    pub sigma: f64,
    pub n_generated: usize,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSelection {
    pub sigma: f64,
    /// `(sigma, mean validation log-likelihood)` in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Decodes `n` draws from `prior`.
pub fn generate(
    decoder: &NetworkParams,
    prior: &PriorSpec,
    n: usize,
    rng: &mut Rng,
) -> Result<SampleBatch> {
    if prior.dim != decoder.input_dim() {
        return Err(Error::invalid(
            "prior dim",
            format!(
                "prior has dim {} but decoder expects {}",
                prior.dim,
                decoder.input_dim()
            ),
        ));
    }
    let z = sample_prior(prior, n, rng)?;
    SampleBatch::new(decoder.apply(z.matrix())?)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("sigma grid"));
    }
    for &s in grid {
        KernelWidth::new(s)?;
    }
    Ok(())
}

/// Log Parzen density of every test row, for each kernel size in `sigmas`.
/// Result is indexed `[sigma][test row]`.
pub fn parzen_log_densities(
    test: &SampleBatch,
    generated: &SampleBatch,
    sigmas: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if test.dim() != generated.dim() {
        return Err(Error::ShapeMismatch {
            op: "parzen_log_likelihood",
            left: test.matrix().shape(),
            right: generated.matrix().shape(),
        });
    }
    check_grid(sigmas)?;
    let d = test.dim() as f64;
    let log_n = (generated.len() as f64).ln();
    let consts: Vec<f64> = sigmas
        .iter()
        .map(|s| -log_n - 0.5 * d * (2.0 * PI).ln() - d * s.ln())
        .collect();

    let rows: Vec<usize> = (0..test.len()).collect();
    let chunks: Vec<Vec<Vec<f64>>> = rows
        .par_chunks(CHUNK_ROWS)
        .map(|idx| -> Result<Vec<Vec<f64>>> {
            let block = test.matrix().select_rows(idx);
            let dists = pairwise_sq_dists(&block, generated.matrix())?;
            let mut per_sigma = vec![Vec::with_capacity(idx.len()); sigmas.len()];
            let mut scratch = vec![0.0; generated.len()];
            for r in 0..idx.len() {
                let row = dists.row(r);
                for ((s, c), out) in sigmas.iter().zip(&consts).zip(per_sigma.iter_mut()) {
                    let inv = 1.0 / (2.0 * s * s);
                    for (t, &dd) in scratch.iter_mut().zip(row) {
                        *t = -dd * inv;
                    }
                    out.push(log_sum_exp(&scratch)? + c);
                }
            }
            Ok(per_sigma)
        })
        .collect::<Result<_>>()?;

    let mut out = vec![Vec::with_capacity(test.len()); sigmas.len()];
    for chunk in chunks {
        for (o, c) in out.iter_mut().zip(chunk) {
            o.extend(c);
        }
    }
    Ok(out)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean log-likelihood of `test` under a Parzen model fitted on `generated`.
pub fn parzen_log_likelihood(
    test: &SampleBatch,
    generated: &SampleBatch,
    w: KernelWidth,
) -> Result<LikelihoodReport> {
    let ll = parzen_log_densities(test, generated, &[w.sigma()])?;
    let (mean, se) = mean_and_se(&ll[0]);
    Ok(LikelihoodReport {
        mean_log_likelihood: mean,
        std_error: se,
        sigma: w.sigma(),
        n_generated: generated.len(),
        n_test: test.len(),
    })
}

/// Kernel size from `grid` maximising mean validation log-likelihood. Ties go
/// to the smaller kernel.
pub fn select_sigma(
    validation: &SampleBatch,
    generated: &SampleBatch,
    grid: &[f64],
) -> Result<SigmaSelection> {
    let ll = parzen_log_densities(validation, generated, grid)?;
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .zip(&ll)
        .map(|(&s, v)| (s, mean_and_se(v).0))
        .collect();
    let mut best = curve[0];
    for &(s, m) in &curve[1..] {
        if m > best.1 || (m == best.1 && s < best.0) {
            best = (s, m);
        }
    }
    Ok(SigmaSelection {
        sigma: best.0,
        curve,
    })
}

/// `n` points spaced evenly in log scale over `[lo, hi]`.
pub fn log_spaced_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::invalid(
            "sigma grid",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    match n {
        0 => Err(Error::Empty("sigma grid")),
        1 => Ok(vec![lo]),
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            Ok((0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect())
        }
    }
}

/// Silverman's rule-of-thumb kernel size, averaged over coordinates:
/// `(4 / (d + 2))^(1 / (d + 4)) * n^(-1 / (d + 4)) * mean_std`.
/// A starting point for a grid, never applied automatically.
pub fn silverman_sigma(batch: &SampleBatch) -> f64 {
    let n = batch.len() as f64;
    let d = batch.dim() as f64;
    let m = batch.matrix();
    let mut std_sum = 0.0;
    for c in 0..batch.dim() {
        let col: Vec<f64> = m.row_iter().map(|r| r[c]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        std_sum += var.sqrt();
    }
    (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * n.powf(-1.0 / (d + 4.0)) * std_sum / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::parzen_pdf;
    use crate::network::{Activation, LayerSpec};
    use crate::numerics::normal_draws;

    fn w(s: f64) -> KernelWidth {
        KernelWidth::new(s).unwrap()
    }

    #[test]
    fn single_point_log_likelihood() {
        let g = SampleBatch::from_rows(&[[0.3]]).unwrap();
        let r = parzen_log_likelihood(&g, &g, w(1.0)).unwrap();
        assert!((r.mean_log_likelihood - (-0.5 * (2.0 * PI).ln())).abs() < 1e-12);
        assert!((r.mean_log_likelihood + 0.9189).abs() < 1e-4);
        assert_eq!((r.n_generated, r.n_test, r.std_error), (1, 1, 0.0));
    }

    #[test]
    fn duplicates_do_not_change_likelihood() {
        let g1 = SampleBatch::from_rows(&[[1.0, 2.0]]).unwrap();
        let g2 = SampleBatch::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        let t = SampleBatch::from_rows(&[[0.0, 0.5], [3.0, 1.0]]).unwrap();
        let a = parzen_log_likelihood(&t, &g1, w(0.7))
            .unwrap()
            .mean_log_likelihood;
        let b = parzen_log_likelihood(&t, &g2, w(0.7))
            .unwrap()
            .mean_log_likelihood;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn matches_linear_path_in_low_dimension() {
        let mut rng = Rng::new(77);
        for d in 1..=4 {
            let g = SampleBatch::new(normal_draws(&mut rng, 40, d, 0.0, 1.0).unwrap()).unwrap();
            let t = SampleBatch::new(normal_draws(&mut rng, 25, d, 0.0, 1.0).unwrap()).unwrap();
            let logs = parzen_log_densities(&t, &g, &[0.6]).unwrap();
            let lin = parzen_pdf(&t, &g, w(0.6)).unwrap();
            for (a, b) in logs[0].iter().zip(lin) {
                assert!((a - b.ln()).abs() <= 1e-10 * b.ln().abs().max(1.0));
            }
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = Rng::new(78);
        let g = normal_draws(&mut rng, 30, 3, 0.0, 1.0).unwrap();
        let t = normal_draws(&mut rng, 300, 3, 0.0, 1.0).unwrap();
        let mut gi: Vec<usize> = (0..30).collect();
        let mut ti: Vec<usize> = (0..300).collect();
        rng.shuffle(&mut gi);
        rng.shuffle(&mut ti);
        let a = parzen_log_likelihood(
            &SampleBatch::new(t.clone()).unwrap(),
            &SampleBatch::new(g.clone()).unwrap(),
            w(0.5),
        )
        .unwrap();
        let b = parzen_log_likelihood(
            &SampleBatch::new(t.select_rows(&ti)).unwrap(),
            &SampleBatch::new(g.select_rows(&gi)).unwrap(),
            w(0.5),
        )
        .unwrap();
        assert!((a.mean_log_likelihood - b.mean_log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn generate_with_identity_decoder_returns_prior_draws() {
        let mut dec = NetworkParams::zeros(&[LayerSpec::new(2, 2, Activation::Identity)]).unwrap();
        dec.layers_mut()[0].weights = crate::numerics::Matrix::identity(2);
        let prior = PriorSpec::gaussian(2, 5.0);
        let out = generate(&dec, &prior, 50, &mut Rng::new(4)).unwrap();
        let direct = sample_prior(&prior, 50, &mut Rng::new(4)).unwrap();
        assert_eq!(out, direct);
        let again = generate(&dec, &prior, 50, &mut Rng::new(4)).unwrap();
        assert_eq!(out, again);
        assert!(generate(&dec, &PriorSpec::gaussian(3, 1.0), 5, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn select_sigma_cases() {
        let g = SampleBatch::from_rows(&[[0.0], [1.0], [2.5]]).unwrap();
        let sel = select_sigma(&g, &g, &[1.0, 0.1]).unwrap();
        assert_eq!(sel.sigma, 0.1);
        assert_eq!(sel.curve.len(), 2);
        assert_eq!(select_sigma(&g, &g, &[0.4]).unwrap().sigma, 0.4);
        assert!(select_sigma(&g, &g, &[]).is_err());
        assert!(select_sigma(&g, &g, &[0.1, -1.0]).is_err());
    }

    #[test]
    fn ties_prefer_smaller_sigma() {
        let g = SampleBatch::from_rows(&[[0.0]]).unwrap();
        let sel = select_sigma(&g, &g, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(sel.sigma, 0.5);
    }

    #[test]
    fn grid_and_silverman() {
        let g = log_spaced_grid(0.05, 1.0, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[19] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|p| p[1] > p[0]));
        assert!(log_spaced_grid(0.0, 1.0, 3).is_err());

        let b =
            SampleBatch::new(normal_draws(&mut Rng::new(1), 1000, 1, 0.0, 1.0).unwrap()).unwrap();
        let s = silverman_sigma(&b);
        // 1.06 * n^(-1/5) for unit variance
        assert!((s / (1.06 * 1000f64.powf(-0.2)) - 1.0).abs() < 0.1, "{s}");
    }
}
