//! Nonparametric ITL descriptors built from Gaussian Parzen windows.
//!
//! With samples `x_i` and kernel size `sigma`, the information potential is
//!
//! ```text
//! V(X)    = 1/N^2    sum_i sum_j G_{sigma*sqrt(2)}(x_i - x_j)
//! V(X, Y) = 1/(N M)  sum_i sum_j G_{sigma*sqrt(2)}(x_i - y_j)
//! ```
//!
//! where the inflated width comes from integrating the product of two
//! width-`sigma` windows. Quadratic Renyi entropy is `-log V(X)`, the
//! Euclidean divergence is `V(X) + V(Y) - 2 V(X, Y)` and the Cauchy-Schwarz
//! divergence is `log(V(X) V(Y) / V(X, Y)^2)`.
//!
//! The double sums include the `i == j` terms. All sums run in linear space,
//! which is adequate for the low-dimensional latent codes these are used on;
//! high-dimensional likelihoods live in [`crate::evaluation`].

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, pairwise_sq_dists, Matrix};

/// Parzen kernel size `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelWidth(f64);

impl KernelWidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self(sigma))
        } else {
            Err(Error::invalid(
                "sigma",
                format!("kernel size must be positive and finite, got {sigma}"),
            ))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }

    /// Width of the kernel obtained by convolving two windows of this size, `sigma * sqrt(2)`.
    pub fn inflated(self) -> Self {
        Self(self.0 * SQRT_2)
    }
}

impl TryFrom<f64> for KernelWidth {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KernelWidth> for f64 {
    fn from(w: KernelWidth) -> f64 {
        w.0
    }
}

/// A non-empty batch of finite `N x d` samples, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch(Matrix);

impl SampleBatch {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() == 0 {
            return Err(Error::Empty("sample batch has no rows"));
        }
        if m.cols() == 0 {
            return Err(Error::Empty("sample batch has zero dimension"));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("sample batch".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl AsRef<Matrix> for SampleBatch {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Euclidean,
    CauchySchwarz,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Euclidean => "euclidean",
            DivergenceKind::CauchySchwarz => "cauchy_schwarz",
        })
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "euclidean" | "ed" => Ok(DivergenceKind::Euclidean),
            "cauchy_schwarz" | "cs" => Ok(DivergenceKind::CauchySchwarz),
            other => Err(Error::invalid(
                "divergence",
                format!("unknown kind {other:?}, expected euclidean or cauchy_schwarz"),
            )),
        }
    }
}

/// A divergence value together with the three potentials it was built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub value: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub v_xy: f64,
}

impl DivergenceReport {
    fn from_potentials(kind: DivergenceKind, v_x: f64, v_y: f64, v_xy: f64) -> Self {
        let value = match kind {
            DivergenceKind::Euclidean => v_x + v_y - 2.0 * v_xy,
            DivergenceKind::CauchySchwarz => v_x.ln() + v_y.ln() - 2.0 * v_xy.ln(),
        };
        Self {
            value,
            v_x,
            v_y,
            v_xy,
        }
    }
}

fn check_dims(a: &SampleBatch, b: &SampleBatch, op: &'static str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op,
            left: a.matrix().shape(),
            right: b.matrix().shape(),
        });
    }
    Ok(())
}

/// Normalising constant `(2 pi)^(-d/2) sigma^(-d)` of a d-dimensional isotropic Gaussian.
fn gaussian_norm(d: usize, sigma: f64) -> f64 {
    (-(d as f64) * (0.5 * (2.0 * PI).ln() + sigma.ln())).exp()
}

/// Matrix of `G_sigma(a_i - b_j)`, the normalised isotropic Gaussian density.
pub fn gaussian_kernel_matrix(a: &SampleBatch, b: &SampleBatch, w: KernelWidth) -> Result<Matrix> {
    check_dims(a, b, "gaussian_kernel_matrix")?;
    let mut k = pairwise_sq_dists(a.matrix(), b.matrix())?;
    let sigma = w.sigma();
    let norm = gaussian_norm(a.dim(), sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    k.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = norm * (-*v * inv).exp());
    Ok(k)
}

/// Parzen window density estimate of `data` evaluated at each query row.
pub fn parzen_pdf(query: &SampleBatch, data: &SampleBatch, w: KernelWidth) -> Result<Vec<f64>> {
    let k = gaussian_kernel_matrix(query, data, w)?;
    let n = data.len() as f64;
    Ok(k.row_sums().into_iter().map(|s| s / n).collect())
}

const ROW_BLOCK: usize = 256;

/// Mean of `G_{sigma sqrt 2}(a_i - b_j)`, accumulated over row blocks of `a` so
/// large sets never hold the full kernel matrix. Sums are compensated because the
/// Euclidean divergence subtracts potentials of similar size.
fn mean_kernel(a: &SampleBatch, b: &SampleBatch, w: KernelWidth) -> Result<f64> {
    let starts: Vec<usize> = (0..a.len()).step_by(ROW_BLOCK).collect();
    let sums = starts
        .par_iter()
        .map(|&start| {
            let rows: Vec<usize> = (start..(start + ROW_BLOCK).min(a.len())).collect();
            let block = SampleBatch(a.matrix().select_rows(&rows));
            gaussian_kernel_matrix(&block, b, w.inflated())
                .map(|k| compensated_sum(k.as_slice().iter().copied()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(sums) / (a.len() * b.len()) as f64)
}

pub fn information_potential(x: &SampleBatch, w: KernelWidth) -> f64 {
    mean_kernel(x, x, w).expect("a batch always matches its own dimension")
}

pub fn cross_information_potential(
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<f64> {
    check_dims(x, y, "cross_information_potential")?;
    mean_kernel(x, y, w)
}

pub fn renyi_quadratic_entropy(x: &SampleBatch, w: KernelWidth) -> f64 {
    -information_potential(x, w).ln()
}

pub fn renyi_cross_entropy(x: &SampleBatch, y: &SampleBatch, w: KernelWidth) -> Result<f64> {
    Ok(-cross_information_potential(x, y, w)?.ln())
}

pub fn euclidean_divergence(
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<DivergenceReport> {
    divergence(DivergenceKind::Euclidean, x, y, w)
}

pub fn cauchy_schwarz_divergence(
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<DivergenceReport> {
    divergence(DivergenceKind::CauchySchwarz, x, y, w)
}

pub fn divergence(
    kind: DivergenceKind,
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<DivergenceReport> {
    check_dims(x, y, "divergence")?;
    let v_x = information_potential(x, w);
    let v_y = information_potential(y, w);
    let v_xy = mean_kernel(x, y, w)?;
    Ok(DivergenceReport::from_potentials(kind, v_x, v_y, v_xy))
}

/// Row k of the result is `sum_j K_kj (x_k - z_j)`.
fn weighted_offsets(k: &Matrix, x: &Matrix, z: &Matrix) -> Result<Matrix> {
    let kz = k.matmul(z)?;
    let sums = k.row_sums();
    let mut out = x.clone();
    for (i, s) in sums.iter().enumerate() {
        for (o, v) in out.row_mut(i).iter_mut().zip(kz.row(i)) {
            *o = *o * s - v;
        }
    }
    Ok(out)
}

/// Divergence value and its gradient with respect to every row of `x`, sharing
/// one pass over the kernel matrices.
///
/// With `s^2 = 2 sigma^2` and `dG_s(u)/du = -G_s(u) u / s^2`:
///
/// ```text
/// dV(X)/dx_k    = -2/(N^2 s^2) sum_j G(x_k - x_j)(x_k - x_j)
/// dV(X,Y)/dx_k  = -1/(N M s^2) sum_j G(x_k - y_j)(x_k - y_j)
/// ```
///
/// Euclidean: `dV(X) - 2 dV(X,Y)`. Cauchy-Schwarz: `dV(X)/V(X) - 2 dV(X,Y)/V(X,Y)`.
pub fn divergence_with_grad(
    kind: DivergenceKind,
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<(DivergenceReport, Matrix)> {
    check_dims(x, y, "divergence_grad_x")?;
    let s = w.inflated();
    let s2 = s.sigma() * s.sigma();
    let (n, m) = (x.len() as f64, y.len() as f64);

    let kxx = gaussian_kernel_matrix(x, x, s)?;
    let kxy = gaussian_kernel_matrix(x, y, s)?;
    let v_x = compensated_sum(kxx.as_slice().iter().copied()) / (n * n);
    let v_xy = compensated_sum(kxy.as_slice().iter().copied()) / (n * m);
    let v_y = information_potential(y, w);
    let report = DivergenceReport::from_potentials(kind, v_x, v_y, v_xy);

    let mut grad_vx = weighted_offsets(&kxx, x.matrix(), x.matrix())?;
    grad_vx.scale(-2.0 / (n * n * s2));
    let mut grad_vxy = weighted_offsets(&kxy, x.matrix(), y.matrix())?;
    grad_vxy.scale(-1.0 / (n * m * s2));

    let (a, b) = match kind {
        DivergenceKind::Euclidean => (1.0, -2.0),
        DivergenceKind::CauchySchwarz => (1.0 / v_x, -2.0 / v_xy),
    };
    grad_vx.scale(a);
    grad_vx.add_scaled(&grad_vxy, b)?;
    Ok((report, grad_vx))
}

/// Gradient of the chosen divergence with respect to each sample of `x`.
pub fn divergence_grad_x(
    kind: DivergenceKind,
    x: &SampleBatch,
    y: &SampleBatch,
    w: KernelWidth,
) -> Result<Matrix> {
    divergence_with_grad(kind, x, y, w).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{normal_draws, Rng};

    const G1_0: f64 = 0.398_942_280_401_432_7; // 1/sqrt(2 pi)

    fn batch(rows: &[&[f64]]) -> SampleBatch {
        SampleBatch::from_rows(rows).unwrap()
    }

    fn w(s: f64) -> KernelWidth {
        KernelWidth::new(s).unwrap()
    }

    fn random_batch(rng: &mut Rng, n: usize, d: usize) -> SampleBatch {
        SampleBatch::new(normal_draws(rng, n, d, 0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn kernel_width_validation() {
        assert!(KernelWidth::new(0.0).is_err());
        assert!(KernelWidth::new(-1.0).is_err());
        assert!(KernelWidth::new(f64::INFINITY).is_err());
        assert!((w(1.0).inflated().sigma() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn sample_batch_invariants() {
        assert!(SampleBatch::new(Matrix::zeros(0, 2)).is_err());
        assert!(SampleBatch::new(Matrix::zeros(2, 0)).is_err());
    }

    #[test]
    fn kernel_values() {
        let x = batch(&[&[0.0]]);
        let y = batch(&[&[1.0]]);
        let k = gaussian_kernel_matrix(&x, &x, w(1.0)).unwrap();
        assert!((k.get(0, 0) - G1_0).abs() < 1e-15);
        let k = gaussian_kernel_matrix(&x, &y, w(1.0)).unwrap();
        assert!((k.get(0, 0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        let p = batch(&[&[0.3, -0.2]]);
        let k = gaussian_kernel_matrix(&p, &p, w(2.0)).unwrap();
        assert!((k.get(0, 0) - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!(gaussian_kernel_matrix(&x, &p, w(1.0)).is_err());
    }

    #[test]
    fn parzen_pdf_values() {
        let d = batch(&[&[0.0]]);
        assert!((parzen_pdf(&d, &d, w(1.0)).unwrap()[0] - G1_0).abs() < 1e-15);
        let data = batch(&[&[0.0], &[1.0]]);
        let q = batch(&[&[0.5]]);
        let v = parzen_pdf(&q, &data, w(1.0)).unwrap()[0];
        assert!((v - G1_0 * (-0.125f64).exp()).abs() < 1e-15);
        assert!((v - 0.352_065).abs() < 1e-6);
    }

    #[test]
    fn parzen_pdf_integrates_to_one() {
        let data = batch(&[&[0.0], &[1.0]]);
        let n = 20_001;
        let h = 20.0 / (n - 1) as f64;
        let grid: Vec<Vec<f64>> = (0..n).map(|i| vec![-10.0 + i as f64 * h]).collect();
        let q = SampleBatch::from_rows(&grid).unwrap();
        let p = parzen_pdf(&q, &data, w(1.0)).unwrap();
        let integral = h * (p.iter().sum::<f64>() - 0.5 * (p[0] + p[n - 1]));
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn potential_examples() {
        let one = batch(&[&[0.0]]);
        let v = information_potential(&one, w(1.0));
        assert!((v - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-15);
        assert!((v - 0.282_095).abs() < 1e-6);
        assert!((renyi_quadratic_entropy(&one, w(1.0)) - 1.265_512).abs() < 1e-6);

        let two = batch(&[&[0.0], &[1.0]]);
        let half = w(1.0 / SQRT_2);
        let v = information_potential(&two, half);
        let expected = 0.25 * (2.0 * G1_0 + 2.0 * G1_0 * (-0.5f64).exp());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.320_457).abs() < 1e-6);

        let x = batch(&[&[0.0]]);
        let y = batch(&[&[1.0]]);
        let c = cross_information_potential(&x, &y, half).unwrap();
        assert!((c - 0.241_971).abs() < 1e-6);
        assert!((renyi_cross_entropy(&x, &y, half).unwrap() - 1.418_939).abs() < 1e-6);
    }

    #[test]
    fn potential_saturates_on_zero_variance() {
        let x = batch(&[&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0]]);
        let v = information_potential(&x, w(0.7));
        let peak = gaussian_norm(2, 0.7 * SQRT_2);
        assert!((v - peak).abs() < 1e-15);
    }

    #[test]
    fn cross_potential_coincides_and_is_symmetric() {
        let mut rng = Rng::new(1);
        let x = random_batch(&mut rng, 9, 3);
        let y = random_batch(&mut rng, 5, 3);
        let w = w(0.8);
        let vx = information_potential(&x, w);
        assert!((cross_information_potential(&x, &x, w).unwrap() - vx).abs() <= 1e-12 * vx);
        let a = cross_information_potential(&x, &y, w).unwrap();
        let b = cross_information_potential(&y, &x, w).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        assert!(
            (renyi_cross_entropy(&x, &x, w).unwrap() - renyi_quadratic_entropy(&x, w)).abs()
                < 1e-12
        );
    }

    #[test]
    fn entropy_grows_when_samples_spread() {
        let mut rng = Rng::new(4);
        let x = random_batch(&mut rng, 20, 2);
        let spread = SampleBatch::new(x.matrix().map(|v| 2.0 * v)).unwrap();
        let w = w(0.5);
        assert!(renyi_quadratic_entropy(&spread, w) > renyi_quadratic_entropy(&x, w));
    }

    #[test]
    fn divergence_fixture() {
        let x = batch(&[&[0.0]]);
        let y = batch(&[&[1.0]]);
        let half = w(1.0 / SQRT_2);
        let ed = euclidean_divergence(&x, &y, half).unwrap();
        assert!((ed.value - 2.0 * (G1_0 - G1_0 * (-0.5f64).exp())).abs() < 1e-15);
        assert!((ed.value - 0.313_943).abs() < 1e-6);
        let cs = cauchy_schwarz_divergence(&x, &y, half).unwrap();
        assert!((cs.value - 1.0).abs() < 1e-12, "{}", cs.value);
        assert!(ed.v_x > 0.0 && ed.v_y > 0.0 && ed.v_xy > 0.0);
    }

    #[test]
    fn divergence_zero_on_identical_batches() {
        let mut rng = Rng::new(8);
        let x = random_batch(&mut rng, 17, 4);
        for kind in [DivergenceKind::Euclidean, DivergenceKind::CauchySchwarz] {
            let r = divergence(kind, &x, &x, w(1.3)).unwrap();
            assert!(r.value.abs() <= 1e-12, "{kind}: {}", r.value);
        }
    }

    #[test]
    fn divergence_rejects_mismatch() {
        let x = batch(&[&[0.0]]);
        let y = batch(&[&[0.0, 1.0]]);
        assert!(euclidean_divergence(&x, &y, w(1.0)).is_err());
        assert!(divergence_grad_x(DivergenceKind::CauchySchwarz, &x, &y, w(1.0)).is_err());
    }

    #[test]
    fn gradient_cancels_at_coincidence() {
        let mut rng = Rng::new(12);
        let x = random_batch(&mut rng, 10, 3);
        let g = divergence_grad_x(DivergenceKind::Euclidean, &x, &x, w(0.9)).unwrap();
        assert!(g.as_slice().iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn gradient_translation_invariant() {
        let mut rng = Rng::new(13);
        let x = random_batch(&mut rng, 8, 3);
        let y = random_batch(&mut rng, 8, 3);
        let shift = |b: &SampleBatch| {
            let mut m = b.matrix().clone();
            m.add_row_vector(&[3.0, -1.5, 0.25]).unwrap();
            SampleBatch::new(m).unwrap()
        };
        for kind in [DivergenceKind::Euclidean, DivergenceKind::CauchySchwarz] {
            let g = divergence_grad_x(kind, &x, &y, w(1.0)).unwrap();
            let gs = divergence_grad_x(kind, &shift(&x), &shift(&y), w(1.0)).unwrap();
            for (a, b) in g.as_slice().iter().zip(gs.as_slice()) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn divergence_kind_parsing() {
        assert_eq!(
            "euclidean".parse::<DivergenceKind>().unwrap(),
            DivergenceKind::Euclidean
        );
        assert_eq!(
            "cauchy-schwarz".parse::<DivergenceKind>().unwrap(),
            DivergenceKind::CauchySchwarz
        );
        assert!("kl".parse::<DivergenceKind>().is_err());
    }
}
