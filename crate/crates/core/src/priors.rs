//! Samplers for the latent priors imposed by the regulariser.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SampleBatch;
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Gaussian,
    Laplacian,
    SwissRoll,
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Gaussian => "gaussian",
            PriorKind::Laplacian => "laplacian",
            PriorKind::SwissRoll => "swiss_roll",
        })
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => Ok(PriorKind::Gaussian),
            "laplacian" | "laplace" => Ok(PriorKind::Laplacian),
            "swiss_roll" | "swissroll" => Ok(PriorKind::SwissRoll),
            other => Err(Error::invalid(
                "prior kind",
                format!("unknown prior {other:?}, expected gaussian, laplacian or swiss_roll"),
            )),
        }
    }
}

/// Description of an imposed prior.
///
/// `scale` is the per-coordinate std for Gaussian, the diversity `b` for
/// Laplacian and the spiral radius growth per radian for the swiss roll.
/// `turns` and `noise_std` only affect the swiss roll, which is always 2-D
/// and ignores `location`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub dim: usize,
    pub location: f64,
    pub scale: f64,
    pub turns: f64,
    pub noise_std: f64,
}

impl PriorSpec {
    pub const DEFAULT_TURNS: f64 = 1.5;
    pub const DEFAULT_NOISE_STD: f64 = 0.05;

    pub fn gaussian(dim: usize, std: f64) -> Self {
        Self {
            kind: PriorKind::Gaussian,
            dim,
            location: 0.0,
            scale: std,
            turns: Self::DEFAULT_TURNS,
            noise_std: Self::DEFAULT_NOISE_STD,
        }
    }

    pub fn laplacian(dim: usize, b: f64) -> Self {
        Self {
            kind: PriorKind::Laplacian,
            ..Self::gaussian(dim, b)
        }
    }

    pub fn swiss_roll() -> Self {
        Self {
            kind: PriorKind::SwissRoll,
            ..Self::gaussian(2, 1.0)
        }
    }

    /// Default for the given kind: `N(0, 5^2)`, `Laplace(0, 1)`, or the unit swiss roll.
    pub fn default_for(kind: PriorKind, dim: usize) -> Self {
        match kind {
            PriorKind::Gaussian => Self::gaussian(dim, 5.0),
            PriorKind::Laplacian => Self::laplacian(dim, 1.0),
            PriorKind::SwissRoll => Self::swiss_roll(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("prior dim", "must be at least 1"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(
                "prior scale",
                format!("must be positive, got {}", self.scale),
            ));
        }
        if !self.location.is_finite() {
            return Err(Error::invalid("prior location", "must be finite"));
        }
        if self.kind == PriorKind::SwissRoll {
            if self.dim != 2 {
                return Err(Error::invalid(
                    "prior dim",
                    format!("swiss roll is 2-D, got dim {}", self.dim),
                ));
            }
            if !(self.turns > 0.0 && self.turns.is_finite()) {
                return Err(Error::invalid(
                    "prior turns",
                    format!("must be positive, got {}", self.turns),
                ));
            }
            if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
                return Err(Error::invalid(
                    "prior noise_std",
                    format!("must be non-negative, got {}", self.noise_std),
                ));
            }
        }
        Ok(())
    }
}

/// Draws `n` i.i.d. samples from `spec`.
pub fn sample_prior(spec: &PriorSpec, n: usize, rng: &mut Rng) -> Result<SampleBatch> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "need at least one prior sample"));
    }
    let d = spec.dim;
    let mut values = Vec::with_capacity(n * d);
    match spec.kind {
        PriorKind::Gaussian => {
            for _ in 0..n * d {
                values.push(spec.location + spec.scale * rng.standard_normal());
            }
        }
        PriorKind::Laplacian => {
            for _ in 0..n * d {
                let mut u = rng.uniform() - 0.5;
                while u == -0.5 {
                    u = rng.uniform() - 0.5;
                }
                let v = -spec.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                values.push(spec.location + v);
            }
        }
        PriorKind::SwissRoll => {
            let t_max = spec.turns * 2.0 * PI;
            for _ in 0..n {
                let t = rng.uniform_range(0.0, t_max);
                let r = spec.scale * t;
                let (mut px, mut py) = (r * t.cos(), r * t.sin());
                if spec.noise_std > 0.0 {
                    px += spec.noise_std * rng.standard_normal();
                    py += spec.noise_std * rng.standard_normal();
                }
                values.push(px);
                values.push(py);
            }
        }
    }
    SampleBatch::new(Matrix::new(n, d, values)?)
}
