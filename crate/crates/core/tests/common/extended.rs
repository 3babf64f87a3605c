//! Double-double reference for single Gaussian log-kernel terms.

use itl_ae::Rng;

/// Double-double arithmetic, enough for a correctly rounded single kernel term.
#[derive(Clone, Copy, Debug)]
pub struct Dd(pub f64, pub f64);

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    pub fn quick(s: f64, e: f64) -> Self {
        let hi = s + e;
        Dd(hi, e - (hi - s))
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::quick(s, err + self.1 + o.1)
    }

    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::quick(p, e + self.0 * o.1 + self.1 * o.0)
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.0 / o.0;
        Dd::quick(q1, q2).add(Dd::from(q3))
    }
}

// High-precision constants split into (hi, lo) pairs.
pub const LN_2PI: Dd = Dd(1.8378770664093456, -7.756588316134483e-17);
pub const LN_2: Dd = Dd(std::f64::consts::LN_2, 2.3190468138462996e-17);
/// ln of the double nearest 0.16.
pub const LN_SIGMA: Dd = Dd(-1.8325814637483102, 1.0364058909196095e-16);
pub const SIGMA: f64 = 0.16;

/// `log G_sigma(a - b)` in double-double.
pub fn log_kernel_dd(a: &[f64], b: &[f64]) -> Dd {
    let mut sq = Dd::from(0.0);
    for (x, y) in a.iter().zip(b) {
        // Difference of doubles is exact as a double-double.
        let diff = Dd::from(*x).add(Dd::from(*y).neg());
        sq = sq.add(diff.mul(diff));
    }
    let d = Dd::from(a.len() as f64);
    let two_var = Dd::from(2.0).mul(Dd::from(SIGMA).mul(Dd::from(SIGMA)));
    Dd::from(0.5)
        .mul(d)
        .mul(LN_2PI)
        .add(d.mul(LN_SIGMA))
        .add(sq.div(two_var))
        .neg()
}

/// Pixel-like fixture point plus one offset of length exactly-ish `dist` in a random direction.
pub fn mnist_like_pair(rng: &mut Rng, dist: f64) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..784).map(|_| rng.uniform()).collect();
    let dir: Vec<f64> = (0..784).map(|_| rng.standard_normal()).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let b = a
        .iter()
        .zip(&dir)
        .map(|(x, u)| x + dist * u / norm)
        .collect();
    (a, b)
}
