use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Exp1, Open01};

use super::StabilityParams;
use crate::math::gamma;

/// Chambers-Mallows-Stuck draw with characteristic exponent
/// `-scale |t|^alpha (1 - i beta sign(t) tan(pi alpha / 2))`.
pub(crate) fn sample_cms<R: Rng + ?Sized>(params: &StabilityParams, rng: &mut R) -> f64 {
    let StabilityParams { alpha, beta, scale } = *params;
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        // only beta = 0 is admissible here
        return scale * v.tan();
    }
    let t = beta * (PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    x * scale.powf(1.0 / alpha)
}

/// `C_alpha` with `P(|X| > x) ~ C_alpha scale x^{-alpha}`.
pub(crate) fn tail_constant(alpha: f64) -> f64 {
    if alpha == 1.0 {
        2.0 / PI
    } else {
        (1.0 - alpha) / (gamma(2.0 - alpha) * (FRAC_PI_2 * alpha).cos())
    }
}

/// Survival function read off a sorted calibration sample.
#[derive(Debug, Clone)]
pub struct EmpiricalSurvival {
    sorted: Vec<f64>,
}

impl EmpiricalSurvival {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.retain(|x| x.is_finite());
        sample.sort_unstable_by(f64::total_cmp);
        Self { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn survival(&self, x: f64) -> f64 {
        let at_most = self.sorted.partition_point(|&s| s <= x);
        (self.sorted.len() - at_most) as f64 / self.sorted.len() as f64
    }

    pub fn cdf_strict(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s < x) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, v: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((v * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    /// Smallest positive sample point `x` with `P(X > x) <= t`.
    pub(crate) fn upper_quantile_bisect(&self, t: f64) -> f64 {
        let n = self.sorted.len();
        let need = ((1.0 - t) * n as f64).ceil() as usize;
        let k = need.clamp(1, n);
        let first_positive = self.sorted.partition_point(|&s| s <= 0.0);
        self.sorted[(k - 1).max(first_positive.min(n - 1))]
    }
}
