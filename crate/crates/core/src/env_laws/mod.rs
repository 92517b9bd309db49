//! Increment laws for the associated random walk.
//!
//! An [`EnvironmentLaw`] is the distribution of `X = log f'(1)`, the log-mean
//! of one generation's offspring law. Besides sampling it exposes the tail
//! metadata the limit theorems are phrased in: the stability pair
//! `(alpha, beta)`, the tail weights `p`, `q`, the positivity index `rho` and
//! the scaling sequence `c_n`.

mod stable;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{sigmoid, softplus};
use crate::quadrature::GaussLegendre;

pub use stable::EmpiricalSurvival;

/// Stability index, skewness and scale of the limiting stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
}

impl StabilityParams {
    pub fn new(alpha: f64, beta: f64, scale: f64) -> Result<Self> {
        if !is_admissible(alpha, beta) {
            return Err(Error::Inadmissible { alpha, beta });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", "must be positive and finite"));
        }
        Ok(Self { alpha, beta, scale })
    }

    /// True iff `alpha < 2` and `|beta| < 1`.
    pub fn condition_a(&self) -> bool {
        self.alpha < 2.0 && self.beta.abs() < 1.0
    }

    pub fn rho(&self) -> f64 {
        rho_unchecked(self.alpha, self.beta)
    }
}

/// Membership in the admissible set of stability pairs.
pub fn is_admissible(alpha: f64, beta: f64) -> bool {
    if !alpha.is_finite() || !beta.is_finite() {
        return false;
    }
    (alpha > 0.0 && alpha < 1.0 && beta.abs() < 1.0)
        || (alpha > 1.0 && alpha < 2.0 && beta.abs() <= 1.0)
        || (alpha == 1.0 && beta == 0.0)
        || (alpha == 2.0 && beta == 0.0)
}

/// `lim P(S_n > 0)` for a walk attracted to the stable law `(alpha, beta)`.
pub fn positivity_index_rho(alpha: f64, beta: f64) -> Result<f64> {
    if !is_admissible(alpha, beta) {
        return Err(Error::Inadmissible { alpha, beta });
    }
    Ok(rho_unchecked(alpha, beta))
}

fn rho_unchecked(alpha: f64, beta: f64) -> f64 {
    if alpha == 1.0 {
        0.5
    } else {
        0.5 + (beta * (PI * alpha / 2.0).tan()).atan() / (PI * alpha)
    }
}

/// Which scaling sequence `c_n` to use.
///
/// `Quantile` is `min{x > 0 : P(X > x) <= 1/n}`. It does not satisfy
/// `n P(X < -c_n) -> q (2 - alpha) / alpha`, and with it the meander moment
/// `E[Lambda_1^{-alpha}]` is not `(1 - rho) alpha / (q (2 - alpha))`.
///
/// `TruncatedSecondMoment` is Feller's `sup{u > 0 : n E[X^2; |X| <= u] >= u^2}`
/// and `TailBalanced` is `min{x > 0 : P(|X| > x) <= (2 - alpha) / (alpha n)}`.
/// The two are asymptotically equivalent and both give the identities above;
/// for pure power tails the second makes them exact at every `n`. Bounded laws
/// have no heavy tail to balance and use Feller's scale under `TailBalanced`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Quantile,
    #[serde(alias = "feller")]
    TruncatedSecondMoment,
    #[default]
    #[serde(alias = "tail")]
    TailBalanced,
}

/// Distribution of the increment `X`.
#[derive(Debug, Clone)]
pub enum EnvironmentLaw {
    /// `+a` with probability `w`, `-a` otherwise.
    TwoPoint { a: f64, w: f64 },
    /// `Y - centering`, where `P(Y > y) = p (y/x_min)^{-alpha}` and
    /// `P(Y < -y) = q (y/x_min)^{-alpha}` for `y >= x_min`.
    TwoSidedPareto { alpha: f64, p: f64, x_min: f64, centering: f64 },
    /// Uniform on `[lo, hi]`; the finite-variance contrast law.
    BoundedUniform { lo: f64, hi: f64 },
    /// Strictly stable law sampled by the Chambers-Mallows-Stuck transform.
    /// Its survival function is only available from a calibration sample.
    ExactStable { params: StabilityParams, calibration: Option<Arc<EmpiricalSurvival>> },
}

/// Tagged config record describing a law, e.g.
/// `{"type":"pareto2","alpha":1.5,"p":0.5,"xmin":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LawSpec {
    #[serde(rename = "two_point")]
    TwoPoint { a: f64, w: f64 },
    #[serde(rename = "pareto2")]
    Pareto2 { alpha: f64, p: f64, xmin: f64 },
    #[serde(rename = "uniform")]
    Uniform { lo: f64, hi: f64 },
    #[serde(rename = "stable")]
    Stable {
        alpha: f64,
        beta: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl LawSpec {
    pub fn build(&self) -> Result<EnvironmentLaw> {
        match *self {
            LawSpec::TwoPoint { a, w } => EnvironmentLaw::two_point(a, w),
            LawSpec::Pareto2 { alpha, p, xmin } => EnvironmentLaw::pareto(alpha, p, xmin),
            LawSpec::Uniform { lo, hi } => EnvironmentLaw::uniform(lo, hi),
            LawSpec::Stable { alpha, beta, scale } => {
                EnvironmentLaw::stable(StabilityParams::new(alpha, beta, scale)?)
            }
        }
    }
}

/// Tail metadata of a law together with a table of scaling constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub normalization: Normalization,
    pub cn_table: BTreeMap<u64, f64>,
}

impl EnvironmentLaw {
    pub fn two_point(a: f64, w: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("a", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid("w", "must be a probability"));
        }
        Ok(Self::TwoPoint { a, w })
    }

    /// Two-sided Pareto law with tail index `alpha`, right-tail weight `p`
    /// and tail edge `x_min`, centered to mean zero when `alpha > 1`.
    pub fn pareto(alpha: f64, p: f64, x_min: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha", "pareto tails need 0 < alpha < 2"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", "must be a probability"));
        }
        if !(x_min > 0.0 && x_min.is_finite()) {
            return Err(invalid("x_min", "must be positive and finite"));
        }
        let beta = 2.0 * p - 1.0;
        if !is_admissible(alpha, beta) {
            return Err(Error::Inadmissible { alpha, beta });
        }
        let centering = if alpha > 1.0 { (2.0 * p - 1.0) * alpha * x_min / (alpha - 1.0) } else { 0.0 };
        Ok(Self::TwoSidedPareto { alpha, p, x_min, centering })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid("lo/hi", "need finite lo < hi"));
        }
        Ok(Self::BoundedUniform { lo, hi })
    }

    pub fn stable(params: StabilityParams) -> Result<Self> {
        Ok(Self::ExactStable { params, calibration: None })
    }

    /// Attaches an empirical survival table built from `draws` samples.
    pub fn calibrate<R: Rng + ?Sized>(self, draws: usize, rng: &mut R) -> Result<Self> {
        match self {
            Self::ExactStable { params, .. } => {
                if draws < 2 {
                    return Err(Error::TooFewSamples { needed: 2, got: draws });
                }
                let sample: Vec<f64> = (0..draws).map(|_| stable::sample_cms(&params, rng)).collect();
                Ok(Self::ExactStable { params, calibration: Some(Arc::new(EmpiricalSurvival::new(sample))) })
            }
            other => Ok(other),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Self::TwoPoint { .. } | Self::BoundedUniform { .. })
    }

    /// `(alpha, beta, p, q)`; bounded laws report the Gaussian pair `(2, 0)`.
    pub fn stability(&self) -> (f64, f64, f64, f64) {
        match *self {
            Self::TwoPoint { .. } | Self::BoundedUniform { .. } => (2.0, 0.0, 0.5, 0.5),
            Self::TwoSidedPareto { alpha, p, .. } => (alpha, 2.0 * p - 1.0, p, 1.0 - p),
            Self::ExactStable { params, .. } => {
                let p = 0.5 * (1.0 + params.beta);
                (params.alpha, params.beta, p, 1.0 - p)
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        self.stability().0
    }

    pub fn rho(&self) -> f64 {
        let (alpha, beta, _, _) = self.stability();
        rho_unchecked(alpha, beta)
    }

    pub fn condition_a(&self) -> bool {
        let (alpha, beta, _, _) = self.stability();
        alpha < 2.0 && beta.abs() < 1.0
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::TwoPoint { a, w } => Some(a * (2.0 * w - 1.0)),
            Self::BoundedUniform { lo, hi } => Some(0.5 * (lo + hi)),
            Self::TwoSidedPareto { alpha, .. } => (alpha > 1.0).then_some(0.0),
            Self::ExactStable { params, .. } => (params.alpha > 1.0).then_some(0.0),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            Self::TwoPoint { a, w } => {
                let m = a * (2.0 * w - 1.0);
                Some(a * a - m * m)
            }
            Self::BoundedUniform { lo, hi } => Some((hi - lo).powi(2) / 12.0),
            _ => None,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::TwoPoint { a, w } => {
                if rng.random::<f64>() < w {
                    a
                } else {
                    -a
                }
            }
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                let u: f64 = rng.sample(Open01);
                let y = if u < p {
                    x_min * (u / p).powf(-1.0 / alpha)
                } else {
                    let v = ((u - p) / (1.0 - p)).max(f64::MIN_POSITIVE);
                    -x_min * v.powf(-1.0 / alpha)
                };
                y - centering
            }
            Self::BoundedUniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::ExactStable { ref params, .. } => stable::sample_cms(params, rng),
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::TwoPoint { a, w } => {
                if x < -a {
                    1.0
                } else if x < a {
                    w
                } else {
                    0.0
                }
            }
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                let y = x + centering;
                if y >= x_min {
                    p * (y / x_min).powf(-alpha)
                } else if y > -x_min {
                    p
                } else {
                    1.0 - (1.0 - p) * (-y / x_min).powf(-alpha)
                }
            }
            Self::BoundedUniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            Self::ExactStable { ref calibration, .. } => match calibration {
                Some(table) => table.survival(x),
                None => return Err(Error::SurvivalUnavailable("exact stable law has no calibration table")),
            },
        })
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                let y = x + centering;
                if y <= -x_min {
                    (1.0 - p) * (-y / x_min).powf(-alpha)
                } else if y < x_min {
                    1.0 - p
                } else {
                    1.0 - p * (y / x_min).powf(-alpha)
                }
            }
            _ => 1.0 - self.survival(x)?,
        })
    }

    /// `P(X < x)`; differs from [`cdf`](Self::cdf) only at atoms.
    pub fn cdf_strict(&self, x: f64) -> Result<f64> {
        match *self {
            Self::TwoPoint { a, w } => Ok(if x <= -a {
                0.0
            } else if x <= a {
                1.0 - w
            } else {
                1.0
            }),
            Self::ExactStable { ref calibration, .. } => match calibration {
                Some(table) => Ok(table.cdf_strict(x)),
                None => Err(Error::SurvivalUnavailable("exact stable law has no calibration table")),
            },
            _ => self.cdf(x),
        }
    }

    /// Generalized inverse `inf{x : P(X <= x) >= v}` for `v` in `(0, 1)`.
    pub fn quantile(&self, v: f64) -> Option<f64> {
        let v = v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        match *self {
            Self::TwoPoint { a, w } => Some(if v <= 1.0 - w { -a } else { a }),
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                let q = 1.0 - p;
                let y = if v <= q { -x_min * (v / q).powf(-1.0 / alpha) } else { x_min * ((1.0 - v) / p).powf(-1.0 / alpha) };
                Some(y - centering)
            }
            Self::BoundedUniform { lo, hi } => Some(lo + v * (hi - lo)),
            Self::ExactStable { ref calibration, .. } => calibration.as_ref().map(|t| t.quantile(v)),
        }
    }

    /// Draws from the law conditioned on `X <= t`, or `None` when that event
    /// has zero mass or no quantile function is available.
    pub fn sample_at_most<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Option<(f64, f64)> {
        let mass = self.cdf(t).ok()?;
        if mass <= 0.0 {
            return None;
        }
        let u: f64 = rng.sample(Open01);
        let x = self.quantile(u * mass)?;
        Some((x.min(t), mass))
    }

    /// `E[sigmoid(c - X)]`.
    ///
    /// With geometric offspring this is the annealed probability that a
    /// quenched extinction factor `1 / (1 + e^{X - c})` fires, which is how the
    /// last increment is integrated out of `P_f(T = n)`. `None` for laws
    /// without a closed-form distribution function.
    pub fn logistic_mean(&self, c: f64) -> Option<f64> {
        const FAR_FIELD: f64 = 60.0;
        match *self {
            Self::TwoPoint { a, w } => Some(w * sigmoid(c - a) + (1.0 - w) * sigmoid(c + a)),
            Self::BoundedUniform { lo, hi } => Some((softplus(c - lo) - softplus(c - hi)) / (hi - lo)),
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                // E[F(c - L)] for L standard logistic, F the cdf of X. Far from
                // the kinks F is smooth and the logistic moments give
                // F + (pi^2/6) F'' + (7 pi^4/360) F'''' to relative error ~ |y|^{-6}.
                let y = c + centering;
                if y.abs() > x_min + FAR_FIELD {
                    let (weight, tail) = if y < 0.0 { (1.0 - p, -y) } else { (p, y) };
                    let base = weight * (tail / x_min).powf(-alpha);
                    let d2 = base * alpha * (alpha + 1.0) / (tail * tail);
                    let d4 = d2 * (alpha + 2.0) * (alpha + 3.0) / (tail * tail);
                    let pi2 = std::f64::consts::PI.powi(2);
                    let corr = base + pi2 / 6.0 * d2 + 7.0 * pi2 * pi2 / 360.0 * d4;
                    return Some(if y < 0.0 { corr } else { 1.0 - corr });
                }
                const HALF_RANGE: f64 = 38.0;
                let gl = gauss_legendre_10();
                let breaks = [c + centering - x_min, c + centering + x_min];
                let v = gl.integrate_composite(-HALF_RANGE, HALF_RANGE, &breaks, 2.0, |l| {
                    let s = sigmoid(l);
                    self.cdf(c - l).unwrap_or(0.0) * s * (1.0 - s)
                });
                Some(v.clamp(0.0, 1.0))
            }
            Self::ExactStable { .. } => None,
        }
    }

    /// `E[X^2; |X| <= u]`.
    pub fn truncated_second_moment(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            Self::TwoPoint { a, .. } => {
                if u >= a {
                    a * a
                } else {
                    0.0
                }
            }
            Self::BoundedUniform { lo, hi } => {
                let a = lo.max(-u);
                let b = hi.min(u);
                if b > a {
                    (b.powi(3) - a.powi(3)) / (3.0 * (hi - lo))
                } else {
                    0.0
                }
            }
            Self::TwoSidedPareto { alpha, p, x_min, centering: m } => {
                let q = 1.0 - p;
                let right = pareto_piece(alpha, x_min, -m, (m - u).max(x_min), m + u);
                let left = pareto_piece(alpha, x_min, m, (-m - u).max(x_min), u - m);
                p * right + q * left
            }
            Self::ExactStable { .. } => {
                return Err(Error::SurvivalUnavailable("no truncated moments for the exact stable law"))
            }
        })
    }

    /// The scaling constant `c_n` under the chosen normalization.
    pub fn scaling_sequence(&self, n: u64, normalization: Normalization) -> Result<f64> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        match normalization {
            Normalization::Quantile => self.quantile_scale(n),
            Normalization::TruncatedSecondMoment => self.feller_scale(n),
            Normalization::TailBalanced => self.tail_balanced_scale(n),
        }
    }

    fn tail_balanced_scale(&self, n: u64) -> Result<f64> {
        match *self {
            Self::TwoSidedPareto { alpha, x_min, centering, .. } => {
                let target = (2.0 - alpha) / (alpha * n as f64);
                if centering == 0.0 {
                    return Ok(x_min * target.powf(-1.0 / alpha));
                }
                let two_sided = |x: f64| self.survival(x).unwrap_or(0.0) + self.cdf_strict(-x).unwrap_or(0.0);
                let mut hi = x_min + centering.abs();
                while two_sided(hi) > target {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * hi {
                    let mid = 0.5 * (lo + hi);
                    if two_sided(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(hi)
            }
            // the stable tail constant is only asymptotic, so Feller's closed form is as good
            _ => self.feller_scale(n),
        }
    }

    fn quantile_scale(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        let c = match *self {
            Self::TwoPoint { a, w } => {
                if w <= 1.0 / nf {
                    return Err(Error::DegenerateScale { n, reason: "every x > 0 already has P(X > x) <= 1/n" });
                }
                a
            }
            Self::TwoSidedPareto { alpha, p, x_min, centering } => {
                // The search runs over the tail region y = x + centering >= x_min.
                (x_min * (nf * p).powf(1.0 / alpha)).max(x_min) - centering
            }
            Self::BoundedUniform { lo, hi } => hi - (hi - lo) / nf,
            Self::ExactStable { ref calibration, .. } => match calibration {
                Some(table) => table.upper_quantile_bisect(1.0 / nf),
                None => return Err(Error::SurvivalUnavailable("exact stable law has no calibration table")),
            },
        };
        if c > 0.0 {
            Ok(c)
        } else {
            Err(Error::DegenerateScale { n, reason: "no positive x satisfies the quantile condition" })
        }
    }

    fn feller_scale(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        match *self {
            Self::TwoPoint { a, .. } => Ok(a * nf.sqrt()),
            Self::ExactStable { params, .. } => {
                let StabilityParams { alpha, scale, .. } = params;
                if alpha == 2.0 {
                    return Ok((2.0 * scale * nf).sqrt());
                }
                let tail_constant = stable::tail_constant(alpha) * scale;
                Ok((nf * tail_constant * alpha / (2.0 - alpha)).powf(1.0 / alpha))
            }
            Self::TwoSidedPareto { x_min, centering, .. } => {
                largest_crossing(|u| nf * self.truncated_second_moment(u).unwrap_or(0.0) - u * u, x_min + centering.abs(), n)
            }
            Self::BoundedUniform { lo, hi } => {
                largest_crossing(|u| nf * self.truncated_second_moment(u).unwrap_or(0.0) - u * u, lo.abs().max(hi.abs()), n)
            }
        }
    }

    pub fn tail_profile(&self, ns: &[u64], normalization: Normalization) -> Result<TailProfile> {
        let (alpha, beta, p, q) = self.stability();
        let mut cn_table = BTreeMap::new();
        for &n in ns {
            cn_table.insert(n, self.scaling_sequence(n, normalization)?);
        }
        Ok(TailProfile { alpha, beta, p, q, rho: rho_unchecked(alpha, beta), normalization, cn_table })
    }
}

/// `int_{w0}^{w1} (w + s)^2 alpha x_min^alpha w^{-alpha-1} dw`, zero when empty.
fn pareto_piece(alpha: f64, x_min: f64, s: f64, w0: f64, w1: f64) -> f64 {
    if w1 <= w0 {
        return 0.0;
    }
    let antiderivative = |w: f64| {
        let mut g = w.powf(2.0 - alpha) / (2.0 - alpha);
        if s != 0.0 {
            g += 2.0 * s * w.powf(1.0 - alpha) / (1.0 - alpha) - s * s * w.powf(-alpha) / alpha;
        }
        g
    };
    (alpha * x_min.powf(alpha) * (antiderivative(w1) - antiderivative(w0))).max(0.0)
}

/// Largest `u > 0` with `g(u) >= 0`, where `g` is eventually negative.
fn largest_crossing<G: Fn(f64) -> f64>(g: G, natural_scale: f64, n: u64) -> Result<f64> {
    let mut hi = natural_scale.max(1e-6) * (n as f64).max(2.0);
    let mut guard = 0;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::DegenerateScale { n, reason: "truncated second moment grows too fast" });
        }
    }
    let mut lo = hi;
    loop {
        lo /= 1.05;
        if g(lo) >= 0.0 {
            break;
        }
        if lo < natural_scale * 1e-9 {
            return Err(Error::DegenerateScale { n, reason: "n E[X^2; |X| <= u] never reaches u^2" });
        }
    }
    let mut hi = lo * 1.05;
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn gauss_legendre_10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pareto() -> EnvironmentLaw {
        EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap()
    }

    #[test]
    fn rho_examples() {
        assert_eq!(positivity_index_rho(1.0, 0.0).unwrap(), 0.5);
        assert_eq!(positivity_index_rho(1.5, 0.0).unwrap(), 0.5);
        // tan(3 pi / 4) = -1, so rho = 1/2 + atan(-1/2) / (1.5 pi)
        let expected = 0.5 + (-0.5f64).atan() / (1.5 * PI);
        assert_relative_eq!(positivity_index_rho(1.5, 0.5).unwrap(), expected, epsilon = 1e-14);
        assert!((positivity_index_rho(1.5, 0.5).unwrap() - 0.40161).abs() < 1e-5);
    }

    #[test]
    fn rho_rejects_inadmissible_pairs() {
        assert!(positivity_index_rho(1.0, 0.3).is_err());
        assert!(positivity_index_rho(0.5, 1.0).is_err());
        assert!(positivity_index_rho(2.0, 0.1).is_err());
        assert!(positivity_index_rho(2.5, 0.0).is_err());
        assert!(positivity_index_rho(1.7, -1.0).is_ok());
    }

    #[test]
    fn condition_a() {
        assert!(StabilityParams::new(1.5, 0.2, 1.0).unwrap().condition_a());
        assert!(!StabilityParams::new(1.5, 1.0, 1.0).unwrap().condition_a());
        assert!(!StabilityParams::new(2.0, 0.0, 1.0).unwrap().condition_a());
    }

    #[test]
    fn survival_examples() {
        assert_relative_eq!(pareto().survival(4.0).unwrap(), 0.0625, epsilon = 1e-15);
        let tp = EnvironmentLaw::two_point(1.0, 0.3).unwrap();
        assert_eq!(tp.survival(0.0).unwrap(), 0.3);
        for law in [pareto(), tp, EnvironmentLaw::uniform(-1.0, 1.0).unwrap()] {
            assert_eq!(law.survival(-1e300).unwrap(), 1.0);
        }
        let st = EnvironmentLaw::stable(StabilityParams::new(1.5, 0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(st.survival(0.0), Err(Error::SurvivalUnavailable(_))));
    }

    #[test]
    fn quantile_scaling_examples() {
        let law = pareto();
        let c1000 = law.scaling_sequence(1000, Normalization::Quantile).unwrap();
        assert_relative_eq!(c1000, 500f64.powf(2.0 / 3.0), epsilon = 1e-9);
        assert!((c1000 - 62.996).abs() < 1e-3);
        assert_eq!(law.scaling_sequence(2, Normalization::Quantile).unwrap(), 1.0);
        assert!(law.scaling_sequence(0, Normalization::Quantile).is_err());
    }

    #[test]
    fn feller_scaling_matches_closed_form() {
        // mu(u) = 3 (sqrt(u) - 1) for the unit symmetric pareto, so c^2 = 3 n (sqrt(c) - 1).
        let law = pareto();
        for n in [10u64, 100, 2000] {
            let c = law.scaling_sequence(n, Normalization::TruncatedSecondMoment).unwrap();
            let residual = c * c - 3.0 * n as f64 * (c.sqrt() - 1.0);
            assert!(residual.abs() < 1e-8 * c * c, "n={n} c={c}");
        }
        let tp = EnvironmentLaw::two_point(2f64.ln(), 0.5).unwrap();
        assert_relative_eq!(tp.scaling_sequence(16, Normalization::TruncatedSecondMoment).unwrap(), 4.0 * 2f64.ln());
        let un = EnvironmentLaw::uniform(-1.0, 1.0).unwrap();
        let c = un.scaling_sequence(300, Normalization::TruncatedSecondMoment).unwrap();
        assert_relative_eq!(c, (300.0f64 / 3.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn left_tail_at_feller_scale_is_exact_for_power_tails() {
        // n P(X < -c_n) = q (2 - alpha) / alpha + O(c_n^{-1/2}) for the pure power law;
        // the residual is the x_min edge term of mu, which decays like n^{-1/3}.
        let law = pareto();
        for n in [1_000u64, 100_000, 10_000_000] {
            let c = law.scaling_sequence(n, Normalization::TruncatedSecondMoment).unwrap();
            let lhs = n as f64 * law.cdf(-c).unwrap();
            let exact = (1.0 / 6.0) / (1.0 - c.powf(-0.5));
            assert_relative_eq!(lhs, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn tail_balanced_scale_makes_left_tail_identity_exact() {
        let law = pareto();
        for n in [1u64, 7, 2000] {
            let c = law.scaling_sequence(n, Normalization::TailBalanced).unwrap();
            assert_relative_eq!(c, (3.0 * n as f64).powf(2.0 / 3.0), max_relative = 1e-12);
            assert_relative_eq!(n as f64 * law.cdf(-c).unwrap(), 1.0 / 6.0, max_relative = 1e-12);
        }
        let skewed = EnvironmentLaw::pareto(1.5, 0.8, 1.0).unwrap();
        let c = skewed.scaling_sequence(500, Normalization::TailBalanced).unwrap();
        let both = skewed.survival(c).unwrap() + skewed.cdf_strict(-c).unwrap();
        assert_relative_eq!(both, 1.0 / 1500.0, max_relative = 1e-9);
    }

    #[test]
    fn pareto_centering_gives_mean_zero() {
        let law = EnvironmentLaw::pareto(1.7, 0.8, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mean: f64 = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        let EnvironmentLaw::TwoSidedPareto { centering, .. } = law else { unreachable!() };
        assert_relative_eq!(centering, 0.6 * 1.7 * 0.5 / 0.7, epsilon = 1e-14);
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        let law = EnvironmentLaw::pareto(1.2, 0.3, 2.0).unwrap();
        for v in [1e-6, 0.01, 0.2, 0.69, 0.71, 0.9, 0.999] {
            let x = law.quantile(v).unwrap();
            assert_relative_eq!(law.cdf(x).unwrap(), v, max_relative = 1e-10);
        }
    }

    #[test]
    fn logistic_mean_matches_direct_quadrature() {
        // Route 1: integrate over the logistic variable. Route 2: integrate the
        // sigmoid against the pareto density in the uniform coordinate.
        let law = pareto();
        let gl = GaussLegendre::new(20);
        for c in [-500.0f64, -200.0, -70.0, -20.0, -3.0, -0.5, 0.0, 2.0, 30.0, 65.0, 400.0] {
            let pieces = |sign: f64| {
                // y = x_min v^{-1/alpha}, v in (0,1); split in log v for the sharp transition
                gl.integrate_composite(-80.0, 0.0, &[-(c.abs().max(1.0)).ln() * 1.5], 0.25, |lv: f64| {
                    let v = lv.exp();
                    let y = v.powf(-1.0 / 1.5);
                    sigmoid(c - sign * y) * v
                })
            };
            let direct = 0.5 * pieces(1.0) + 0.5 * pieces(-1.0);
            let via_logistic = law.logistic_mean(c).unwrap();
            assert_relative_eq!(via_logistic, direct, max_relative = 1e-7);
        }
        let tp = EnvironmentLaw::two_point(1.0, 0.5).unwrap();
        assert_relative_eq!(tp.logistic_mean(0.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn law_spec_round_trip() {
        let spec: LawSpec = serde_json::from_str(r#"{"type":"pareto2","alpha":1.5,"p":0.5,"xmin":1.0}"#).unwrap();
        assert_eq!(spec, LawSpec::Pareto2 { alpha: 1.5, p: 0.5, xmin: 1.0 });
        assert!(spec.build().is_ok());
        let bad: LawSpec = serde_json::from_str(r#"{"type":"pareto2","alpha":0.5,"p":1.0,"xmin":1.0}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
