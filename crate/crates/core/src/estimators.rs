//! Confidence intervals, ratio and self-normalized estimators, Kolmogorov
//! distances and log-log slope fits. Accumulators merge associatively so
//! replicas can be reduced in any grouping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl McEstimate {
    pub fn new(mean: f64, stderr: f64, n_samples: u64) -> Self {
        let half = Z95 * stderr;
        Self { mean, stderr, n_samples, ci_low: mean - half, ci_high: mean + half }
    }

    /// Interval clipped to `[0, 1]` for probability-valued estimates.
    pub fn clamp_unit(mut self) -> Self {
        self.ci_low = self.ci_low.max(0.0).min(self.mean);
        self.ci_high = self.ci_high.min(1.0).max(self.mean);
        self
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.mean * factor, self.stderr * factor.abs(), self.n_samples)
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn z_distance(&self, other: &McEstimate) -> f64 {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let d = (self.mean - other.mean).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

/// Streaming mean and variance (Welford, merged with Chan's update).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> McEstimate {
        let se = if self.n == 0 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        McEstimate::new(self.mean, se, self.n)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Streaming means, variances and covariance of paired draws `(x, y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedMoments {
    pub n: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub cxx: f64,
    pub cyy: f64,
    pub cxy: f64,
}

impl PairedMoments {
    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.cxx += dx * (x - self.mean_x);
        self.cyy += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, o: &PairedMoments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        self.cxx += o.cxx + dx * dx * na * nb / n;
        self.cyy += o.cyy + dy * dy * na * nb / n;
        self.cxy += o.cxy + dx * dy * na * nb / n;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.n += o.n;
    }

    pub fn x(&self) -> Moments {
        Moments { n: self.n, mean: self.mean_x, m2: self.cxx }
    }

    pub fn y(&self) -> Moments {
        Moments { n: self.n, mean: self.mean_y, m2: self.cyy }
    }

    pub fn covariance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.cxy / (self.n - 1) as f64
        }
    }

    /// Delta-method estimate of `E[x] / E[y]`.
    pub fn ratio(&self) -> Result<McEstimate> {
        let n = self.n as f64;
        ratio_from_parts(self.x(), self.y(), self.covariance() / n)
    }
}

pub fn mean_ci(samples: &[f64]) -> Result<McEstimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    Ok(samples.iter().copied().collect::<Moments>().estimate())
}

/// Delta-method interval for `mean(num) / mean(den)`. With `paired` the draws
/// are matched index by index and their covariance enters the variance.
pub fn ratio_ci(num: &[f64], den: &[f64], paired: bool) -> Result<McEstimate> {
    if num.len() < 2 || den.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: num.len().min(den.len()) });
    }
    if paired {
        if num.len() != den.len() {
            return Err(crate::error::invalid("den", "paired ratio needs equal lengths"));
        }
        let mut pm = PairedMoments::default();
        for (&x, &y) in num.iter().zip(den) {
            pm.push(x, y);
        }
        pm.ratio()
    } else {
        let x: Moments = num.iter().copied().collect();
        let y: Moments = den.iter().copied().collect();
        ratio_from_parts(x, y, 0.0)
    }
}

/// Ratio of two estimates whose means have covariance `cov_of_means`.
pub fn ratio_from_parts(x: Moments, y: Moments, cov_of_means: f64) -> Result<McEstimate> {
    let ex = x.estimate();
    let ey = y.estimate();
    let z = if ey.stderr > 0.0 { ey.mean.abs() / ey.stderr } else if ey.mean != 0.0 { f64::INFINITY } else { 0.0 };
    if z < 5.0 {
        return Err(Error::UnstableDenominator { z });
    }
    let r = ex.mean / ey.mean;
    let var = (ex.stderr.powi(2) + r * r * ey.stderr.powi(2) - 2.0 * r * cov_of_means) / (ey.mean * ey.mean);
    Ok(McEstimate::new(r, var.max(0.0).sqrt(), x.n.min(y.n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub value: f64,
    pub weight: f64,
}

/// Sufficient statistics for a self-normalized average `sum w f / sum w`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedMoments {
    pub n: u64,
    pub sw: f64,
    pub sw2: f64,
    pub swf: f64,
    pub sw2f: f64,
    pub sw2f2: f64,
}

impl WeightedMoments {
    #[inline]
    pub fn push(&mut self, weight: f64, f: f64) {
        self.n += 1;
        let w2 = weight * weight;
        self.sw += weight;
        self.sw2 += w2;
        self.swf += weight * f;
        self.sw2f += w2 * f;
        self.sw2f2 += w2 * f * f;
    }

    pub fn merge(&mut self, o: &WeightedMoments) {
        self.n += o.n;
        self.sw += o.sw;
        self.sw2 += o.sw2;
        self.swf += o.swf;
        self.sw2f += o.sw2f;
        self.sw2f2 += o.sw2f2;
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        if self.sw2 > 0.0 {
            self.sw * self.sw / self.sw2
        } else {
            0.0
        }
    }

    pub fn estimate(&self) -> Result<SelfNormalized> {
        if !(self.sw > 0.0) {
            return Err(Error::ZeroWeights);
        }
        let mu = self.swf / self.sw;
        let var = (self.sw2f2 - 2.0 * mu * self.sw2f + mu * mu * self.sw2) / (self.sw * self.sw);
        Ok(SelfNormalized { estimate: McEstimate::new(mu, var.max(0.0).sqrt(), self.n), ess: self.ess() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfNormalized {
    pub estimate: McEstimate,
    pub ess: f64,
}

pub fn self_normalized<F: Fn(f64) -> f64>(samples: &[WeightedSample], f: F) -> Result<SelfNormalized> {
    let mut m = WeightedMoments::default();
    for s in samples {
        m.push(s.weight, f(s.value));
    }
    let mut out = m.estimate()?;
    if samples.iter().all(|s| s.weight == samples[0].weight) {
        // equal weights: report the usual unbiased standard error
        out.estimate = samples.iter().map(|s| f(s.value)).collect::<Moments>().estimate();
    }
    Ok(out)
}

/// Effective sample size of a weight vector.
pub fn ess(weights: &[f64]) -> f64 {
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    if sw2 > 0.0 {
        sw * sw / sw2
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl KsResult {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        Self { statistic, threshold, pass: statistic < threshold }
    }
}

/// Sup-distance between the empirical distribution functions of two samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let wa: Vec<WeightedSample> = a.iter().map(|&value| WeightedSample { value, weight: 1.0 }).collect();
    let wb: Vec<WeightedSample> = b.iter().map(|&value| WeightedSample { value, weight: 1.0 }).collect();
    ks_weighted(&wa, &wb)
}

/// Sup-distance between two weighted empirical distribution functions.
pub fn ks_weighted(a: &[WeightedSample], b: &[WeightedSample]) -> f64 {
    let prep = |s: &[WeightedSample]| {
        let mut v: Vec<(f64, f64)> = s.iter().filter(|x| x.weight > 0.0).map(|x| (x.value, x.weight)).collect();
        v.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
        let total: f64 = v.iter().map(|x| x.1).sum();
        (v, total)
    };
    let (a, ta) = prep(a);
    let (b, tb) = prep(b);
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { 1.0 };
    }
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        d = d.max((fa / ta - fb / tb).abs());
    }
    d
}

/// Weighted empirical distribution function evaluated at sorted points.
pub fn weighted_ecdf_at(samples: &[WeightedSample], points: &[f64]) -> Vec<f64> {
    let mut v: Vec<(f64, f64)> = samples.iter().map(|x| (x.value, x.weight)).collect();
    v.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = v.iter().map(|x| x.1).sum();
    let mut out = Vec::with_capacity(points.len());
    let (mut k, mut acc) = (0, 0.0);
    for &p in points {
        while k < v.len() && v[k].0 <= p {
            acc += v[k].1;
            k += 1;
        }
        out.push(if total > 0.0 { acc / total } else { 0.0 });
    }
    out
}

/// Sup-distance over `grid` between a distribution function known on the
/// grid and the weighted empirical distribution of a sample.
pub fn ks_grid_vs_sample(grid: &[f64], cdf: &[f64], samples: &[WeightedSample]) -> f64 {
    let f = weighted_ecdf_at(samples, grid);
    grid.iter().zip(cdf).zip(&f).map(|((_, a), b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn wilson_interval(successes: u64, trials: u64) -> Proportion {
    if trials == 0 {
        return Proportion { successes, trials, estimate: 0.0, stderr: 0.5, ci_low: 0.0, ci_high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        ci_low: (center - half).max(0.0).min(p),
        ci_high: (center + half).min(1.0).max(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub used: Vec<f64>,
    /// `n` values dropped because `p <= 3 stderr`.
    pub excluded: Vec<f64>,
}

/// Weighted least squares of `log p` on `log n` for points `(n, p, stderr)`.
///
/// Weights are `(p / stderr)^2`, the inverse delta-method variance of
/// `log p`; when a stderr is zero the fit is unweighted. The slope error is
/// inflated by the reduced chi-square when the points scatter more than
/// their error bars allow.
pub fn powerlaw_slope_fit(points: &[(f64, f64, f64)]) -> Result<SlopeFit> {
    let (used, excluded): (Vec<&(f64, f64, f64)>, Vec<_>) = points.iter().partition(|(n, p, se)| *n > 0.0 && *p > 0.0 && *p > 3.0 * se);
    if used.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: used.len() });
    }
    let unweighted = used.iter().any(|p| p.2 <= 0.0);
    let pts: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|&(n, p, se)| (n.ln(), p.ln(), if unweighted { 1.0 } else { (p / se).powi(2) }))
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = (pts.len() - 2) as f64;
    let sxx: f64 = sxx;
    let stderr = if unweighted {
        (chi2 / dof / sxx).sqrt()
    } else {
        (1.0 / sxx).sqrt() * (chi2 / dof).max(1.0).sqrt()
    };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_low: slope - Z95 * stderr,
        ci_high: slope + Z95 * stderr,
        used: used.iter().map(|p| p.0).collect(),
        excluded: excluded.iter().map(|p| p.0).collect(),
    })
}
