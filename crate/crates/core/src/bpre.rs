//! Branching process in random environment.
//!
//! With geometric offspring `f(s) = e^{-x} / (1 + e^{-x} - s)` the quenched
//! law is explicit: with `A_k = sum_{j<=k} e^{-S_j}` and `H_k = 1 / A_k`,
//! `P_f(Z_n > 0) = H_n` and, given survival, `Z_n` is geometric on `{1, 2, ...}`
//! with success probability `H_n e^{-S_n}`. Everything here is evaluated in
//! log space because `S` swings by hundreds over a path.

use log::warn;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::env_laws::EnvironmentLaw;
use crate::error::{invalid, Error, Result};
use crate::estimators::{McEstimate, Moments, PairedMoments};
use crate::math::{log1m_exp, log_add_exp, log_sigmoid, sigmoid};
use crate::random_walk::WalkPath;
use crate::streams::replicate;

/// Running `log sum_j e^{-S_j}` kept as `(m, b)` with `m = min S_j` and
/// `b = sum_j e^{-(S_j - m)}`, so `b` stays in `[1, k + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSum {
    pub m: f64,
    pub b: f64,
}

impl ExpSum {
    /// The sum with the single term `e^{-S_0} = 1`.
    pub fn origin() -> Self {
        Self { m: 0.0, b: 1.0 }
    }

    /// Adds `e^{-s}` and returns `log(e^{-s} / new sum)`.
    #[inline]
    pub fn push(&mut self, s: f64) -> f64 {
        if s < self.m {
            self.b = self.b * (s - self.m).exp() + 1.0;
            self.m = s;
            -self.b.ln()
        } else {
            self.b += (self.m - s).exp();
            self.m - s - self.b.ln()
        }
    }

    /// `log A`.
    #[inline]
    pub fn log_sum(&self) -> f64 {
        -self.m + self.b.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OffspringLaw {
    /// `f_k = f_0 (1 - f_0)^k` with `f_0 = 1 / (1 + e^x)`; mean `e^x`.
    Geometric { x: f64 },
    /// Masses `f_0, ..., f_K`.
    FiniteSupport { probs: Vec<f64> },
}

impl OffspringLaw {
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("probs", "need nonnegative masses"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("probs", "masses must sum to 1"));
        }
        Ok(Self::FiniteSupport { probs })
    }

    pub fn f0(&self) -> f64 {
        match self {
            Self::Geometric { x } => sigmoid(-x),
            Self::FiniteSupport { probs } => probs[0],
        }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            Self::Geometric { x } => (log_sigmoid(-x) + k as f64 * log_sigmoid(*x)).exp(),
            Self::FiniteSupport { probs } => probs.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Geometric { x } => x.exp(),
            Self::FiniteSupport { probs } => probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
        }
    }

    pub fn pgf(&self, s: f64) -> f64 {
        match self {
            Self::Geometric { x } => {
                let e = (-x).exp();
                e / (1.0 + e - s)
            }
            Self::FiniteSupport { probs } => probs.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `sum_{k >= b} k^2 f_k`.
    pub fn second_moment_from(&self, b: usize) -> f64 {
        match self {
            Self::Geometric { x } => {
                let y = (-x).exp();
                let full = (2.0 + y) / (y * y);
                full - (0..b).map(|k| (k * k) as f64 * self.pmf(k)).sum::<f64>()
            }
            Self::FiniteSupport { probs } => probs.iter().enumerate().skip(b).map(|(k, p)| (k * k) as f64 * p).sum(),
        }
    }

    /// `log f'(1)`, the environment's increment.
    pub fn log_mean(&self) -> f64 {
        match self {
            Self::Geometric { x } => *x,
            Self::FiniteSupport { .. } => self.mean().ln(),
        }
    }

    /// Total offspring of `z` independent parents.
    pub fn sample_total<R: Rng + ?Sized>(&self, z: u64, rng: &mut R) -> f64 {
        match self {
            Self::Geometric { x } => {
                let ln_fail = log_sigmoid(*x);
                if z <= 16 {
                    let mut total = 0.0;
                    for _ in 0..z {
                        let u: f64 = rng.sample(Open01);
                        total += (u.ln() / ln_fail).floor();
                    }
                    total
                } else {
                    // negative binomial as a gamma mixture of Poissons
                    let odds = (-x).exp();
                    let lambda = Gamma::new(z as f64, 1.0 / odds).map(|g| g.sample(rng)).unwrap_or(0.0);
                    sample_poisson(lambda, rng)
                }
            }
            Self::FiniteSupport { probs } => {
                let mut left = z;
                let mut mass = 1.0;
                let mut total = 0.0;
                for (k, &p) in probs.iter().enumerate() {
                    if left == 0 {
                        break;
                    }
                    let c = if p >= mass || k + 1 == probs.len() {
                        left
                    } else {
                        Binomial::new(left, (p / mass).clamp(0.0, 1.0)).map(|b| b.sample(rng)).unwrap_or(0)
                    };
                    total += (k as u64 * c) as f64;
                    left -= c;
                    mass -= p;
                }
                total
            }
        }
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else if lambda > 1e15 {
        lambda.round()
    } else {
        Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(lambda.round())
    }
}

/// A realised environment with the exact quenched functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricEnvironment {
    pub walk: WalkPath,
    /// `log A_k`.
    pub log_a: Vec<f64>,
    /// `log pi_k` with `pi_k = H_k e^{-S_k}`, the success probability of `Z_k`
    /// given `Z_k > 0`. Kept in logs since `pi_k` underflows on high paths.
    pub log_pi: Vec<f64>,
}

impl GeometricEnvironment {
    pub fn new(walk: WalkPath) -> Self {
        let mut acc = ExpSum::origin();
        let mut log_a = Vec::with_capacity(walk.sums.len());
        let mut log_pi = Vec::with_capacity(walk.sums.len());
        log_a.push(0.0);
        log_pi.push(0.0);
        for &s in &walk.sums[1..] {
            log_pi.push(acc.push(s));
            log_a.push(acc.log_sum());
        }
        Self { walk, log_a, log_pi }
    }

    pub fn from_increments(xs: Vec<f64>) -> Self {
        Self::new(WalkPath::from_increments(xs))
    }

    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_empty()
    }

    pub fn h(&self, k: usize) -> f64 {
        (-self.log_a[k]).exp()
    }

    pub fn a(&self, k: usize) -> f64 {
        self.log_a[k].exp()
    }

    /// `P_f(Z_n > 0) = H_n`.
    pub fn survival(&self, n: usize) -> f64 {
        self.h(n)
    }

    /// `P_f(T = n) = H_{n-1} H_n e^{-S_n}`.
    pub fn extinction_at(&self, n: usize) -> f64 {
        assert!(n >= 1, "extinction time is at least one");
        (self.log_pi[n] - self.log_a[n - 1]).exp()
    }

    /// `P_f(Z_n = j)` for `j >= 1`.
    pub fn population_pmf(&self, n: usize, j: u64) -> f64 {
        assert!(j >= 1);
        let lp = self.log_pi[n];
        (-self.log_a[n] + lp + (j - 1) as f64 * (-lp.exp()).ln_1p()).exp()
    }

    /// `P_f(Z_{n-1} > a, T = n)` with `a = floor(e^{log_threshold})`, or `a = 0`
    /// when `log_threshold = -inf`.
    pub fn joint_tail_log(&self, n: usize, log_threshold: f64) -> f64 {
        assert!(n >= 1);
        joint_tail_parts(self.log_a[n - 1], self.log_pi[n - 1], self.walk.increments[n - 1], log_threshold).exp()
    }

    /// `P_f(Z_{n-1} > a, T = n)` for an integer threshold.
    pub fn joint_tail(&self, n: usize, a: u64) -> f64 {
        self.joint_tail_log(n, if a == 0 { f64::NEG_INFINITY } else { (a as f64).ln() })
    }

    /// `P_f(Z_k > a, T = n)` for `k < n`, with `a` given as in
    /// [`joint_tail_log`](Self::joint_tail_log).
    pub fn generation_tail_log(&self, k: usize, n: usize, log_threshold: f64) -> f64 {
        assert!(k < n && n <= self.len());
        let (d1, d2) = suffix_log_sums(&self.walk.sums, k, n);
        generation_tail(self.log_a[k], self.log_pi[k], self.walk.sums[n] - self.walk.sums[k], d1, d2, log_threshold)
            .min(self.extinction_at(n))
    }
}

/// `log sum_{j=k}^{n-1} e^{-(S_j - S_k)}` and the same sum up to `n`.
pub fn suffix_log_sums(sums: &[f64], k: usize, n: usize) -> (f64, f64) {
    let base = sums[k];
    let mut acc = ExpSum::origin();
    for &s in &sums[k + 1..n] {
        acc.push(s - base);
    }
    let d1 = acc.log_sum();
    acc.push(sums[n] - base);
    (d1, acc.log_sum())
}

/// `floor(e^{log_a})`, where values within rounding of an integer count as
/// that integer so that `ln 7` means 7.
pub fn threshold(log_a: f64) -> f64 {
    if log_a == f64::NEG_INFINITY {
        return 0.0;
    }
    let v = log_a.exp();
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        v.floor()
    }
}

/// `floor(e^{log_a}) * ln_q` for `ln_q <= 0`, exact in the integer part while
/// `a` is representable and continuous beyond.
#[inline]
fn floor_times(log_a: f64, ln_q: f64) -> f64 {
    if log_a == f64::NEG_INFINITY || ln_q == 0.0 {
        0.0
    } else if log_a < 36.0 {
        let a = threshold(log_a);
        if a == 0.0 {
            0.0
        } else {
            a * ln_q
        }
    } else {
        -(log_a + (-ln_q).ln()).exp()
    }
}

/// `log P_f(Z_{n-1} > a, T = n)` from `log A_{n-1}`, `log pi_{n-1}` and `X_n`.
///
/// `Z_{n-1}` given survival is geometric with success `pi` and each parent's
/// line dies out with probability `g = 1 / (1 + e^{X_n})`, so the tail sums to
/// `H pi g (r g)^a / (1 - r g)` with `r = 1 - pi` and `1 - r g = sigmoid(X_n) + g pi`.
#[inline]
pub fn joint_tail_parts(log_a_prev: f64, log_pi_prev: f64, x_last: f64, log_threshold: f64) -> f64 {
    let ln_g = log_sigmoid(-x_last);
    let ln_rg = log1m_exp(log_pi_prev) + ln_g;
    let ln_denom = log_add_exp(log_sigmoid(x_last), ln_g + log_pi_prev);
    -log_a_prev + log_pi_prev + ln_g + floor_times(log_threshold, ln_rg) - ln_denom
}

/// `P_f(Z_k > a, T = n)` for `k < n` from the quantities at generation `k`.
///
/// One individual at generation `k` leaves descendants at generation `m` with
/// probability `eps_m = 1 / D_m`, `D_m = sum_{j=k}^m e^{-(S_j - S_k)}`; with
/// `s_1 = 1 - eps_{n-1}`, `s_2 = 1 - eps_n` the event `T = n` has conditional
/// probability `s_2^j - s_1^j` given `Z_k = j`. The difference is expanded so
/// that no two nearly equal terms are subtracted.
pub fn generation_tail(log_a_k: f64, log_pi_k: f64, rise_to_n: f64, log_d1: f64, log_d2: f64, log_threshold: f64) -> f64 {
    let ln_r = log1m_exp(log_pi_k);
    // log(1 - r s) = log(pi + eps (1 - pi)) with s = 1 - eps
    let ln_one_minus_rs = |log_eps: f64| log_add_exp(log_pi_k, log_eps + ln_r);
    let log_c = -log_a_k + log_pi_k;
    let ln_s2 = log1m_exp(-log_d2);
    let a = threshold(log_threshold);
    if ln_s2 == f64::NEG_INFINITY || (ln_r == f64::NEG_INFINITY && a > 0.0) {
        return 0.0;
    }
    if log_d1 <= 0.0 {
        // k = n - 1: every parent is alive at n - 1, s_1 = 0
        return (log_c + ln_s2 + floor_times(log_threshold, ln_r + ln_s2) - ln_one_minus_rs(-log_d2)).exp();
    }
    let ln_s1 = log1m_exp(-log_d1);
    // delta = s_2 - s_1 = e^{-(S_n - S_k)} eps_1 eps_2 and L = log(s_2 / s_1)
    let q = -rise_to_n - log_d1 - log_d2 - ln_s1;
    let l = if q > 700.0 { q } else { q.exp().ln_1p() };
    let log_l = if q < -30.0 { q } else { l.ln() };
    let log_expm1_l = if l > 700.0 {
        l
    } else if l < 1e-10 {
        log_l
    } else {
        l.exp_m1().ln()
    };
    let log_tail_part = if a == 0.0 {
        f64::NEG_INFINITY
    } else if a * l < 1e-10 {
        a.ln() + log_l
    } else {
        log1m_exp(-a * l)
    };
    let log_bracket = log_add_exp(log_expm1_l, ln_one_minus_rs(-log_d2) + log_tail_part);
    let log_p = log_c + ln_s1 + floor_times(log_threshold, ln_r + ln_s2) + log_bracket
        - ln_one_minus_rs(-log_d1)
        - ln_one_minus_rs(-log_d2);
    log_p.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationTrajectory {
    /// `Z_0 = 1, Z_1, ...`; ends with `0` when extinct.
    pub sizes: Vec<f64>,
    pub extinction_time: Option<usize>,
    pub capped: bool,
}

/// Forward simulation through a fixed sequence of offspring laws. Stops at
/// extinction, at the end of the sequence, or once the population passes `cap`.
pub fn simulate_population<R: Rng + ?Sized>(laws: &[OffspringLaw], rng: &mut R, cap: f64) -> PopulationTrajectory {
    let mut sizes = vec![1.0];
    let mut z = 1.0f64;
    for (k, law) in laws.iter().enumerate() {
        if z > cap {
            return PopulationTrajectory { sizes, extinction_time: None, capped: true };
        }
        z = law.sample_total(z as u64, rng);
        sizes.push(z);
        if z == 0.0 {
            return PopulationTrajectory { sizes, extinction_time: Some(k + 1), capped: false };
        }
    }
    let capped = z > cap;
    PopulationTrajectory { sizes, extinction_time: None, capped }
}

/// Draws the environment generation by generation from `law` while the
/// population is alive.
pub fn simulate_population_in_law<R: Rng + ?Sized>(
    law: &EnvironmentLaw,
    generations: usize,
    rng: &mut R,
    cap: f64,
) -> PopulationTrajectory {
    let mut sizes = vec![1.0];
    let mut z = 1.0f64;
    for k in 0..generations {
        if z > cap {
            return PopulationTrajectory { sizes, extinction_time: None, capped: true };
        }
        let x = law.sample(rng);
        z = OffspringLaw::Geometric { x }.sample_total(z as u64, rng);
        sizes.push(z);
        if z == 0.0 {
            return PopulationTrajectory { sizes, extinction_time: Some(k + 1), capped: false };
        }
    }
    PopulationTrajectory { sizes, extinction_time: None, capped: z > cap }
}

/// Offspring family indexed by the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OffspringFamily {
    /// Geometric law with log-mean `X` drawn from the environment law.
    Geometric,
    /// The same finite law in every generation.
    Fixed { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaDiagnostic {
    pub b: usize,
    pub delta: f64,
    pub samples: u64,
    pub max: f64,
    /// `E (log+ zeta(b))^{alpha + delta}`.
    pub moment_estimate: McEstimate,
    /// `(z, P(zeta(b) > z))`.
    pub tail: Vec<(f64, f64)>,
}

/// `zeta(b) = e^{-2X} sum_{k >= b} k^2 f_k` for one generation's law.
pub fn zeta(law: &OffspringLaw, b: usize) -> f64 {
    match law {
        OffspringLaw::Geometric { x } => {
            // e^{-2x} (2 + y) / y^2 = 2 + y with y = e^{-x}, minus the first b terms
            let y = (-x).exp();
            let head: f64 = (1..b).map(|k| (k * k) as f64 * law.pmf(k)).sum();
            2.0 + y - y * y * head
        }
        OffspringLaw::FiniteSupport { .. } => {
            let x = law.log_mean();
            (-2.0 * x).exp() * law.second_moment_from(b)
        }
    }
}

pub fn zeta_and_moment_check<R: Rng + ?Sized>(
    family: &OffspringFamily,
    law: &EnvironmentLaw,
    b: usize,
    delta: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<ZetaDiagnostic> {
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let power = law.alpha() + delta;
    let mut values = Vec::with_capacity(n_samples as usize);
    for _ in 0..n_samples {
        let offspring = match family {
            OffspringFamily::Geometric => OffspringLaw::Geometric { x: law.sample(rng) },
            OffspringFamily::Fixed { probs } => OffspringLaw::finite(probs.clone())?,
        };
        values.push(zeta(&offspring, b));
    }
    let moments: Moments = values.iter().map(|z| z.ln().max(0.0).powf(power)).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let tail = [1.0, 2.0, 4.0, 10.0, 100.0, 1e4]
        .iter()
        .map(|&z| (z, values.iter().filter(|&&v| v > z).count() as f64 / values.len().max(1) as f64))
        .collect();
    Ok(ZetaDiagnostic { b, delta, samples: n_samples, max, moment_estimate: moments.estimate(), tail })
}

/// Exact `P(T = n)` for a two-point environment by enumerating all `2^n`
/// sign sequences.
pub fn brute_force_extinction(law: &EnvironmentLaw, n: usize) -> Result<f64> {
    Ok(enumerate_two_point(law, n)?.0)
}

/// Exact `P(T > n) = E[H_n]` for a two-point environment.
pub fn brute_force_survival(law: &EnvironmentLaw, n: usize) -> Result<f64> {
    Ok(enumerate_two_point(law, n)?.1)
}

fn enumerate_two_point(law: &EnvironmentLaw, n: usize) -> Result<(f64, f64)> {
    let EnvironmentLaw::TwoPoint { a, w } = *law else {
        return Err(invalid("law", "enumeration needs a two-point law"));
    };
    if n == 0 || n > 20 {
        return Err(invalid("n", "enumeration is limited to 1 <= n <= 20"));
    }
    fn dfs(a: f64, w: f64, left: usize, s: f64, acc: ExpSum, prob: f64, out: &mut (f64, f64)) {
        if prob == 0.0 {
            return;
        }
        if left == 0 {
            out.1 += prob * (-acc.log_sum()).exp();
            return;
        }
        for (step, p) in [(a, w), (-a, 1.0 - w)] {
            let mut next = acc;
            let s2 = s + step;
            let log_pi = next.push(s2);
            if left == 1 {
                out.0 += prob * p * (log_pi - acc.log_sum()).exp();
            }
            dfs(a, w, left - 1, s2, next, prob * p, out);
        }
    }
    let mut out = (0.0, 0.0);
    dfs(a, w, n, 0.0, ExpSum::origin(), 1.0, &mut out);
    Ok(out)
}

/// Annealed `P(T = n)` as the mean of `P_f(T = n)` over environments.
pub fn annealed_extinction_estimate(law: &EnvironmentLaw, n: usize, n_envs: u64, seed: u64, replicas: usize) -> Result<McEstimate> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let parts = replicate(seed, replicas, n_envs, |rng, share| {
        let mut m = Moments::default();
        for _ in 0..share {
            let mut acc = ExpSum::origin();
            let mut s = 0.0;
            let mut log_a_prev = 0.0;
            let mut log_pi = 0.0;
            for _ in 0..n {
                log_a_prev = acc.log_sum();
                s += law.sample(rng);
                log_pi = acc.push(s);
            }
            m.push((log_pi - log_a_prev).exp());
        }
        m
    });
    Ok(merge_moments(&parts).estimate().clamp_unit())
}

/// Rao-Blackwellized and indicator estimates of `P(T = n)` computed on the
/// same environments; the indicator comes from simulating one population in
/// each environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedExtinction {
    pub rao_blackwell: McEstimate,
    pub indicator: McEstimate,
}

pub fn paired_extinction_comparison(
    law: &EnvironmentLaw,
    n: usize,
    n_envs: u64,
    seed: u64,
    replicas: usize,
) -> Result<PairedExtinction> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let parts = replicate(seed, replicas, n_envs, |rng, share| {
        let mut pm = PairedMoments::default();
        let mut xs = Vec::with_capacity(n);
        for _ in 0..share {
            xs.clear();
            xs.extend((0..n).map(|_| law.sample(rng)));
            let env = GeometricEnvironment::from_increments(xs.clone());
            let laws: Vec<OffspringLaw> = xs.iter().map(|&x| OffspringLaw::Geometric { x }).collect();
            let pop = simulate_population(&laws, rng, f64::INFINITY);
            pm.push(env.extinction_at(n), (pop.extinction_time == Some(n)) as u8 as f64);
        }
        pm
    });
    let mut pm = PairedMoments::default();
    for p in &parts {
        pm.merge(p);
    }
    Ok(PairedExtinction { rao_blackwell: pm.x().estimate().clamp_unit(), indicator: pm.y().estimate().clamp_unit() })
}

fn merge_moments(parts: &[Moments]) -> Moments {
    let mut m = Moments::default();
    for p in parts {
        m.merge(p);
    }
    m
}

/// Estimates along a grid of `n` from one pass of walks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionRow {
    pub n: usize,
    /// `P(T = n)` with the last increment integrated out.
    pub extinction: McEstimate,
    /// `P(T > n) = E[H_n]`.
    pub survival: McEstimate,
    /// `P(T- = n)` by counting.
    pub ladder_count: McEstimate,
    /// `P(T- = n)` as the mean of `P(X < -S_{n-1}); T- > n - 1`.
    pub ladder_rb: McEstimate,
    /// `P(T- > n - 1)` and `P(T- > n)` by counting.
    pub ladder_survival_prev: McEstimate,
    pub ladder_survival: McEstimate,
    /// `n P(T- = n) / P(T- > n - 1)`.
    pub ladder_hazard: Option<McEstimate>,
    /// `P(T = n) / P(T- = n)`.
    pub extinction_ratio: Option<McEstimate>,
    /// `P(T > n) / P(T- > n)`.
    pub theta: Option<McEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub walks: u64,
    /// Walks are dropped once `log A` exceeds this; their remaining
    /// contributions are below `e^{-prune}`.
    pub prune_log_a: f64,
    pub seed: u64,
    pub replicas: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { walks: 100_000, prune_log_a: 40.0, seed: 0, replicas: 1 }
    }
}

#[derive(Clone, Default)]
struct ProfileAcc {
    // per grid point, paired so that ratios can use the covariance
    ext_vs_ladder: Vec<PairedMoments>,
    surv_vs_ladder: Vec<PairedMoments>,
    hazard: Vec<PairedMoments>,
    ladder_count: Vec<Moments>,
}

impl ProfileAcc {
    fn new(k: usize) -> Self {
        Self {
            ext_vs_ladder: vec![PairedMoments::default(); k],
            surv_vs_ladder: vec![PairedMoments::default(); k],
            hazard: vec![PairedMoments::default(); k],
            ladder_count: vec![Moments::default(); k],
        }
    }

    fn merge(&mut self, o: &ProfileAcc) {
        for i in 0..self.hazard.len() {
            self.ext_vs_ladder[i].merge(&o.ext_vs_ladder[i]);
            self.surv_vs_ladder[i].merge(&o.surv_vs_ladder[i]);
            self.hazard[i].merge(&o.hazard[i]);
            self.ladder_count[i].merge(&o.ladder_count[i]);
        }
    }
}

/// `P(T = n)`, `P(T > n)` and the ladder probabilities of the walk for every
/// `n` in `ns`, with the laws of the last increment integrated exactly.
pub fn extinction_profile(law: &EnvironmentLaw, ns: &[usize], opts: &ProfileOptions) -> Result<Vec<ExtinctionRow>> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(invalid("ns", "need a nonempty grid of positive n"));
    }
    if law.logistic_mean(0.0).is_none() {
        return Err(Error::SurvivalUnavailable("the extinction profile needs the law's distribution function"));
    }
    let mut grid: Vec<usize> = ns.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let horizon = *grid.last().unwrap();
    let mut slot = vec![usize::MAX; horizon + 1];
    for (i, &n) in grid.iter().enumerate() {
        slot[n] = i;
    }
    let k = grid.len();
    let parts = replicate(opts.seed, opts.replicas, opts.walks, |rng, share| {
        let mut acc = ProfileAcc::new(k);
        let mut rec = vec![(0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64); k];
        for _ in 0..share {
            // per grid point: (P_f(T = n) integrated, H_n, 1{T- = n}, 1{T- > n - 1}, F(-S_{n-1}) 1{T- > n - 1}, 1{T- > n})
            for r in rec.iter_mut() {
                *r = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            }
            let mut acc_a = ExpSum::origin();
            let mut s = 0.0;
            let mut ladder_alive = true;
            for step in 1..=horizon {
                let log_a_prev = acc_a.log_sum();
                if log_a_prev > opts.prune_log_a && !ladder_alive {
                    break;
                }
                let i = slot[step];
                if i != usize::MAX {
                    let c = -s - log_a_prev;
                    let phi = law.logistic_mean(c).unwrap_or(0.0);
                    rec[i].0 = (-log_a_prev).exp() * phi;
                    if ladder_alive {
                        rec[i].3 = 1.0;
                        rec[i].4 = law.cdf_strict(-s).unwrap_or(0.0);
                    }
                }
                s += law.sample(rng);
                acc_a.push(s);
                if ladder_alive && s < 0.0 {
                    ladder_alive = false;
                    if i != usize::MAX {
                        rec[i].2 = 1.0;
                    }
                }
                if i != usize::MAX {
                    rec[i].1 = (-acc_a.log_sum()).exp();
                    rec[i].5 = ladder_alive as u8 as f64;
                }
            }
            for i in 0..k {
                let r = rec[i];
                acc.ext_vs_ladder[i].push(r.0, r.4);
                acc.surv_vs_ladder[i].push(r.1, r.5);
                acc.hazard[i].push(r.4, r.3);
                acc.ladder_count[i].push(r.2);
            }
        }
        acc
    });
    let mut acc = ProfileAcc::new(k);
    for p in &parts {
        acc.merge(p);
    }
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let ev = &acc.ext_vs_ladder[i];
            let sv = &acc.surv_vs_ladder[i];
            let hz = &acc.hazard[i];
            ExtinctionRow {
                n,
                extinction: ev.x().estimate().clamp_unit(),
                survival: sv.x().estimate().clamp_unit(),
                ladder_count: acc.ladder_count[i].estimate().clamp_unit(),
                ladder_rb: ev.y().estimate().clamp_unit(),
                ladder_survival_prev: hz.y().estimate().clamp_unit(),
                ladder_survival: sv.y().estimate().clamp_unit(),
                ladder_hazard: hz.ratio().ok().map(|r| r.scale(n as f64)),
                extinction_ratio: ev.ratio().ok(),
                theta: sv.ratio().ok(),
            }
        })
        .collect();
    Ok(rows)
}

/// Settings for the annealed estimators conditioned on `T = n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub n: usize,
    /// Thresholds `log a` for `P(Z_{n-1} > a, T = n)`; `-inf` means `a = 0`.
    pub log_thresholds: Vec<f64>,
    /// Generations `k < n` at which the law of `log Z_k` given `T = n` is tabulated.
    #[serde(default)]
    pub generations: Vec<usize>,
    /// Points `log z` at which those distribution functions are evaluated.
    #[serde(default)]
    pub log_z_grid: Vec<f64>,
    /// Fraction of environments with `T- <= n - 1` that are followed; the
    /// rest are dropped at their first negative step and the kept ones carry
    /// weight `1 / keep_fraction`. `1` is the plain single-stage estimator.
    pub keep_fraction: f64,
    /// Draw `X_n` from a defensive mixture that favours the large negative
    /// jumps causing extinction.
    pub importance: bool,
    pub prune_log_a: f64,
}

impl JointConfig {
    pub fn new(n: usize, log_thresholds: Vec<f64>) -> Self {
        Self {
            n,
            log_thresholds,
            generations: Vec::new(),
            log_z_grid: Vec::new(),
            keep_fraction: 1.0,
            importance: true,
            prune_log_a: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointRow {
    pub log_threshold: f64,
    /// `P(Z_{n-1} > a, T = n)`.
    pub joint: McEstimate,
    /// `P(Z_{n-1} > a | T = n)`.
    pub conditional: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTable {
    pub n: usize,
    pub envs: u64,
    /// Environments with `T- > n - 1`.
    pub positive_stratum: u64,
    /// Environments with `T- <= n - 1` that were followed.
    pub kept_other: u64,
    pub extinction: McEstimate,
    pub rows: Vec<JointRow>,
    /// Per generation, `P(log Z_k <= log z | T = n)` on `log_z_grid`.
    pub cdfs: Vec<Vec<f64>>,
    /// Effective sample size of the mixture over environments given `T = n`.
    pub ess: f64,
}

#[derive(Clone)]
struct JointAcc {
    ext: Moments,
    rows: Vec<PairedMoments>,
    cdf_num: Vec<Vec<f64>>,
    sw: f64,
    sw2: f64,
    positive: u64,
    kept: u64,
}

impl JointAcc {
    fn new(cfg: &JointConfig) -> Self {
        Self {
            ext: Moments::default(),
            rows: vec![PairedMoments::default(); cfg.log_thresholds.len()],
            cdf_num: vec![vec![0.0; cfg.log_z_grid.len()]; cfg.generations.len()],
            sw: 0.0,
            sw2: 0.0,
            positive: 0,
            kept: 0,
        }
    }

    fn merge(&mut self, o: &JointAcc) {
        self.ext.merge(&o.ext);
        for (a, b) in self.rows.iter_mut().zip(&o.rows) {
            a.merge(b);
        }
        for (a, b) in self.cdf_num.iter_mut().zip(&o.cdf_num) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.sw += o.sw;
        self.sw2 += o.sw2;
        self.positive += o.positive;
        self.kept += o.kept;
    }

    fn push_zero(&mut self) {
        self.ext.push(0.0);
        for r in self.rows.iter_mut() {
            r.push(0.0, 0.0);
        }
    }
}

/// Annealed estimates of `P(Z_{n-1} > a, T = n)` and of the laws of
/// `log Z_k` given `T = n`, averaging the exact quenched probabilities over
/// environments. Environments are split into `T- > n - 1`, which carries
/// most of the mass, and its complement, which is thinned.
pub fn annealed_joint_estimate(law: &EnvironmentLaw, cfg: &JointConfig, n_envs: u64, seed: u64, replicas: usize) -> Result<JointTable> {
    let n = cfg.n;
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(cfg.keep_fraction >= 0.0 && cfg.keep_fraction <= 1.0) {
        return Err(invalid("keep_fraction", "must lie in [0, 1]"));
    }
    if cfg.generations.iter().any(|&k| k >= n) {
        return Err(invalid("generations", "must be below n"));
    }
    let parts = replicate(seed, replicas, n_envs, |rng, share| {
        let mut acc = JointAcc::new(cfg);
        let mut xs = vec![0.0; n];
        let mut sums = vec![0.0; n + 1];
        let mut log_a = vec![0.0; n + 1];
        let mut log_pi = vec![0.0; n + 1];
        let mut tails = vec![0.0; cfg.log_thresholds.len()];
        'env: for _ in 0..share {
            let mut weight = 1.0;
            let mut positive = true;
            let mut acc_a = ExpSum::origin();
            for k in 1..n {
                let x = law.sample(rng);
                xs[k - 1] = x;
                sums[k] = sums[k - 1] + x;
                log_pi[k] = acc_a.push(sums[k]);
                log_a[k] = acc_a.log_sum();
                if positive && sums[k] < 0.0 {
                    positive = false;
                    if cfg.keep_fraction < 1.0 {
                        if rng.random::<f64>() >= cfg.keep_fraction {
                            acc.push_zero();
                            continue 'env;
                        }
                        weight /= cfg.keep_fraction;
                    }
                }
                if log_a[k] > cfg.prune_log_a {
                    acc.push_zero();
                    continue 'env;
                }
            }
            if positive {
                acc.positive += 1;
            } else {
                acc.kept += 1;
            }
            // last increment: extinction needs X_n around -S_{n-1} - log A_{n-1}
            let centre = -sums[n - 1] - log_a[n - 1];
            let x_last = if cfg.importance {
                let t = centre + 2.0;
                match law.cdf(t) {
                    Ok(mass) if mass > 0.0 && mass < 1.0 => {
                        let x = if rng.random::<f64>() < 0.5 {
                            law.sample(rng)
                        } else {
                            law.sample_at_most(t, rng).map(|p| p.0).unwrap_or_else(|| law.sample(rng))
                        };
                        let density_ratio = 0.5 + if x <= t { 0.5 / mass } else { 0.0 };
                        weight /= density_ratio;
                        x
                    }
                    _ => law.sample(rng),
                }
            } else {
                law.sample(rng)
            };
            xs[n - 1] = x_last;
            sums[n] = sums[n - 1] + x_last;
            log_pi[n] = acc_a.push(sums[n]);
            log_a[n] = acc_a.log_sum();
            let p = (log_pi[n] - log_a[n - 1]).exp();
            acc.ext.push(weight * p);
            for (j, &lt) in cfg.log_thresholds.iter().enumerate() {
                tails[j] = joint_tail_parts(log_a[n - 1], log_pi[n - 1], x_last, lt).exp().min(p);
                acc.rows[j].push(weight * tails[j], weight * p);
            }
            if p > 0.0 {
                let wp = weight * p;
                acc.sw += wp;
                acc.sw2 += wp * wp;
                for (g, &k) in cfg.generations.iter().enumerate() {
                    let (d1, d2) = if k + 1 == n { (0.0, 0.0) } else { suffix_log_sums(&sums, k, n) };
                    for (y, &lz) in cfg.log_z_grid.iter().enumerate() {
                        let tail = if k == 0 {
                            // Z_0 = 1
                            if lz >= 0.0 {
                                0.0
                            } else {
                                p
                            }
                        } else if k + 1 == n {
                            joint_tail_parts(log_a[k], log_pi[k], x_last, floor_log(lz)).exp()
                        } else {
                            generation_tail(log_a[k], log_pi[k], sums[n] - sums[k], d1, d2, floor_log(lz))
                        };
                        acc.cdf_num[g][y] += weight * (p - tail.clamp(0.0, p));
                    }
                }
            }
        }
        acc
    });
    let mut acc = JointAcc::new(cfg);
    for p in &parts {
        acc.merge(p);
    }
    let extinction = acc.ext.estimate().clamp_unit();
    let rows = cfg
        .log_thresholds
        .iter()
        .zip(&acc.rows)
        .map(|(&lt, pm)| JointRow {
            log_threshold: lt,
            joint: pm.x().estimate().clamp_unit(),
            conditional: pm.ratio().ok().map(|r| r.clamp_unit()),
        })
        .collect();
    let cdfs = acc
        .cdf_num
        .iter()
        .map(|row| row.iter().map(|v| if acc.sw > 0.0 { (v / acc.sw).clamp(0.0, 1.0) } else { 0.0 }).collect())
        .collect();
    let ess = if acc.sw2 > 0.0 { acc.sw * acc.sw / acc.sw2 } else { 0.0 };
    if ess < 100.0 {
        warn!("effective sample size {ess:.0} given T = {n} is below 100");
    }
    Ok(JointTable { n, envs: n_envs, positive_stratum: acc.positive, kept_other: acc.kept, extinction, rows, cdfs, ess })
}

/// `log z` grid points become thresholds `a = floor(z)`; negative ones mean `a = 0`.
fn floor_log(lz: f64) -> f64 {
    if lz < 0.0 {
        f64::NEG_INFINITY
    } else {
        lz
    }
}
