//! The associated random walk `S_n = X_1 + ... + X_n`: path statistics, the
//! renewal function `V` of the strict descending ladder heights, the walk
//! conditioned to stay nonnegative, meander samples and the overshoot /
//! undershoot tables at the first passage below zero.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env_laws::{EnvironmentLaw, Normalization};
use crate::error::{invalid, Error, Result};
use crate::estimators::{wilson_interval, Proportion};
use crate::streams::replicate;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub increments: Vec<f64>,
    /// `S_0 = 0, S_1, ..., S_n`.
    pub sums: Vec<f64>,
}

impl WalkPath {
    pub fn from_increments(increments: Vec<f64>) -> Self {
        let mut sums = Vec::with_capacity(increments.len() + 1);
        let mut s = 0.0;
        sums.push(s);
        for &x in &increments {
            s += x;
            sums.push(s);
        }
        Self { increments, sums }
    }

    /// Rebuilds the increments from partial sums; `sums[0]` must be zero.
    pub fn from_sums(sums: Vec<f64>) -> Result<Self> {
        if sums.first() != Some(&0.0) {
            return Err(invalid("sums", "must start at S_0 = 0"));
        }
        let increments = sums.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { increments, sums })
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

pub fn simulate_path<R: Rng + ?Sized>(law: &EnvironmentLaw, n: usize, rng: &mut R) -> WalkPath {
    WalkPath::from_increments((0..n).map(|_| law.sample(rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    /// First `k >= 1` with `S_k < 0`.
    pub t_minus: Option<usize>,
    /// First `k >= 1` with `S_k <= 0`.
    pub tau_minus: Option<usize>,
    pub min: f64,
    pub max: f64,
    /// First index attaining `min`.
    pub argmin: usize,
    /// Strict descending ladder epochs after `T_0 = 0`.
    pub ladder_epochs: Vec<usize>,
    pub ladder_heights: Vec<f64>,
}

pub fn path_statistics(path: &WalkPath) -> PathStats {
    let mut st = PathStats {
        t_minus: None,
        tau_minus: None,
        min: 0.0,
        max: 0.0,
        argmin: 0,
        ladder_epochs: Vec::new(),
        ladder_heights: Vec::new(),
    };
    for (k, &s) in path.sums.iter().enumerate().skip(1) {
        if st.tau_minus.is_none() && s <= 0.0 {
            st.tau_minus = Some(k);
        }
        if st.t_minus.is_none() && s < 0.0 {
            st.t_minus = Some(k);
        }
        if s < st.min {
            st.min = s;
            st.argmin = k;
            st.ladder_epochs.push(k);
            st.ladder_heights.push(s);
        }
        st.max = st.max.max(s);
    }
    st
}

/// Renewal function `V(x) = sum_j P(S_{T_j} >= -x)` tabulated on a grid.
///
/// Between grid points `V` is interpolated linearly; above the grid it is
/// continued with the last slope, and `V(x) = 0` for `x < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub samples_used: u64,
    /// Chains whose ladder heights passed below `-max(grid)`.
    pub chains_reaching_depth: u64,
    /// Ladder epochs abandoned after the walk escaped far above its minimum.
    pub escaped_epochs: u64,
}

impl RenewalTable {
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(invalid("values", "must match the grid length"));
        }
        let (grid, values) = with_origin(grid, values);
        Ok(Self { grid, values, samples_used: 0, chains_reaching_depth: 0, escaped_epochs: 0 })
    }

    /// Exact `V` of the two-point walk on the lattice `a Z`, up to `k_max a`.
    ///
    /// Ladder heights are `-a, -2a, ...` and level `-j a` is ever reached with
    /// probability `r^j`, `r = min(1, (1 - w) / w)`.
    pub fn exact_two_point(a: f64, w: f64, k_max: usize) -> Self {
        let r = if w > 0.0 { ((1.0 - w) / w).min(1.0) } else { 1.0 };
        let mut values = Vec::with_capacity(k_max + 1);
        let (mut v, mut term) = (0.0, 1.0);
        for _ in 0..=k_max {
            v += term;
            term *= r;
            values.push(v);
        }
        let grid = (0..=k_max).map(|k| k as f64 * a).collect();
        Self { grid, values, samples_used: 0, chains_reaching_depth: 0, escaped_epochs: 0 }
    }

    pub fn max_x(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let g = &self.grid;
        let v = &self.values;
        if g.len() == 1 {
            return v[0];
        }
        let i = g.partition_point(|&p| p <= x);
        let i = i.clamp(1, g.len() - 1);
        let (x0, x1, v0, v1) = (g[i - 1], g[i], v[i - 1], v[i]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Step-function reading `V(x) = V(grid[i])` for the largest `grid[i] <= x`.
    /// This is the right reading for lattice laws whose `V` jumps at grid points.
    pub fn eval_step(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let i = self.grid.partition_point(|&p| p <= x * (1.0 + 1e-12) + 1e-300);
        self.values[i.saturating_sub(1)]
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid", "must be nonempty"));
    }
    if grid.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("grid", "points must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid", "must be strictly increasing"));
    }
    Ok(())
}

fn with_origin(mut grid: Vec<f64>, mut values: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    if grid[0] > 0.0 {
        grid.insert(0, 0.0);
        values.insert(0, 1.0);
    } else {
        values[0] = 1.0;
    }
    (grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalOptions {
    pub chains: u64,
    /// A ladder epoch is abandoned once the walk climbs this many multiples of
    /// `max(grid)` above its running minimum.
    pub escape_factor: f64,
    pub seed: u64,
    pub replicas: usize,
}

impl Default for RenewalOptions {
    fn default() -> Self {
        Self { chains: 100_000, escape_factor: 64.0, seed: 0, replicas: 1 }
    }
}

struct LadderCounts {
    bins: Vec<u64>,
    reached: u64,
    escaped: u64,
}

/// Estimates `V` on `grid` from independent ladder chains. Each chain runs
/// until its ladder height drops below `-max(grid)`; later heights cannot
/// contribute to `V` on the grid.
pub fn renewal_function_estimate(law: &EnvironmentLaw, grid: &[f64], opts: &RenewalOptions) -> Result<RenewalTable> {
    validate_grid(grid)?;
    if opts.chains < 10_000 {
        return Err(invalid("chains", "need at least 10^4 ladder chains"));
    }
    let depth = *grid.last().unwrap();
    let escape = opts.escape_factor * depth.max(f64::MIN_POSITIVE);
    let parts = replicate(opts.seed, opts.replicas, opts.chains, |rng, share| {
        let mut acc = LadderCounts { bins: vec![0; grid.len()], reached: 0, escaped: 0 };
        for _ in 0..share {
            ladder_chain(law, grid, depth, escape, rng, &mut acc);
        }
        acc
    });
    let mut bins = vec![0u64; grid.len()];
    let (mut reached, mut escaped) = (0, 0);
    for p in parts {
        for (b, c) in bins.iter_mut().zip(&p.bins) {
            *b += c;
        }
        reached += p.reached;
        escaped += p.escaped;
    }
    if reached < 100 {
        warn!("only {reached} ladder chains passed depth {depth}; the tail of V is under-resolved");
    }
    let n = opts.chains as f64;
    let mut cum = 0u64;
    let values = bins
        .iter()
        .map(|&b| {
            cum += b;
            1.0 + cum as f64 / n
        })
        .collect();
    let (grid, values) = with_origin(grid.to_vec(), values);
    Ok(RenewalTable { grid, values, samples_used: opts.chains, chains_reaching_depth: reached, escaped_epochs: escaped })
}

fn ladder_chain<R: Rng + ?Sized>(law: &EnvironmentLaw, grid: &[f64], depth: f64, escape: f64, rng: &mut R, acc: &mut LadderCounts) {
    let (mut s, mut m) = (0.0f64, 0.0f64);
    loop {
        s += law.sample(rng);
        if s < m {
            m = s;
            if -m > depth {
                acc.reached += 1;
                return;
            }
            // heights at depth d count towards V(x) for every grid x >= d
            acc.bins[grid.partition_point(|&g| g < -m)] += 1;
        } else if s - m > escape {
            acc.escaped += 1;
            return;
        }
    }
}

/// Path drawn from the walk conditioned to stay nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivePath {
    pub path: WalkPath,
    pub proposals: u64,
    /// True unless `V` is exact (two-point lattice laws).
    pub approximate: bool,
}

/// Samples `n` steps under `P+`, the Doob transform of the walk killed on
/// leaving `[0, inf)` by the harmonic function `V`.
pub fn conditioned_positive_sampler<R: Rng + ?Sized>(
    law: &EnvironmentLaw,
    v: &RenewalTable,
    n: usize,
    rng: &mut R,
) -> Result<PositivePath> {
    const MAX_PROPOSALS_PER_STEP: u64 = 1_000_000;
    let lattice = matches!(law, EnvironmentLaw::TwoPoint { .. });
    let eval = |x: f64| if lattice { v.eval_step(x) } else { v.eval(x) };
    // Largest increment that the acceptance bound has to cover; above it the
    // acceptance ratio is clipped at one.
    let reach = if lattice { law.quantile(1.0 - 1e-12).unwrap_or(0.0) } else { law.quantile(1.0 - 1e-6).unwrap_or(0.0) };
    let mut increments = Vec::with_capacity(n);
    let mut x = 0.0;
    let mut proposals = 0;
    for _ in 0..n {
        let vx = eval(x);
        let bound = eval(x + reach.max(0.0)) / vx;
        if !(vx > 0.0) || !bound.is_finite() || bound <= 0.0 {
            return Err(Error::AcceptanceBound { state: x });
        }
        let mut tries = 0;
        loop {
            tries += 1;
            if tries > MAX_PROPOSALS_PER_STEP {
                return Err(Error::AcceptanceBound { state: x });
            }
            let step = law.sample(rng);
            let y = x + step;
            if y < 0.0 {
                continue;
            }
            if rng.random::<f64>() * bound * vx < eval(y) {
                increments.push(step);
                x = y;
                break;
            }
        }
        proposals += tries;
    }
    Ok(PositivePath { path: WalkPath::from_increments(increments), proposals, approximate: !lattice })
}

/// Weight attached to a meander sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tilt {
    #[default]
    Off,
    /// `(S_n / c_n)^{-alpha}`. Its mean is infinite at every finite `n`
    /// because the walk's endpoint has positive density near zero.
    Power,
    /// `P(X <= -S_n) / P(X <= -c_n)`, the jump probability that the tilt
    /// approximates. Equal to the power weight when `S_n` lies in the power
    /// tail of the law and bounded otherwise.
    LeftTailRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanderConfig {
    pub n: usize,
    /// Fractions of `n` at which the scaled path is recorded.
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub tilt: Tilt,
    /// Condition on `S_k > 0` (true) or `S_k >= 0` (false) for `1 <= k <= n`.
    #[serde(default = "yes")]
    pub strict: bool,
    /// Overrides `c_n` as the spatial scale.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
    #[serde(default = "default_min_acceptance")]
    pub min_acceptance: f64,
}

fn yes() -> bool {
    true
}

fn default_max_proposals() -> u64 {
    100_000
}

fn default_min_acceptance() -> f64 {
    1e-4
}

impl MeanderConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            t_grid: vec![1.0],
            tilt: Tilt::Off,
            strict: true,
            scale: None,
            normalization: Normalization::default(),
            max_proposals: default_max_proposals(),
            min_acceptance: default_min_acceptance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanderSample {
    pub scaled_path: Vec<f64>,
    pub endpoint: f64,
    pub weight: f64,
}

/// Plain rejection sampler for walks that stay positive up to time `n`.
#[derive(Debug, Clone)]
pub struct MeanderSampler<'a> {
    law: &'a EnvironmentLaw,
    cfg: MeanderConfig,
    scale: f64,
    indices: Vec<usize>,
    left_tail_at_scale: f64,
    alpha: f64,
}

impl<'a> MeanderSampler<'a> {
    pub fn new(law: &'a EnvironmentLaw, cfg: MeanderConfig) -> Result<Self> {
        if cfg.n == 0 {
            return Err(invalid("n", "meanders need at least one step"));
        }
        if cfg.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("t_grid", "points must lie in [0, 1]"));
        }
        let scale = match cfg.scale {
            Some(c) if c > 0.0 => c,
            Some(_) => return Err(invalid("scale", "must be positive")),
            None => law.scaling_sequence(cfg.n as u64, cfg.normalization)?,
        };
        let left_tail_at_scale = match cfg.tilt {
            Tilt::LeftTailRatio => {
                let f = law.cdf(-scale)?;
                if f <= 0.0 {
                    return Err(invalid("tilt", "the law puts no mass below -c_n"));
                }
                f
            }
            _ => 1.0,
        };
        let indices = cfg.t_grid.iter().map(|t| ((cfg.n as f64 * t).floor() as usize).min(cfg.n)).collect();
        Ok(Self { law, scale, indices, left_tail_at_scale, alpha: law.alpha(), cfg })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn config(&self) -> &MeanderConfig {
        &self.cfg
    }

    /// One accepted sample and the number of proposals it took, or `None`
    /// if the proposal budget ran out.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) -> Option<(MeanderSample, u64)> {
        let n = self.cfg.n;
        for attempt in 1..=self.cfg.max_proposals {
            buf.clear();
            buf.push(0.0);
            let mut s = 0.0;
            let mut alive = true;
            for _ in 0..n {
                s += self.law.sample(rng);
                if s < 0.0 || (self.cfg.strict && s == 0.0) {
                    alive = false;
                    break;
                }
                buf.push(s);
            }
            if !alive {
                continue;
            }
            let endpoint = s / self.scale;
            let weight = match self.cfg.tilt {
                Tilt::Off => 1.0,
                Tilt::Power => endpoint.powf(-self.alpha),
                Tilt::LeftTailRatio => self.law.cdf(-s).unwrap_or(0.0) / self.left_tail_at_scale,
            };
            let scaled_path = self.indices.iter().map(|&i| buf[i] / self.scale).collect();
            return Some((MeanderSample { scaled_path, endpoint, weight }, attempt));
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct MeanderBatch {
    pub samples: Vec<MeanderSample>,
    pub proposals: u64,
    pub scale: f64,
}

impl MeanderBatch {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.proposals.max(1) as f64
    }
}

/// Draws `accepted` meander samples spread over replica streams.
pub fn meander_batch(
    law: &EnvironmentLaw,
    cfg: &MeanderConfig,
    accepted: u64,
    seed: u64,
    replicas: usize,
) -> Result<MeanderBatch> {
    let sampler = MeanderSampler::new(law, cfg.clone())?;
    let parts = replicate(seed, replicas, accepted, |rng, share| -> Result<(Vec<MeanderSample>, u64)> {
        let mut out = Vec::with_capacity(share as usize);
        let mut buf = Vec::with_capacity(cfg.n + 1);
        let mut proposals = 0u64;
        for _ in 0..share {
            match sampler.sample(rng, &mut buf) {
                Some((s, tries)) => {
                    proposals += tries;
                    out.push(s);
                }
                None => {
                    proposals += cfg.max_proposals;
                    let rate = out.len() as f64 / proposals as f64;
                    return Err(Error::AcceptanceTooLow { rate, floor: cfg.min_acceptance, proposals });
                }
            }
            if proposals >= cfg.max_proposals && (out.len() as f64) < cfg.min_acceptance * proposals as f64 {
                let rate = out.len() as f64 / proposals as f64;
                return Err(Error::AcceptanceTooLow { rate, floor: cfg.min_acceptance, proposals });
            }
        }
        Ok((out, proposals))
    });
    let mut samples = Vec::with_capacity(accepted as usize);
    let mut proposals = 0;
    for p in parts {
        let (s, k) = p?;
        samples.extend(s);
        proposals += k;
    }
    Ok(MeanderBatch { samples, proposals, scale: sampler.scale })
}

/// One conditioning event's overshoot / undershoot counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageRow {
    pub n: usize,
    /// `"tau"` for `tau- = n` (first `S_k <= 0`), `"T"` for `T- = n`.
    pub event: &'static str,
    pub scale: f64,
    pub events: u64,
    pub walks: u64,
    /// `P(S_n <= -u c_n | event)` per `u`.
    pub undershoot: Vec<Proportion>,
    /// `P(S_{n-1} >= v c_n | event)` per `v`.
    pub overshoot: Vec<Proportion>,
    pub median_undershoot: Option<f64>,
    pub median_pre_jump: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageTable {
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    pub rows: Vec<PassageRow>,
}

#[derive(Default)]
struct PassageAcc {
    // per n: (-S_n / c_n, S_{n-1} / c_n) for tau and T events
    tau: Vec<Vec<(f64, f64)>>,
    strict: Vec<Vec<(f64, f64)>>,
}

/// Estimates the laws of `S_n / c_n` and `S_{n-1} / c_n` at the first passage
/// below zero by direct conditioning. One pass of walks serves every `n`.
pub fn overshoot_undershoot_estimate(
    law: &EnvironmentLaw,
    ns: &[usize],
    us: &[f64],
    vs: &[f64],
    walks: u64,
    normalization: Normalization,
    seed: u64,
    replicas: usize,
) -> Result<PassageTable> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(invalid("ns", "need a nonempty list of positive n"));
    }
    if us.iter().chain(vs).any(|&x| !(x > 0.0)) {
        return Err(invalid("u/v", "must be positive"));
    }
    let scales: Vec<f64> = ns.iter().map(|&n| law.scaling_sequence(n as u64, normalization)).collect::<Result<_>>()?;
    let horizon = *ns.iter().max().unwrap();
    let mut slot = vec![usize::MAX; horizon + 1];
    for (i, &n) in ns.iter().enumerate() {
        slot[n] = i;
    }
    let parts = replicate(seed, replicas, walks, |rng, share| {
        let mut acc = PassageAcc { tau: vec![Vec::new(); ns.len()], strict: vec![Vec::new(); ns.len()] };
        for _ in 0..share {
            // tau- <= T-, so the walk is followed until T- or the horizon
            let mut s = 0.0;
            let mut tau_seen = false;
            for k in 1..=horizon {
                let prev = s;
                s += law.sample(rng);
                if !tau_seen && s <= 0.0 {
                    tau_seen = true;
                    if slot[k] != usize::MAX {
                        let c = scales[slot[k]];
                        acc.tau[slot[k]].push((-s / c, prev / c));
                    }
                }
                if s < 0.0 {
                    if slot[k] != usize::MAX {
                        let c = scales[slot[k]];
                        acc.strict[slot[k]].push((-s / c, prev / c));
                    }
                    break;
                }
            }
        }
        acc
    });
    let mut tau = vec![Vec::new(); ns.len()];
    let mut strict = vec![Vec::new(); ns.len()];
    for p in parts {
        for i in 0..ns.len() {
            tau[i].extend_from_slice(&p.tau[i]);
            strict[i].extend_from_slice(&p.strict[i]);
        }
    }
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        for (event, pairs) in [("tau", &tau[i]), ("T", &strict[i])] {
            let events = pairs.len() as u64;
            if events < 200 {
                warn!("only {events} walks with {event}- = {n}; the passage table is noisy");
            }
            let undershoot = us
                .iter()
                .map(|&u| wilson_interval(pairs.iter().filter(|p| p.0 >= u).count() as u64, events))
                .collect();
            let overshoot = vs
                .iter()
                .map(|&v| wilson_interval(pairs.iter().filter(|p| p.1 >= v).count() as u64, events))
                .collect();
            rows.push(PassageRow {
                n,
                event,
                scale: scales[i],
                events,
                walks,
                undershoot,
                overshoot,
                median_undershoot: median(pairs.iter().map(|p| p.0).collect()),
                median_pre_jump: median(pairs.iter().map(|p| p.1).collect()),
            });
        }
    }
    Ok(PassageTable { us: us.to_vec(), vs: vs.to_vec(), rows })
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { 0.5 * (xs[m - 1] + xs[m]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(sums: &[f64]) -> WalkPath {
        WalkPath::from_sums(sums.to_vec()).unwrap()
    }

    #[test]
    fn statistics_examples() {
        let st = path_statistics(&path(&[0.0, -1.0]));
        assert_eq!((st.t_minus, st.tau_minus, st.min, st.argmin), (Some(1), Some(1), -1.0, 1));

        let st = path_statistics(&path(&[0.0, 2.0, 0.0, 3.0]));
        assert_eq!((st.t_minus, st.tau_minus, st.min, st.argmin), (None, Some(2), 0.0, 0));
        assert_eq!(st.max, 3.0);

        let st = path_statistics(&path(&[0.0, 1.0, -0.5, -2.0]));
        assert_eq!(st.ladder_epochs, vec![2, 3]);
        assert_eq!(st.ladder_heights, vec![-0.5, -2.0]);
        assert_eq!(st.t_minus, Some(2));
    }

    #[test]
    fn argmin_takes_first_tie() {
        let st = path_statistics(&path(&[0.0, -1.0, 0.5, -1.0]));
        assert_eq!(st.argmin, 1);
        assert_eq!(st.ladder_epochs, vec![1]);
    }

    #[test]
    fn deterministic_two_point_path() {
        let law = EnvironmentLaw::two_point(0.7, 1.0).unwrap();
        let p = simulate_path(&law, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.sums, vec![0.0, 0.7]);
        let p = simulate_path(&law, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.sums.len(), 4);
    }

    #[test]
    fn exact_two_point_v_is_harmonic() {
        for w in [0.5, 0.6, 0.9] {
            let a = 2f64.ln();
            let v = RenewalTable::exact_two_point(a, w, 60);
            for k in 0..50 {
                let x = k as f64 * a;
                let up = w * v.eval_step(x + a);
                let down = (1.0 - w) * v.eval_step(x - a);
                assert!((up + down - v.eval_step(x)).abs() < 1e-12 * v.eval_step(x), "w={w} k={k}");
            }
        }
        let v = RenewalTable::exact_two_point(1.0, 0.5, 4);
        assert_eq!(v.values, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn renewal_grid_contract() {
        let law = EnvironmentLaw::two_point(1.0, 0.5).unwrap();
        let opts = RenewalOptions { chains: 10_000, ..Default::default() };
        assert!(renewal_function_estimate(&law, &[-1.0, 1.0], &opts).is_err());
        assert!(renewal_function_estimate(&law, &[1.0, 1.0], &opts).is_err());
        let few = RenewalOptions { chains: 10, ..Default::default() };
        assert!(renewal_function_estimate(&law, &[1.0], &few).is_err());
    }

    #[test]
    fn table_interpolation() {
        let t = RenewalTable::from_values(vec![1.0, 2.0], vec![2.0, 4.0]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(0.5), 1.5);
        assert_eq!(t.eval(1.5), 3.0);
        assert_eq!(t.eval(3.0), 6.0);
        assert_eq!(t.eval(-0.1), 0.0);
    }

    #[test]
    fn positive_sampler_trivial_and_constrained() {
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        let v = RenewalTable::from_values(grid.clone(), grid.iter().map(|x| (1.0 + x).powf(0.75)).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = conditioned_positive_sampler(&law, &v, 0, &mut rng).unwrap();
        assert_eq!(p.path.sums, vec![0.0]);
        for _ in 0..200 {
            let p = conditioned_positive_sampler(&law, &v, 25, &mut rng).unwrap();
            assert!(p.path.sums.iter().all(|&s| s >= 0.0));
            assert!(p.approximate);
        }
    }

    #[test]
    fn meander_samples_are_positive() {
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let mut cfg = MeanderConfig::new(50);
        cfg.t_grid = vec![0.0, 0.5, 1.0];
        cfg.tilt = Tilt::LeftTailRatio;
        let batch = meander_batch(&law, &cfg, 300, 1, 2).unwrap();
        assert_eq!(batch.samples.len(), 300);
        for s in &batch.samples {
            assert!(s.endpoint > 0.0 && s.weight > 0.0);
            assert_eq!(s.scaled_path[0], 0.0);
            assert!(s.scaled_path[1..].iter().all(|&x| x > 0.0));
            assert_eq!(*s.scaled_path.last().unwrap(), s.endpoint);
        }
        assert!(batch.acceptance_rate() > 0.0 && batch.acceptance_rate() < 1.0);
    }

    #[test]
    fn meander_budget_floor() {
        // drift down: staying positive for 200 steps is essentially impossible
        let law = EnvironmentLaw::two_point(1.0, 0.05).unwrap();
        let mut cfg = MeanderConfig::new(200);
        cfg.scale = Some(1.0);
        cfg.max_proposals = 1000;
        assert!(matches!(meander_batch(&law, &cfg, 5, 0, 1), Err(Error::AcceptanceTooLow { .. })));
    }

    #[test]
    fn one_step_passage_closed_form() {
        // tau- = 1 means X_1 <= 0; P(S_1 <= -u c_1 | X_1 <= 0) = F(-u c_1) / F(0).
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let c1 = law.scaling_sequence(1, Normalization::TailBalanced).unwrap();
        let u = 1.5;
        let exact = law.cdf(-u * c1).unwrap() / law.cdf(0.0).unwrap();
        let t = overshoot_undershoot_estimate(&law, &[1], &[u], &[0.5], 200_000, Normalization::TailBalanced, 4, 2).unwrap();
        let row = &t.rows[0];
        assert_eq!(row.event, "tau");
        let est = &row.undershoot[0];
        assert!((est.estimate - exact).abs() < 3.0 * est.stderr + 1e-9, "{} vs {exact}", est.estimate);
        // before the first step S_0 = 0, so no overshoot mass
        assert_eq!(row.overshoot[0].estimate, 0.0);
    }
}
