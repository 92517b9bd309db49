//! Nearest-neighbour random walk in random environment.
//!
//! From site `n` the walk steps down with `q_n = 1 / (1 + e^{X_{n+1}})` and up
//! with `p_n = 1 - q_n`. Local times of the first excursion below `-1` form a
//! branching process with offspring laws `q_n / (1 - p_n s)`, which is the
//! geometric family of [`crate::bpre`] with `x = X_{n+1}`.

use log::warn;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::bpre::PopulationTrajectory;
use crate::env_laws::{EnvironmentLaw, Normalization};
use crate::error::{invalid, Error, Result};
use crate::estimators::{wilson_interval, McEstimate, Moments, Proportion};
use crate::math::{log_add_exp, sigmoid};
use crate::streams::{replica_stream, replicate};

/// `(q, p)` for log-ratio `x = log(p / q)`.
pub fn transition_probabilities(x: f64) -> (f64, f64) {
    (sigmoid(-x), sigmoid(x))
}

#[derive(Debug, Clone)]
enum Source {
    Law { law: EnvironmentLaw, seed: u64 },
    Fixed,
}

/// Site increments `X_{n+1}` for `n >= 0`, drawn on first visit. Site `n`
/// uses its own stream `(seed, n)`, so the realisation does not depend on the
/// order in which sites are reached.
#[derive(Debug, Clone)]
pub struct RwreEnvironment {
    source: Source,
    x: Vec<f64>,
    p: Vec<f64>,
}

impl RwreEnvironment {
    pub fn lazy(law: EnvironmentLaw, seed: u64) -> Self {
        Self { source: Source::Law { law, seed }, x: Vec::new(), p: Vec::new() }
    }

    /// A finite environment; walks that try to leave it fail.
    pub fn fixed(xs: Vec<f64>) -> Self {
        let p = xs.iter().map(|&x| sigmoid(x)).collect();
        Self { source: Source::Fixed, x: xs, p }
    }

    /// Sites generated so far.
    pub fn known_sites(&self) -> usize {
        self.x.len()
    }

    /// `X_{n+1}`, the increment attached to site `n`.
    pub fn increment(&mut self, n: usize) -> Result<f64> {
        self.ensure(n)?;
        Ok(self.x[n])
    }

    pub fn probabilities(&mut self, n: usize) -> Result<(f64, f64)> {
        self.ensure(n)?;
        Ok((1.0 - self.p[n], self.p[n]))
    }

    /// `X_1, ..., X_k`.
    pub fn increments(&mut self, k: usize) -> Result<Vec<f64>> {
        if k > 0 {
            self.ensure(k - 1)?;
        }
        Ok(self.x[..k].to_vec())
    }

    #[inline]
    fn ensure(&mut self, n: usize) -> Result<()> {
        while self.x.len() <= n {
            match &self.source {
                Source::Law { law, seed } => {
                    let mut rng = replica_stream(*seed, self.x.len() as u64);
                    let x = law.sample(&mut rng);
                    self.x.push(x);
                    self.p.push(sigmoid(x));
                }
                Source::Fixed => return Err(invalid("environment", "walk left the fixed environment")),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionOptions {
    pub step_cap: u64,
    pub store_trajectory: bool,
    /// Stop as soon as the walk reaches this level; the excursion is then
    /// incomplete but its maximum is known to be at least the level.
    pub stop_above: Option<usize>,
}

impl Default for ExcursionOptions {
    fn default() -> Self {
        Self { step_cap: 100_000_000, store_trajectory: false, stop_above: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excursion {
    /// `R_0 = 0, ..., R_chi = -1` when stored.
    pub trajectory: Option<Vec<i64>>,
    /// Steps taken; equals `chi` for a complete excursion.
    pub chi: u64,
    /// `local_times[j]` is `l(j - 1)`.
    pub local_times: Vec<u64>,
    /// `upcrossings[n]` counts steps `n - 1 -> n`; index 0 is unused.
    pub upcrossings: Vec<u64>,
    /// `max_{0 <= k < chi} R_k`.
    pub max_level: usize,
    /// Site after the last step, `-1` for a complete excursion.
    pub position: i64,
    pub capped: bool,
    pub stopped_above: bool,
}

impl Excursion {
    pub fn is_complete(&self) -> bool {
        !self.capped && !self.stopped_above
    }

    /// `l(n)` for `n >= -1`.
    pub fn local_time(&self, n: i64) -> u64 {
        if n < -1 {
            return 0;
        }
        self.local_times.get((n + 1) as usize).copied().unwrap_or(0)
    }
}

/// Runs the walk from 0 until it hits `-1`, the step cap, or `stop_above`.
pub fn simulate_excursion_in<R: Rng + ?Sized>(env: &mut RwreEnvironment, rng: &mut R, opts: &ExcursionOptions) -> Result<Excursion> {
    if opts.step_cap == 0 {
        return Err(invalid("step_cap", "must be at least 1"));
    }
    env.ensure(0)?;
    let mut local = vec![0u64; 2];
    let mut up = vec![0u64; 1];
    let mut traj = opts.store_trajectory.then(|| vec![0i64]);
    let mut pos: usize = 0;
    let mut max_level = 0usize;
    let mut steps = 0u64;
    local[1] = 1;
    loop {
        if steps >= opts.step_cap {
            return Ok(Excursion { trajectory: traj, chi: steps, local_times: local, upcrossings: up, max_level, position: pos as i64, capped: true, stopped_above: false });
        }
        let p = env.p[pos];
        steps += 1;
        if rng.random::<f64>() < p {
            pos += 1;
            if pos > max_level {
                max_level = pos;
                env.ensure(pos)?;
                local.push(0);
                up.push(0);
            }
            up[pos] += 1;
            local[pos + 1] += 1;
            if let Some(t) = traj.as_mut() {
                t.push(pos as i64);
            }
            if opts.stop_above.is_some_and(|lvl| pos >= lvl) {
                return Ok(Excursion { trajectory: traj, chi: steps, local_times: local, upcrossings: up, max_level, position: pos as i64, capped: false, stopped_above: true });
            }
        } else if pos == 0 {
            local[0] = 1;
            if let Some(t) = traj.as_mut() {
                t.push(-1);
            }
            return Ok(Excursion { trajectory: traj, chi: steps, local_times: local, upcrossings: up, max_level, position: -1, capped: false, stopped_above: false });
        } else {
            pos -= 1;
            local[pos + 1] += 1;
            if let Some(t) = traj.as_mut() {
                t.push(pos as i64);
            }
        }
    }
}

/// An excursion in a fresh environment drawn from `law`.
pub fn simulate_excursion<R: Rng + ?Sized>(law: &EnvironmentLaw, rng: &mut R, opts: &ExcursionOptions) -> Result<Excursion> {
    let mut env = RwreEnvironment::lazy(law.clone(), rng.next_u64());
    simulate_excursion_in(&mut env, rng, opts)
}

/// `P(max level = k)` for a walk now at `position` whose maximum so far is
/// `max_so_far`. From `y` the walk reaches `k` before `-1` with probability
/// `W(y) / W(k)`, `W(y) = sum_{i <= y} e^{-S_i}`, so a capped excursion can be
/// credited with the exact law of its final maximum.
pub fn max_level_given_state(env: &mut RwreEnvironment, position: usize, max_so_far: usize, k: usize) -> Result<f64> {
    if position > max_so_far {
        return Err(invalid("position", "cannot exceed the maximum so far"));
    }
    if k < max_so_far {
        return Ok(0.0);
    }
    let xs = env.increments(k + 1)?;
    let mut log_w = Vec::with_capacity(k + 2);
    let (mut s, mut acc) = (0.0, f64::NEG_INFINITY);
    for i in 0..=k + 1 {
        acc = log_add_exp(acc, -s);
        log_w.push(acc);
        if i <= k {
            s += xs[i];
        }
    }
    if k == max_so_far {
        return Ok(-(log_w[position] - log_w[k + 1]).exp_m1());
    }
    // reach k, then fail to reach k + 1
    Ok((log_w[position] - log_w[k]).exp() * -(log_w[k] - log_w[k + 1]).exp_m1())
}

/// `Z_n = sum_{i=0}^n (-1)^i l(n - i - 1)` with the path identities checked:
/// `Z_0 = 1`, `Z_n >= 0`, `Z_n` equals the number of upcrossings into `n`,
/// `l(n) = Z_{n+1} + Z_n`, `sum_n l(n) = chi + 1`, and the extinction time
/// `T = min{j > 0 : l(j) = 0}` equals `max_level + 1`.
pub fn local_time_to_branching(exc: &Excursion) -> Result<PopulationTrajectory> {
    if !exc.is_complete() {
        return Err(Error::IncompleteExcursion);
    }
    let fail = |what: String| Err(Error::IdentityViolated(what));
    if exc.local_time(-1) != 1 {
        return fail(format!("l(-1) = {}", exc.local_time(-1)));
    }
    let top = exc.max_level as i64;
    // alternating prefix P_m = sum_{j=-1}^m (-1)^j l(j), so Z_n = (-1)^{n-1} P_{n-1}
    let mut prefix: i128 = 0;
    let mut z: Vec<i128> = Vec::with_capacity(exc.max_level + 3);
    for n in 0..=top + 2 {
        let j = n - 1;
        let sign = if j.rem_euclid(2) == 0 { 1 } else { -1 };
        prefix += sign * exc.local_time(j) as i128;
        let zn = if (n - 1).rem_euclid(2) == 0 { prefix } else { -prefix };
        z.push(zn);
    }
    if z[0] != 1 {
        return fail(format!("Z_0 = {}", z[0]));
    }
    for (n, &zn) in z.iter().enumerate() {
        if zn < 0 {
            return fail(format!("Z_{n} = {zn} < 0"));
        }
        if n >= 1 && zn as u64 != exc.upcrossings.get(n).copied().unwrap_or(0) {
            return fail(format!("Z_{n} = {zn} but {} upcrossings", exc.upcrossings.get(n).copied().unwrap_or(0)));
        }
    }
    for n in 0..=top + 1 {
        let i = n as usize;
        if exc.local_time(n) as i128 != z[i + 1] + z[i] {
            return fail(format!("l({n}) != Z_{} + Z_{n}", n + 1));
        }
    }
    let total: u64 = exc.local_times.iter().sum();
    if total != exc.chi + 1 {
        return fail(format!("sum of local times {total} != chi + 1 = {}", exc.chi + 1));
    }
    let t = (1..).find(|&j| exc.local_time(j) == 0).unwrap() as usize;
    if t != exc.max_level + 1 {
        return fail(format!("T = {t} but max level {}", exc.max_level));
    }
    if exc.local_time(top) == 0 || exc.local_time(top + 1) != 0 {
        return fail(format!("max level {top} is not the last level with positive local time"));
    }
    let sizes: Vec<f64> = z[..=t].iter().map(|&v| v as f64).collect();
    Ok(PopulationTrajectory { sizes, extinction_time: Some(t), capped: false })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub completed: u64,
    pub capped: u64,
    pub passed: u64,
    pub failures: Vec<String>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.completed > 0 && self.passed == self.completed
    }
}

/// Runs excursions in independent environments until `completed` of them
/// finish within the step cap, checking every path identity on each.
pub fn identity_suite(law: &EnvironmentLaw, completed: u64, step_cap: u64, seed: u64, replicas: usize) -> Result<IdentityReport> {
    let opts = ExcursionOptions { step_cap, store_trajectory: false, stop_above: None };
    let parts = replicate(seed, replicas, completed, |rng, share| -> Result<IdentityReport> {
        let mut rep = IdentityReport { completed: 0, capped: 0, passed: 0, failures: Vec::new() };
        while rep.completed < share {
            let exc = simulate_excursion(law, rng, &opts)?;
            if exc.capped {
                rep.capped += 1;
                continue;
            }
            rep.completed += 1;
            match local_time_to_branching(&exc) {
                Ok(_) => rep.passed += 1,
                Err(e) => {
                    if rep.failures.len() < 10 {
                        rep.failures.push(e.to_string());
                    }
                }
            }
        }
        Ok(rep)
    });
    let mut out = IdentityReport { completed: 0, capped: 0, passed: 0, failures: Vec::new() };
    for p in parts {
        let p = p?;
        out.completed += p.completed;
        out.capped += p.capped;
        out.passed += p.passed;
        out.failures.extend(p.failures);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem4Options {
    /// Levels `n` at which `max_level = n` is studied.
    pub levels: Vec<usize>,
    pub x_list: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub step_cap: u64,
    pub normalization: Normalization,
    pub seed: u64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub n: usize,
    pub scale: f64,
    /// `P(max_level = n)`. Capped excursions count with the exact conditional
    /// probability of this maximum given their state at the cap.
    pub probability: McEstimate,
    /// `P(l(n) > e^{x c_n} | max_level = n)` per `x`.
    pub local_time_tail: Vec<Proportion>,
    /// Samples of `log l(floor(n t)) / c_n` given `max_level = n`, one vector per `t`.
    pub profile: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem4Table {
    pub excursions: u64,
    pub capped: u64,
    /// Capped excursions whose maximum so far does not rule out the studied
    /// levels. They enter the level probabilities fractionally and are absent
    /// from the local-time tails.
    pub ambiguous: u64,
    pub x_list: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub rows: Vec<LevelRow>,
}

#[derive(Clone)]
struct LevelAcc {
    credit: Moments,
    hits: u64,
    tail: Vec<u64>,
    profile: Vec<Vec<f64>>,
}

fn empty_acc(opts: &Theorem4Options, k: usize) -> Vec<LevelAcc> {
    vec![LevelAcc { credit: Moments::default(), hits: 0, tail: vec![0; opts.x_list.len()], profile: vec![Vec::new(); opts.t_grid.len()] }; k]
}

/// Excursion statistics at the levels of interest. Walks stop once they pass
/// the highest level, since nothing above it is needed.
pub fn theorem4_statistics(law: &EnvironmentLaw, n_excursions: u64, opts: &Theorem4Options) -> Result<Theorem4Table> {
    if opts.levels.is_empty() {
        return Err(invalid("levels", "need at least one level"));
    }
    let top = *opts.levels.iter().max().unwrap();
    let scales: Vec<f64> = opts
        .levels
        .iter()
        .map(|&n| law.scaling_sequence(n.max(1) as u64, opts.normalization))
        .collect::<Result<_>>()?;
    let ex_opts = ExcursionOptions { step_cap: opts.step_cap, store_trajectory: false, stop_above: Some(top + 1) };
    let k = opts.levels.len();
    let parts = replicate(opts.seed, opts.replicas, n_excursions, |rng, share| -> Result<(Vec<LevelAcc>, u64, u64)> {
        let mut acc = empty_acc(opts, k);
        let (mut capped, mut ambiguous) = (0u64, 0u64);
        for _ in 0..share {
            let mut env = RwreEnvironment::lazy(law.clone(), rng.next_u64());
            let exc = simulate_excursion_in(&mut env, rng, &ex_opts)?;
            if exc.capped {
                capped += 1;
                if exc.max_level <= top {
                    ambiguous += 1;
                }
                for (a, &n) in acc.iter_mut().zip(&opts.levels) {
                    a.credit.push(max_level_given_state(&mut env, exc.position as usize, exc.max_level, n)?);
                }
                continue;
            }
            for (a, &n) in acc.iter_mut().zip(&opts.levels) {
                a.credit.push(if !exc.stopped_above && exc.max_level == n { 1.0 } else { 0.0 });
            }
            if exc.stopped_above {
                continue;
            }
            for (i, &n) in opts.levels.iter().enumerate() {
                if exc.max_level != n {
                    continue;
                }
                let a = &mut acc[i];
                a.hits += 1;
                let log_l = (exc.local_time(n as i64) as f64).ln();
                for (j, &x) in opts.x_list.iter().enumerate() {
                    if log_l > x * scales[i] {
                        a.tail[j] += 1;
                    }
                }
                for (j, &t) in opts.t_grid.iter().enumerate() {
                    let level = (n as f64 * t).floor() as i64;
                    a.profile[j].push((exc.local_time(level) as f64).ln() / scales[i]);
                }
            }
        }
        Ok((acc, capped, ambiguous))
    });
    let mut acc = empty_acc(opts, k);
    let (mut capped, mut ambiguous) = (0, 0);
    for p in parts {
        let (a, c, amb) = p?;
        capped += c;
        ambiguous += amb;
        for (dst, src) in acc.iter_mut().zip(a) {
            dst.credit.merge(&src.credit);
            dst.hits += src.hits;
            for (d, s) in dst.tail.iter_mut().zip(src.tail) {
                *d += s;
            }
            for (d, s) in dst.profile.iter_mut().zip(src.profile) {
                d.extend(s);
            }
        }
    }
    if ambiguous > 0 {
        warn!("{ambiguous} capped excursions had not yet left the studied levels");
    }
    let rows = opts
        .levels
        .iter()
        .zip(acc)
        .zip(&scales)
        .map(|((&n, a), &scale)| {
            if a.hits < 100 {
                warn!("only {} excursions with maximum {n}", a.hits);
            }
            LevelRow {
                n,
                scale,
                probability: a.credit.estimate().clamp_unit(),
                local_time_tail: a.tail.iter().map(|&s| wilson_interval(s, a.hits)).collect(),
                profile: a.profile,
            }
        })
        .collect();
    Ok(Theorem4Table { excursions: n_excursions, capped, ambiguous, x_list: opts.x_list.clone(), t_grid: opts.t_grid.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn excursion_from(path: &[i64]) -> Excursion {
        let top = path[..path.len() - 1].iter().copied().max().unwrap() as usize;
        let mut local = vec![0u64; top + 2];
        let mut up = vec![0u64; top + 1];
        for w in path.windows(2) {
            if w[1] > w[0] {
                up[w[1] as usize] += 1;
            }
        }
        for &r in path {
            local[(r + 1) as usize] += 1;
        }
        Excursion {
            trajectory: Some(path.to_vec()),
            chi: (path.len() - 1) as u64,
            local_times: local,
            upcrossings: up,
            max_level: top,
            position: -1,
            capped: false,
            stopped_above: false,
        }
    }

    #[test]
    fn capped_state_maximum_law() {
        let xs = vec![0.3, -0.5, 1.0, -0.2, 0.4, -1.0, 0.8, 0.1, -0.3, 0.2, 0.5, -0.4];
        let mut env = RwreEnvironment::fixed(xs);
        let (pos, top) = (2usize, 3usize);
        let probs: Vec<f64> = (0..9).map(|k| max_level_given_state(&mut env, pos, top, k).unwrap()).collect();
        assert_eq!(probs[..top], [0.0; 3]);
        assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(probs.iter().sum::<f64>() < 1.0);
        assert!(max_level_given_state(&mut env, 4, top, 5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let runs = 200_000;
        let mut counts = [0u64; 9];
        for _ in 0..runs {
            let (mut y, mut m) = (pos as i64, top);
            while y >= 0 && m < 9 {
                let (_, p) = env.probabilities(y as usize).unwrap();
                y += if rng.random::<f64>() < p { 1 } else { -1 };
                m = m.max(y.max(0) as usize);
            }
            if m < 9 {
                counts[m] += 1;
            }
        }
        for k in top..9 {
            let p = probs[k];
            let se = (p * (1.0 - p) / runs as f64).sqrt();
            let f = counts[k] as f64 / runs as f64;
            assert!((f - p).abs() < 4.0 * se + 1e-12, "k={k}: {f} vs {p}");
        }
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transition_probabilities(0.0), (0.5, 0.5));
        let (q, p) = transition_probabilities(3f64.ln());
        assert_relative_eq!(q, 0.25, epsilon = 1e-15);
        assert_relative_eq!(p, 0.75, epsilon = 1e-15);
        for x in -5..=5 {
            let (q, p) = transition_probabilities(x as f64);
            assert!((q + p - 1.0).abs() <= 1e-15);
            assert_relative_eq!((p / q).ln(), x as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_excursions() {
        let down = excursion_from(&[0, -1]);
        assert_eq!((down.chi, down.local_time(0), down.local_time(-1)), (1, 1, 1));
        let pop = local_time_to_branching(&down).unwrap();
        assert_eq!(pop.sizes, vec![1.0, 0.0]);
        assert_eq!(pop.extinction_time, Some(1));

        let bump = excursion_from(&[0, 1, 0, -1]);
        assert_eq!((bump.chi, bump.local_time(0), bump.local_time(1), bump.max_level), (3, 2, 1, 1));
        let pop = local_time_to_branching(&bump).unwrap();
        assert_eq!(pop.sizes, vec![1.0, 1.0, 0.0]);
        assert_eq!(pop.extinction_time, Some(2));
    }

    #[test]
    fn corrupted_local_times_are_caught() {
        let mut exc = excursion_from(&[0, 1, 2, 1, 0, 1, 0, -1]);
        local_time_to_branching(&exc).unwrap();
        exc.local_times[2] += 1;
        assert!(matches!(local_time_to_branching(&exc), Err(Error::IdentityViolated(_))));
        let mut capped = excursion_from(&[0, -1]);
        capped.capped = true;
        assert!(matches!(local_time_to_branching(&capped), Err(Error::IncompleteExcursion)));
    }

    #[test]
    fn strong_down_drift_exits_at_once() {
        let mut env = RwreEnvironment::fixed(vec![-60.0; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = ExcursionOptions { store_trajectory: true, ..Default::default() };
        for _ in 0..1000 {
            let exc = simulate_excursion_in(&mut env, &mut rng, &opts).unwrap();
            assert_eq!(exc.chi, 1);
            assert_eq!(exc.trajectory.as_deref(), Some(&[0, -1][..]));
        }
    }

    #[test]
    fn random_excursions_satisfy_identities() {
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let opts = ExcursionOptions { step_cap: 1_000_000, store_trajectory: true, stop_above: None };
        let mut done = 0;
        while done < 2000 {
            let exc = simulate_excursion(&law, &mut rng, &opts).unwrap();
            if exc.capped {
                continue;
            }
            done += 1;
            let traj = exc.trajectory.as_ref().unwrap();
            assert_eq!(traj.len() as u64, exc.chi + 1);
            assert!(traj.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
            assert_eq!(*traj.last().unwrap(), -1);
            let pop = local_time_to_branching(&exc).unwrap();
            let n = exc.max_level as i64;
            assert!(exc.local_time(n) > 0 && exc.local_time(n + 1) == 0);
            assert_eq!(pop.extinction_time, Some(exc.max_level + 1));
        }
    }

    #[test]
    fn site_streams_make_environments_reproducible() {
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let mut a = RwreEnvironment::lazy(law.clone(), 77);
        let mut b = RwreEnvironment::lazy(law, 77);
        let x5 = a.increment(5).unwrap();
        let xs = b.increments(6).unwrap();
        assert_eq!(xs[5], x5);
        assert_eq!(a.increments(6).unwrap(), xs);
        assert!(RwreEnvironment::fixed(vec![0.0]).increment(1).is_err());
    }

    #[test]
    fn stop_above_and_cap() {
        let mut env = RwreEnvironment::fixed(vec![60.0; 20]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exc = simulate_excursion_in(&mut env, &mut rng, &ExcursionOptions { stop_above: Some(5), ..Default::default() }).unwrap();
        assert!(exc.stopped_above && exc.max_level == 5 && exc.chi == 5);
        let exc = simulate_excursion_in(&mut env, &mut rng, &ExcursionOptions { step_cap: 3, ..Default::default() }).unwrap();
        assert!(exc.capped && exc.chi == 3);
    }

    #[test]
    fn level_statistics() {
        let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).unwrap();
        let opts = Theorem4Options {
            levels: vec![0, 1, 2, 3],
            x_list: vec![0.0, 0.2, 0.5],
            t_grid: vec![0.5, 1.0],
            step_cap: 1_000_000,
            normalization: Normalization::default(),
            seed: 4,
            replicas: 2,
        };
        let table = theorem4_statistics(&law, 20_000, &opts).unwrap();
        for row in &table.rows {
            let tails: Vec<f64> = row.local_time_tail.iter().map(|p| p.estimate).collect();
            assert!(tails.windows(2).all(|w| w[0] >= w[1]));
        }
        // P(max = 0) = P(first step down) = E[q_0] = 1/2 for a symmetric law
        let p0 = &table.rows[0].probability;
        assert!((p0.mean - 0.5).abs() < 4.0 * p0.stderr);
    }
}
