//! Acceptance suite. Runs every criterion at its full budget and prints one
//! PASS/FAIL line each; exits nonzero if any fails.
//!
//! Experiment budgets come from `configs/`, but the tolerances are pinned
//! here so that a config cannot loosen them.

use std::path::PathBuf;
use std::time::Instant;

use bpre_cli::config::Thresholds;
use bpre_cli::{Experiment, ExperimentConfig, ResultRecord};
use bpre_core::bpre::GeometricEnvironment;
use bpre_core::random_walk::{renewal_function_estimate, RenewalOptions, RenewalTable};
use bpre_core::{EnvironmentLaw, Stream};
use rand::SeedableRng;

const Z_MAX: f64 = 3.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome { passed, detail: detail.into() })
}

fn thresholds() -> Thresholds {
    Thresholds {
        z_max: Z_MAX,
        slope_tol: 0.15,
        hazard_tol: 0.1,
        hazard_min_n: 200,
        ks_endpoint: 0.08,
        ks_marginal: 0.10,
        ess_min: 1000.0,
        ase_rel_tol: 0.1,
        contrast_size: 1000.0,
        contrast_max: 0.05,
        heavy_x: 0.5,
        heavy_min: 0.1,
    }
}

fn config(name: &str) -> Result<ExperimentConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"));
    let mut cfg = ExperimentConfig::load(&path).map_err(|e| e.0)?;
    cfg.thresholds = thresholds();
    Ok(cfg)
}

fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<(ResultRecord, f64), String> {
    let start = Instant::now();
    let rec = bpre_cli::run(experiment, cfg).map_err(|e| e.to_string())?;
    Ok((rec, start.elapsed().as_secs_f64()))
}

/// Names of the failing verdicts, or "all n verdicts pass".
fn summary(rec: &ResultRecord) -> String {
    let failed: Vec<String> = rec.verdicts.iter().filter(|v| !v.passed).map(|v| v.line()).collect();
    if failed.is_empty() {
        format!("all {} verdicts pass", rec.verdicts.len())
    } else {
        failed.join("; ")
    }
}

fn verdicts_starting<'a>(rec: &'a ResultRecord, prefix: &'a str) -> impl Iterator<Item = &'a bpre_cli::Verdict> + 'a {
    rec.verdicts.iter().filter(move |v| v.name.starts_with(prefix))
}

fn exact_oracle() -> Result<Outcome, String> {
    let cfg = config("oracle")?;
    if cfg.n_grid != (1..=12).collect::<Vec<_>>() || cfg.budget.samples < 1_000_000 {
        return Err("oracle config must cover n = 1..12 with 10^6 runs".into());
    }
    let (rec, secs) = run(Experiment::Oracle, &cfg)?;
    let rb = verdicts_starting(&rec, "Rao-Blackwell").count();
    let direct = verdicts_starting(&rec, "direct simulation").count();
    let worst = rec.verdicts.iter().map(|v| v.value).fold(0.0, f64::max);
    outcome(
        rec.all_passed() && rb == 12 && direct == 12 && secs < 120.0,
        format!("max z {worst:.2} over {rb} + {direct} checks, {secs:.1} s of 120 s; {}", summary(&rec)),
    )
}

fn quenched_identities() -> Result<Outcome, String> {
    let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).map_err(|e| e.to_string())?;
    let mut rng = Stream::seed_from_u64(0xacce97);
    let (mut tele, mut joint) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let xs: Vec<f64> = (0..1000).map(|_| law.sample(&mut rng)).collect();
        let env = GeometricEnvironment::from_increments(xs);
        let mut total = 0.0;
        for n in 1..=1000 {
            let p = env.extinction_at(n);
            total += p;
            joint = joint.max((env.joint_tail(n, 0) - p).abs());
        }
        tele = tele.max((total + env.survival(1000) - 1.0).abs());
    }
    outcome(tele <= 1e-12 && joint <= 1e-12, format!("telescoping error {tele:.2e}, joint tail error {joint:.2e} (limit 1e-12)"))
}

fn harmonic_renewal() -> Result<Outcome, String> {
    let a = std::f64::consts::LN_2;
    let mut exact = 0.0f64;
    for w in [0.5, 0.6, 0.9] {
        let v = RenewalTable::exact_two_point(a, w, 60);
        for k in 0..50 {
            let x = k as f64 * a;
            let r = (w * v.eval_step(x + a) + (1.0 - w) * v.eval_step(x - a)) / v.eval_step(x) - 1.0;
            exact = exact.max(r.abs());
        }
    }
    let law = EnvironmentLaw::pareto(1.5, 0.5, 1.0).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..=64).map(|i| i as f64 * 0.25).collect();
    let opts = RenewalOptions { chains: 200_000, seed: 0x4a2, replicas: 8, ..Default::default() };
    let v = renewal_function_estimate(&law, &grid, &opts).map_err(|e| e.to_string())?;
    let mut rng = Stream::seed_from_u64(0x4a3);
    let draws: Vec<f64> = (0..1_000_000).map(|_| law.sample(&mut rng)).collect();
    let mut mc = 0.0f64;
    for x in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let mean = draws.iter().map(|d| v.eval(x + d)).sum::<f64>() / draws.len() as f64;
        mc = mc.max((mean / v.eval(x) - 1.0).abs());
    }
    outcome(exact <= 1e-12 && mc < 0.02, format!("two-point residual {exact:.2e} (limit 1e-12), Pareto residual {:.2}% (limit 2%)", 100.0 * mc))
}

fn tilt_constant(rec: &ResultRecord, secs: f64) -> Result<Outcome, String> {
    let row = rec.rows_named("tilt_constant").next().ok_or("no tilt constant row")?;
    let target = row.reference.ok_or("no target")?;
    let rel = (row.estimate / 3.0 - 1.0).abs();
    outcome(
        row.n == Some(2000) && row.n_samples >= 5000 && (target - 3.0).abs() < 1e-12 && rel <= 0.1 && secs < 600.0,
        format!("E = {:.4} +- {:.4} from {} accepted at n = 2000, off 3.0 by {:.1}% (limit 10%), {secs:.1} s", row.estimate, row.stderr, row.n_samples, 100.0 * rel),
    )
}

fn theorem1() -> Result<Outcome, String> {
    let cfg = config("theorem1")?;
    let (rec, secs) = run(Experiment::Theorem1, &cfg)?;
    let slope = rec.rows_named("slope").next().ok_or("no slope row")?;
    let hazards: Vec<String> = rec
        .rows_named("ladder_hazard")
        .filter(|r| r.n.is_some_and(|n| n >= 200))
        .map(|r| format!("{}: {:.3}", r.n.unwrap(), r.estimate))
        .collect();
    let judged = verdicts_starting(&rec, "ladder hazard").count();
    outcome(
        rec.all_passed() && judged == hazards.len() && judged > 0 && rec.verdict("slope |fit + (2 - rho)|").is_some(),
        format!("slope {:.3} +- {:.3} (target -1.5 +- 0.15), hazard at n {} (target 0.5 +- 0.1), {secs:.0} s; {}", slope.estimate, slope.stderr, hazards.join(", "), summary(&rec)),
    )
}

fn endpoint(rec: &ResultRecord, secs: f64) -> Result<Outcome, String> {
    let ks = rec.rows_named("ks").find(|r| r.n == Some(500)).ok_or("no KS row at n = 500")?;
    let ess = ks.ess.unwrap_or(0.0);
    let atom = rec.rows_named("p_atom_at_one").next().map_or(f64::NAN, |r| r.estimate);
    outcome(
        rec.all_passed() && ks.estimate < 0.08 && ess >= 1000.0,
        format!("KS {:.4} (limit 0.08), ESS {ess:.0} (min 1000), atom at Z = 1 {atom:.3}, {secs:.0} s; {}", ks.estimate, summary(rec)),
    )
}

fn marginals(rec: &ResultRecord, secs: f64, endpoint: Option<&ResultRecord>) -> Result<Outcome, String> {
    let ks: Vec<(f64, f64)> = rec.rows_named("ks").map(|r| (r.t.unwrap_or(f64::NAN), r.estimate)).collect();
    let ts: Vec<f64> = ks.iter().map(|k| k.0).collect();
    let all_t = ts == [0.25, 0.5, 1.0];
    let at_one = ks.iter().find(|k| k.0 == 1.0).map(|k| k.1);
    let consistent = match (at_one, endpoint.and_then(|e| e.rows_named("ks").next())) {
        (Some(a), Some(b)) => (a - b.estimate).abs() <= 1e-12,
        _ => false,
    };
    let ess = rec.rows_named("ess").next().map_or(0.0, |r| r.estimate);
    let listed: Vec<String> = ks.iter().map(|(t, k)| format!("t={t}: {k:.4}")).collect();
    outcome(
        rec.all_passed() && all_t && ks.iter().all(|k| k.1 < 0.10) && consistent && ess >= 1000.0,
        format!("KS {} (limit 0.10), t = 1 matches the endpoint run: {consistent}, ESS {ess:.0}, {secs:.0} s; {}", listed.join(", "), summary(rec)),
    )
}

fn ladder_heights(rec: &ResultRecord) -> Result<Outcome, String> {
    let checks: Vec<_> = rec.verdicts.iter().filter(|v| v.name.starts_with("undershoot") || v.name.starts_with("overshoot")).collect();
    let worst = checks.iter().map(|v| v.value).fold(0.0, f64::max);
    let failed: Vec<String> = checks.iter().filter(|v| !v.passed).map(|v| v.line()).collect();
    outcome(
        checks.len() == 12 && failed.is_empty(),
        format!("{} comparisons, max z {worst:.2} (limit {Z_MAX}){}", checks.len(), if failed.is_empty() { String::new() } else { format!("; {}", failed.join("; ")) }),
    )
}

fn rwre() -> Result<Outcome, String> {
    let cfg = config("rwre")?;
    if cfg.budget.identity_excursions < 10_000 || cfg.n_grid.iter().any(|&n| n > 8) {
        return Err("rwre config must check 10^4 excursions at levels n <= 8".into());
    }
    let (rec, secs) = run(Experiment::Rwre, &cfg)?;
    let ids = rec.rows_named("identity_pass_rate").next().ok_or("no identity row")?;
    let levels = verdicts_starting(&rec, "P(max level").count();
    let worst = verdicts_starting(&rec, "P(max level").map(|v| v.value).fold(0.0, f64::max);
    outcome(
        rec.all_passed() && ids.estimate == 1.0 && ids.n_samples >= 10_000 && levels == cfg.n_grid.len(),
        format!("identities {:.0}% of {} excursions, {levels} levels with max z {worst:.2}, {secs:.0} s; {}", 100.0 * ids.estimate, ids.n_samples, summary(&rec)),
    )
}

fn contrast() -> Result<Outcome, String> {
    let cfg = config("contrast")?;
    let (rec, secs) = run(Experiment::Contrast, &cfg)?;
    let light: Vec<String> = rec.rows_named("p_tail_light").filter(|r| r.x == Some(1000.0)).map(|r| format!("{:.1e}", r.estimate)).collect();
    let heavy: Vec<String> = rec.rows_named("p_tail_heavy_scaled").map(|r| format!("{:.3}", r.estimate)).collect();
    outcome(
        rec.all_passed() && light.len() == 3 && heavy.len() == 3,
        format!("finite variance at N = 1000: {} (limit 0.05); heavy at exp(0.5 c_n): {} (min 0.1), {secs:.0} s; {}", light.join(", "), heavy.join(", "), summary(&rec)),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Result<Outcome, String>)> = Vec::new();
    let mut report = |id: usize, name: &'static str, r: Result<Outcome, String>| {
        let line = match &r {
            Ok(o) => format!("{} {id} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => format!("FAIL {id} {name}: {e}"),
        };
        println!("{line}");
        results.push((id, name, r));
    };

    report(1, "exact oracle", exact_oracle());
    report(2, "quenched identities", quenched_identities());
    report(3, "harmonic renewal function", harmonic_renewal());

    let overshoot = config("overshoot").and_then(|cfg| run(Experiment::Overshoot, &cfg));
    report(4, "tilt constant", overshoot.as_ref().map_err(Clone::clone).and_then(|(rec, secs)| tilt_constant(rec, *secs)));
    report(5, "extinction exponent and ladder hazard", theorem1());

    let end = config("theorem3").and_then(|cfg| run(Experiment::Theorem3, &cfg));
    report(6, "conditional endpoint law", end.as_ref().map_err(Clone::clone).and_then(|(rec, secs)| endpoint(rec, *secs)));
    let marg = config("theorem5").and_then(|cfg| {
        let end_cfg = config("theorem3")?;
        if cfg.seed != end_cfg.seed || cfg.x_grid != end_cfg.x_grid || cfg.budget != end_cfg.budget {
            return Err("the marginal run must share the endpoint run's seed, grid and budget".into());
        }
        run(Experiment::Theorem5, &cfg)
    });
    report(7, "conditional marginals", marg.and_then(|(rec, secs)| marginals(&rec, secs, end.as_ref().ok().map(|e| &e.0))));

    report(8, "ladder overshoot and undershoot", overshoot.as_ref().map_err(Clone::clone).and_then(|(rec, _)| ladder_heights(rec)));
    report(9, "RWRE correspondence", rwre());
    report(10, "sudden extinction contrast", contrast());

    let failed = results.iter().filter(|r| !matches!(&r.2, Ok(o) if o.passed)).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
