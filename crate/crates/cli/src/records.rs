//! Result tables and verdicts, and their CSV / JSON serialisation.
//!
//! Quantities whose name starts with `p_` are probabilities. Every row
//! carries its sample count and standard error so that verdicts can be
//! recomputed from the table alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use bpre_core::estimators::{McEstimate, Proportion};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub quantity: String,
    pub n: Option<usize>,
    pub x: Option<f64>,
    pub t: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    pub ess: Option<f64>,
    pub reference: Option<f64>,
    pub verdict: Option<&'static str>,
}

impl Row {
    pub fn new(quantity: &str, est: McEstimate) -> Self {
        Self {
            quantity: quantity.to_string(),
            n: None,
            x: None,
            t: None,
            estimate: est.mean,
            stderr: est.stderr,
            ci_low: est.ci_low.min(est.mean),
            ci_high: est.ci_high.max(est.mean),
            n_samples: est.n_samples,
            ess: None,
            reference: None,
            verdict: None,
        }
    }

    pub fn proportion(quantity: &str, p: Proportion) -> Self {
        Self::new(quantity, McEstimate { mean: p.estimate, stderr: p.stderr, n_samples: p.trials, ci_low: p.ci_low, ci_high: p.ci_high })
    }

    /// A derived number without sampling error of its own, such as a distance.
    pub fn exact(quantity: &str, value: f64, n_samples: u64) -> Self {
        Self::new(quantity, McEstimate { mean: value, stderr: 0.0, n_samples, ci_low: value, ci_high: value })
    }

    pub fn at_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn at_x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_ess(mut self, ess: f64) -> Self {
        self.ess = Some(ess);
        self
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn judged(mut self, passed: bool) -> Self {
        self.verdict = Some(if passed { "pass" } else { "fail" });
        self
    }

    pub fn is_probability(&self) -> bool {
        self.quantity.starts_with("p_")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Self::Below => value < threshold,
            Self::AtMost => value <= threshold,
            Self::AtLeast => value >= threshold,
            Self::Above => value > threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Self::Below => "<",
            Self::AtMost => "<=",
            Self::AtLeast => ">=",
            Self::Above => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        // NaN never passes
        let passed = comparison.holds(value, threshold);
        Self { name: name.into(), value, comparison, threshold, passed }
    }

    pub fn check(name: impl Into<String>, passed: bool) -> Self {
        Self::new(name, if passed { 1.0 } else { 0.0 }, Comparison::AtLeast, 1.0)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_num(self.value),
            self.comparison.symbol(),
            fmt_num(self.threshold)
        )
    }
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn new(experiment: &str, parameters: serde_json::Value) -> Self {
        Self { experiment: experiment.to_string(), parameters, rows: Vec::new(), verdicts: Vec::new(), warnings: Vec::new(), wall_time_s: 0.0 }
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn rows_named<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Table invariants: probabilities in `[0, 1]` and intervals around
    /// their estimates. Returns the offending rows.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for r in &self.rows {
            if r.is_probability() && !(0.0..=1.0).contains(&r.estimate) {
                bad.push(format!("{} outside [0, 1]: {}", r.quantity, r.estimate));
            }
            if !(r.ci_low <= r.estimate && r.estimate <= r.ci_high) {
                bad.push(format!("{} interval [{}, {}] misses {}", r.quantity, r.ci_low, r.ci_high, r.estimate));
            }
            if r.is_probability() && !(r.stderr >= 0.0 && r.n_samples > 0) {
                bad.push(format!("{} lacks a standard error or sample count", r.quantity));
            }
        }
        bad
    }

    /// Writes `<stem>.csv` and `<stem>_verdicts.csv`. Wall time is left out
    /// so that repeated runs produce identical bytes.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let table = dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&table)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let verdicts = dir.join(format!("{stem}_verdicts.csv"));
        let mut w = csv::Writer::from_path(&verdicts)?;
        for v in &self.verdicts {
            w.serialize(v)?;
        }
        w.flush()?;
        Ok(vec![table, verdicts])
    }

    pub fn write_json(&self, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}.json"));
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(vec![path])
    }
}
