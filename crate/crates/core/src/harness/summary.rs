use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::run::ExperimentRecord;
use super::RuleSpec;
use crate::analysis::{fit_log_slope, quantile, LogFit};
use crate::error::{Error, Result};

/// Observables whose medians are regressed on `ln n`.
const SLOPE_OBSERVABLES: [&str; 3] = ["extinction_time", "tau_r", "reach_time"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(xs: &[f64]) -> Option<Quantiles> {
        let q = |p| quantile(xs, p);
        Some(Quantiles {
            count: xs.len(),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            median: q(0.5)?,
            q10: q(0.1)?,
            q90: q(0.9)?,
            min: q(0.0)?,
            max: q(1.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub experiment: String,
    pub n: usize,
    pub rule: String,
    pub records: usize,
    pub errors: usize,
    /// Scalar observables; booleans count as 0/1 and nulls are skipped.
    pub observables: BTreeMap<String, Quantiles>,
    pub violations: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub experiment: String,
    pub rule: String,
    pub observable: String,
    pub ns: Vec<usize>,
    pub medians: Vec<f64>,
    pub fit: LogFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub slopes: Vec<SlopeSummary>,
    pub total_violations: u64,
    pub errors: usize,
    /// Some invariant counter or lemma check failed. Errored cells are
    /// reported separately and do not set this.
    pub failed: bool,
}

/// Reads a JSONL file, or every `*.jsonl` file of a directory in name order.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let files = if path.is_dir() {
        let mut fs: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        fs.sort();
        fs
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f)?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec = serde_json::from_str(line)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", f.display(), i + 1)))?;
            out.push(rec);
        }
    }
    Ok(out)
}

pub(crate) fn rule_label(r: &RuleSpec) -> String {
    let mut s = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let parts: Vec<String> = [("beta", r.beta), ("beta_p", r.beta_p), ("p", r.p), ("q", r.q.map(f64::from))]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
        .collect();
    if !parts.is_empty() {
        s.push('(');
        s.push_str(&parts.join(" "));
        s.push(')');
    }
    s
}

fn scalar(v: &Value) -> Option<f64> {
    match v {
        Value::Number(x) => x.as_f64(),
        Value::Bool(b) => Some(*b as u8 as f64),
        _ => None,
    }
}

pub fn summarize(records: &[ExperimentRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut grouped: BTreeMap<(String, String, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry((r.experiment.clone(), rule_label(&r.rule), r.graph.n)).or_default().push(r);
    }
    let mut groups = Vec::new();
    for ((experiment, rule, n), recs) in grouped {
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut violations: BTreeMap<String, u64> = BTreeMap::new();
        for r in &recs {
            for (k, v) in &r.observables {
                if let Some(x) = scalar(v) {
                    values.entry(k.clone()).or_default().push(x);
                }
            }
            for (k, &v) in &r.violations {
                *violations.entry(k.clone()).or_default() += v;
            }
        }
        groups.push(GroupSummary {
            experiment,
            n,
            rule,
            records: recs.len(),
            errors: recs.iter().filter(|r| r.error.is_some()).count(),
            observables: values.into_iter().filter_map(|(k, xs)| Quantiles::of(&xs).map(|q| (k, q))).collect(),
            violations,
        });
    }

    let mut slopes = Vec::new();
    let mut by_series: BTreeMap<(String, String), Vec<&GroupSummary>> = BTreeMap::new();
    for g in &groups {
        by_series.entry((g.experiment.clone(), g.rule.clone())).or_default().push(g);
    }
    for ((experiment, rule), gs) in by_series {
        for obs in SLOPE_OBSERVABLES {
            let pts: Vec<(usize, f64)> =
                gs.iter().filter_map(|g| g.observables.get(obs).map(|q| (g.n, q.median))).collect();
            if pts.len() < 3 {
                continue;
            }
            let ns: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
            let medians: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(fit) = fit_log_slope(&ns, &medians) {
                slopes.push(SlopeSummary {
                    experiment: experiment.clone(),
                    rule: rule.clone(),
                    observable: obs.to_string(),
                    ns: pts.iter().map(|p| p.0).collect(),
                    medians,
                    fit,
                });
            }
        }
    }

    let total_violations = groups.iter().flat_map(|g| g.violations.values()).sum();
    let errors = groups.iter().map(|g| g.errors).sum();
    Ok(Summary { groups, slopes, total_violations, errors, failed: total_violations > 0 })
}

impl Summary {
    pub const CSV_HEADER: &'static str = "experiment,rule,n,observable,count,mean,median,q10,q90,min,max";

    /// One row per (group, observable).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for g in &self.groups {
            for (k, q) in &g.observables {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    g.experiment, g.rule, g.n, k, q.count, q.mean, q.median, q.q10, q.q90, q.min, q.max
                ));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            out.push_str(&format!("{} {} n={} records={} errors={}\n", g.experiment, g.rule, g.n, g.records, g.errors));
            for (k, q) in &g.observables {
                out.push_str(&format!(
                    "  {k:<28} median {:>12.4} [q10 {:.4}, q90 {:.4}] over {}\n",
                    q.median, q.q10, q.q90, q.count
                ));
            }
            for (k, v) in g.violations.iter().filter(|(_, &v)| v > 0) {
                out.push_str(&format!("  VIOLATION {k}: {v}\n"));
            }
        }
        for s in &self.slopes {
            out.push_str(&format!(
                "{} {} {} ~ {:.4} ln n + {:.4} (rms residual {:.4}) over n = {:?}\n",
                s.experiment, s.rule, s.observable, s.fit.slope, s.fit.intercept, s.fit.residual, s.ns
            ));
        }
        out.push_str(&format!(
            "total violations {}, errored cells {}: {}\n",
            self.total_violations,
            self.errors,
            if self.failed { "FAILED" } else { "ok" }
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::GraphMeta;
    use crate::harness::GraphKind;
    use serde_json::json;

    fn rec(n: usize, t: Option<f64>, viol: u64) -> ExperimentRecord {
        ExperimentRecord {
            experiment: "extinction_scaling".into(),
            graph: GraphMeta { kind: GraphKind::Random, n, d: 7, seed: 0 },
            rule: RuleSpec::ising(3.0),
            init: "biased:0.99".into(),
            replica: 0,
            spec_seed: 0,
            stream_seed: 0,
            init_seed: 0,
            generator: "ChaCha8Rng".into(),
            horizon: 1.0,
            check_mode: crate::dynamics::CheckMode::Normal,
            observables: BTreeMap::from([
                ("extinction_time".into(), json!(t)),
                ("extinct".into(), json!(t.is_some())),
                ("series".into(), json!([1, 2])),
            ]),
            violations: BTreeMap::from([("store_scan".into(), viol)]),
            wall_clock_s: 0.0,
            error: None,
        }
    }

    #[test]
    fn groups_and_slopes() {
        let mut recs = Vec::new();
        for (i, n) in [100usize, 1000, 10000].into_iter().enumerate() {
            for j in 0..3 {
                recs.push(rec(n, Some(2.0 * (n as f64).ln() + j as f64 - 1.0), 0));
            }
            if i == 0 {
                recs.push(rec(n, None, 0));
            }
        }
        let s = summarize(&recs).unwrap();
        assert_eq!(s.groups.len(), 3);
        let g0 = &s.groups[0];
        assert_eq!(g0.observables["extinction_time"].count, 3);
        assert_eq!(g0.observables["extinct"].mean, 0.75);
        assert!(!g0.observables.contains_key("series"));
        assert_eq!(s.slopes.len(), 1);
        assert!((s.slopes[0].fit.slope - 2.0).abs() < 1e-9);
        assert!(!s.failed);
        assert!(s.to_csv().starts_with(Summary::CSV_HEADER));
    }

    #[test]
    fn violations_fail_the_summary() {
        let s = summarize(&[rec(10, Some(1.0), 2)]).unwrap();
        assert!(s.failed);
        assert_eq!(s.total_violations, 2);
        assert!(s.to_text().contains("VIOLATION store_scan: 2"));
        assert_eq!(summarize(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn rule_labels() {
        assert_eq!(rule_label(&RuleSpec::ising(3.0)), "ising(beta=3)");
    }
}
