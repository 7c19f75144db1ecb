//! Small estimators for sweep outputs.

use serde::Serialize;

use crate::error::{Error, Result};

/// First time in a time-sorted trace at which `pred` holds.
pub fn hitting_time<T>(trace: &[(f64, T)], pred: impl Fn(&T) -> bool) -> Option<f64> {
    trace.iter().find(|(_, x)| pred(x)).map(|&(t, _)| t)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile; NaNs are rejected by returning `None`.
pub fn quantile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() || xs.iter().any(|x| x.is_nan()) || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Least squares of `times` against `ln ns`.
pub fn fit_log_slope(ns: &[f64], times: &[f64]) -> Result<LogFit> {
    if ns.len() != times.len() {
        return Err(Error::ShapeMismatch(ns.len(), times.len()));
    }
    if ns.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} points, need at least 3", ns.len())));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] <= 0.0 {
        return Err(Error::DegenerateInput("sizes must be positive and strictly increasing".into()));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = times.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(times).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(times).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(LogFit { slope, intercept, residual: (rss / m).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramRow {
    pub k: usize,
    pub count: u64,
    pub freq: f64,
}

/// Counts of each value `0..=max`.
pub fn histogram(values: &[usize]) -> Vec<HistogramRow> {
    let Some(&max) = values.iter().max() else {
        return Vec::new();
    };
    let mut counts = vec![0u64; max + 1];
    for &v in values {
        counts[v] += 1;
    }
    let total = values.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramRow { k, count, freq: count as f64 / total })
        .collect()
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("k,count,freq\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, r.count, r.freq));
    }
    out
}
