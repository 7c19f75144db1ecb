//! Exhaustive check that the Potts conditional probability of state 1
//! dominates the threshold two-spin `p_plus` once state 1 holds a 4/7
//! supermajority of the neighbors.

use serde_json::json;

use super::Report;
use crate::dynamics::dominating_beta;
use crate::error::{Error, Result};

/// Calls `f` on every composition of `total` into `parts` non-negative parts.
fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, slot: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == buf.len() {
            buf[slot] = rest;
            f(buf);
            return;
        }
        for k in 0..=rest {
            buf[slot] = k;
            rec(rest - k, slot + 1, buf, f);
        }
    }
    let mut buf = vec![0; parts];
    rec(total, 0, &mut buf, f);
}

/// Uses the derived `β = (β_p − 7 ln(q−1)/d)/2`.
pub fn verify_potts_domination(beta_p: f64, q: usize, d: usize) -> Result<Report> {
    if q < 2 || d == 0 {
        return Err(Error::InvalidParameter(format!("q = {q}, d = {d}")));
    }
    let beta = dominating_beta(beta_p, q as u32, d)?;
    verify_potts_domination_with_beta(beta, beta_p, q, d)
}

/// Same enumeration with `β` given directly, so that pairs violating the
/// required margin between `β_p` and `2β` can be probed.
pub fn verify_potts_domination_with_beta(beta: f64, beta_p: f64, q: usize, d: usize) -> Result<Report> {
    if q < 2 || d == 0 {
        return Err(Error::InvalidParameter(format!("q = {q}, d = {d}")));
    }
    if beta <= 0.0 {
        return Err(Error::ParameterTooSmall { beta });
    }
    let target = 1.0 / (1.0 + (-2.0 * beta * d as f64 / 7.0).exp());
    let mut report = Report::new("potts_domination", json!({"beta": beta, "beta_p": beta_p, "q": q, "d": d}));
    for_each_composition(d, q, &mut |k: &[usize]| {
        if 7 * k[0] < 4 * d {
            return;
        }
        let top = *k.iter().max().unwrap() as f64;
        let z: f64 = k.iter().map(|&c| (beta_p * (c as f64 - top)).exp()).sum();
        let p1 = (beta_p * (k[0] as f64 - top)).exp() / z;
        report.record(p1 - target, 1e-12, || json!({"counts": k, "p1": p1, "p_plus": target}));
    });
    Ok(report)
}
