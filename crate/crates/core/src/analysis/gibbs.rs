//! Exact Gibbs measures on tiny graphs and empirical occupation measures.
//!
//! Two-spin configurations are indexed by [`TwoSpinConfig::code`] (bit `v`
//! set iff `v` is plus); Potts configurations by base-`q` digits with digit
//! `s-1` at position `v`.

use crate::coupling::EventStream;
use crate::dynamics::{apply_two_spin, potts_conditional_counts, PlusTable, TwoSpinConfig, UpdateRule};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest state space the exact oracles enumerate.
pub const MAX_STATES: u128 = 1 << 20;

fn state_count(g: &Graph, rule: &UpdateRule) -> Result<(usize, usize)> {
    let q = match *rule {
        UpdateRule::Ising { .. } => 2,
        UpdateRule::PottsGlauber { q, .. } => q as usize,
        _ => return Err(Error::NonReversibleRule),
    };
    let size = (q as u128).checked_pow(g.n() as u32).unwrap_or(u128::MAX);
    if size > MAX_STATES {
        return Err(Error::StateSpaceTooLarge { size });
    }
    Ok((q, size as usize))
}

fn digits(mut index: usize, q: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let d = index % q;
            index /= q;
            d
        })
        .collect()
}

/// Boltzmann weights for every configuration, normalized.
///
/// Accepts any [`Graph`], regular or not. Ising uses `exp(β Σ_edges σ_u σ_v)`;
/// Potts uses `exp(β_p Σ_edges 1{σ_u = σ_v})`.
pub fn exact_gibbs(g: &Graph, rule: &UpdateRule) -> Result<Vec<f64>> {
    rule.validate()?;
    let (q, size) = state_count(g, rule)?;
    let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (u as usize, v as usize)).collect();
    let energy: Vec<f64> = (0..size)
        .map(|i| match *rule {
            UpdateRule::Ising { beta } => {
                let s = |v: usize| if i >> v & 1 == 1 { 1.0 } else { -1.0 };
                beta * edges.iter().map(|&(u, v)| s(u) * s(v)).sum::<f64>()
            }
            UpdateRule::PottsGlauber { beta_p, .. } => {
                let x = digits(i, q, g.n());
                beta_p * edges.iter().filter(|&&(u, v)| x[u] == x[v]).count() as f64
            }
            _ => unreachable!(),
        })
        .collect();
    let top = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = energy.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Largest relative violation of `π(σ) r(σ→σ') = π(σ') r(σ'→σ)` over all
/// pairs differing at one site, with heat-bath Glauber rates.
pub fn detailed_balance_error(g: &Graph, rule: &UpdateRule, pi: &[f64]) -> Result<f64> {
    let (q, size) = state_count(g, rule)?;
    if pi.len() != size {
        return Err(Error::ShapeMismatch(pi.len(), size));
    }
    let n = g.n();
    let pow: Vec<usize> = (0..n).map(|v| q.pow(v as u32)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..size {
        let x = digits(i, q, n);
        for v in 0..n {
            let mut counts = vec![0usize; q];
            for &w in g.neighbors(v) {
                counts[x[w as usize]] += 1;
            }
            let cond = match *rule {
                UpdateRule::Ising { beta } => {
                    // Both sides from the field directly; 1 - p loses digits when p is near 1.
                    let field = 2.0 * counts[1] as f64 - g.degree(v) as f64;
                    let logistic = |h: f64| 1.0 / (1.0 + (-2.0 * beta * h).exp());
                    vec![logistic(-field), logistic(field)]
                }
                UpdateRule::PottsGlauber { beta_p, .. } => potts_conditional_counts(beta_p, &counts),
                _ => unreachable!(),
            };
            for s in 0..q {
                if s == x[v] {
                    continue;
                }
                let j = i - x[v] * pow[v] + s * pow[v];
                let forward = pi[i] * cond[s];
                let backward = pi[j] * cond[x[v]];
                let scale = forward.abs().max(backward.abs());
                if scale > 0.0 {
                    worst = worst.max((forward - backward).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Time-weighted occupation of every configuration along one two-spin
/// trajectory of `events` clock rings from `init`. `n` must be at most 20.
pub fn occupation_measure(g: &Graph, rule: &UpdateRule, init: TwoSpinConfig, seed: u64, events: u64) -> Result<Vec<f64>> {
    let n = g.n();
    if n > 20 {
        return Err(Error::StateSpaceTooLarge { size: 1u128 << n });
    }
    if init.n() != n {
        return Err(Error::ShapeMismatch(init.n(), n));
    }
    let table = PlusTable::new(rule, g.d())?;
    let mut occ = vec![0.0; 1 << n];
    let mut cfg = init;
    let mut code = cfg.code() as usize;
    let mut last = 0.0;
    let mut stream = EventStream::new(seed, n);
    for _ in 0..events {
        let ev = stream.next_event();
        occ[code] += ev.time - last;
        last = ev.time;
        let (old, new) = apply_two_spin(&mut cfg, &table, &ev, g, None);
        if old != new {
            code ^= 1 << ev.vertex;
        }
    }
    if last <= 0.0 {
        return Err(Error::DegenerateInput("no time elapsed".into()));
    }
    Ok(occ.into_iter().map(|t| t / last).collect())
}

fn check_distribution(p: &[f64]) -> Result<()> {
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter(format!("not a probability vector (sum {s})")));
    }
    Ok(())
}

pub fn tv_distance(p: &[f64], r: &[f64]) -> Result<f64> {
    if p.len() != r.len() {
        return Err(Error::ShapeMismatch(p.len(), r.len()));
    }
    check_distribution(p)?;
    check_distribution(r)?;
    Ok(0.5 * p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Conditional law on the configurations selected by `keep`.
pub fn restrict_to_phase(p: &[f64], keep: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    let mass: f64 = p.iter().enumerate().filter(|&(i, _)| keep(i)).map(|(_, &x)| x).sum();
    if mass <= 0.0 {
        return Err(Error::NullEvent);
    }
    Ok(p.iter().enumerate().map(|(i, &x)| if keep(i) { x / mass } else { 0.0 }).collect())
}

/// Plus phase for two-spin codes on `n` vertices: magnetization `>= 0`.
pub fn ising_plus_phase(n: usize) -> impl Fn(usize) -> bool {
    move |code: usize| 2 * code.count_ones() as usize >= n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_is_uniform() {
        let g = Graph::complete(4);
        let pi = exact_gibbs(&g, &UpdateRule::Ising { beta: 0.0 }).unwrap();
        assert!(pi.iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn k4_weights_by_hand() {
        let g = Graph::complete(4);
        let beta = 1.0;
        let pi = exact_gibbs(&g, &UpdateRule::Ising { beta }).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Σ over edges of σ_u σ_v on K4 with j plus spins: C(j,2)+C(4-j,2)-j(4-j).
        let weight = |j: i32| (beta * ((j * (j - 1) / 2 + (4 - j) * (3 - j) / 2 - j * (4 - j)) as f64)).exp();
        let z: f64 = (0..16u32).map(|c| weight(c.count_ones() as i32)).sum();
        for c in 0..16usize {
            assert!((pi[c] - weight(c.count_ones() as i32) / z).abs() < 1e-14);
        }
        for c in 0..16usize {
            assert!((pi[c] - pi[15 - c]).abs() < 1e-15);
        }
    }

    #[test]
    fn relaxed_graphs_and_rejections() {
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let pi = exact_gibbs(&edge, &UpdateRule::Ising { beta: 0.5 }).unwrap();
        let (a, b) = (0.5f64.exp(), (-0.5f64).exp());
        assert!((pi[0] - a / (2.0 * a + 2.0 * b)).abs() < 1e-15);
        assert!((pi[1] - b / (2.0 * a + 2.0 * b)).abs() < 1e-15);
        assert_eq!(exact_gibbs(&edge, &UpdateRule::NoisyMajority { p: 0.1 }), Err(Error::NonReversibleRule));
        let big = Graph::cycle(21);
        assert!(matches!(exact_gibbs(&big, &UpdateRule::Ising { beta: 0.1 }), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn detailed_balance_small() {
        let tri = Graph::complete(3);
        for rule in [UpdateRule::Ising { beta: 0.7 }, UpdateRule::PottsGlauber { beta_p: 1.1, q: 3 }] {
            let pi = exact_gibbs(&tri, &rule).unwrap();
            assert!(detailed_balance_error(&tri, &rule, &pi).unwrap() < 1e-10);
        }
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn phase_restriction() {
        let p = vec![1.0 / 16.0; 16];
        assert_eq!(restrict_to_phase(&p, |_| true).unwrap(), p);
        let plus = restrict_to_phase(&p, ising_plus_phase(4)).unwrap();
        assert_eq!(plus.iter().filter(|&&x| x > 0.0).count(), 11);
        assert!((plus.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(plus.iter().filter(|&&x| x > 0.0).all(|&x| (x - 1.0 / 11.0).abs() < 1e-15));
        assert_eq!(restrict_to_phase(&p, |_| false), Err(Error::NullEvent));
    }

    #[test]
    fn occupation_sums_to_one() {
        let g = Graph::complete(4);
        let occ = occupation_measure(&g, &UpdateRule::Ising { beta: 0.0 }, TwoSpinConfig::all_plus(4), 1, 10_000).unwrap();
        assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
