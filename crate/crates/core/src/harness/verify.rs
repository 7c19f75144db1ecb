use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    detailed_balance_error, exact_gibbs, verify_potts_domination, verify_potts_domination_with_beta,
    verify_psi_tail_bounds, verify_simple_convolution, PsiPmf,
};
use crate::coupling::EventStream;
use crate::dynamics::{
    run_potts_triple, CheckMode, GrandCoupling, InitSpec, RigidOptions, RigidPair, Silent, TwoSpinConfig, UpdateRule,
};
use crate::error::{Error, Result};
use crate::graph::{generate_random_regular, random_connected_subset, random_tree, Graph};
use crate::spacetime::trifurcation_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Invariants,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemmas" => Ok(Suite::Lemmas),
            "invariants" => Ok(Suite::Invariants),
            "all" => Ok(Suite::All),
            _ => Err(Error::Parse(format!("unknown suite `{s}` (lemmas, invariants, all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl SuiteCheck {
    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => SuiteCheck { name: name.to_string(), pass, detail },
            Err(e) => SuiteCheck { name: name.to_string(), pass: false, detail: format!("error: {e}") },
        }
    }
}

/// Runs the exhaustive lemma checks and/or short paranoid invariant runs.
pub fn verify_suite(suite: Suite) -> Vec<SuiteCheck> {
    let mut out = Vec::new();
    if suite != Suite::Invariants {
        out.push(SuiteCheck::from_result("potts_domination_grid", domination_grid()));
        out.push(SuiteCheck::from_result("potts_domination_margin_zero", domination_margin_zero()));
        out.push(SuiteCheck::from_result("simple_convolution", simple_convolution()));
        out.push(SuiteCheck::from_result("psi_tail_bounds", tail_bounds()));
    }
    if suite != Suite::Lemmas {
        out.push(SuiteCheck::from_result("grand_coupling_order", grand_order()));
        out.push(SuiteCheck::from_result("rigid_pair", rigid_pair()));
        out.push(SuiteCheck::from_result("potts_triple", potts_triple()));
        out.push(SuiteCheck::from_result("detailed_balance", detailed_balance()));
        out.push(SuiteCheck::from_result("trifurcation_bound", trifurcation_bound(500, 0)));
    }
    out
}

fn domination_grid() -> Result<(bool, String)> {
    let mut cases = 0;
    let mut failed = 0;
    for q in 2..=5usize {
        for d in 7..=12usize {
            for beta in [0.25, 0.5, 1.0, 2.0, 3.0] {
                let beta_p = 2.0 * beta + 7.0 * ((q - 1) as f64).ln() / d as f64;
                cases += 1;
                failed += (!verify_potts_domination(beta_p, q, d)?.pass) as usize;
            }
        }
    }
    Ok((failed == 0, format!("{failed} of {cases} parameter points failed")))
}

/// Without the `7 ln(q−1)/d` margin the comparison must break somewhere.
fn domination_margin_zero() -> Result<(bool, String)> {
    let mut witnesses = 0;
    for d in 7..=12usize {
        for beta in [0.25, 0.5, 1.0, 2.0, 3.0] {
            witnesses += verify_potts_domination_with_beta(beta, 2.0 * beta, 3, d)?.witnesses.len();
        }
    }
    Ok((witnesses > 0, format!("{witnesses} witnesses at q=3, beta_p=2beta")))
}

fn simple_convolution() -> Result<(bool, String)> {
    let p = PsiPmf::new(7, 10.0, 2.0, 50)?;
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for q in 1..=7 {
        let r = verify_simple_convolution(&p, q, 50)?;
        pass &= r.pass;
        worst = worst.min(r.worst_margin);
    }
    Ok((pass, format!("q = 1..7, worst log margin {worst:.4}")))
}

fn tail_bounds() -> Result<(bool, String)> {
    let p = PsiPmf::new(7, 10.0, 2.0, 50)?;
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for q in 1..=7 {
        let r = verify_psi_tail_bounds(&p, q, 20)?;
        pass &= r.pass;
        worst = worst.min(r.worst_margin);
    }
    Ok((pass, format!("q = 1..7, worst log margin {worst:.4}")))
}

fn grand_order() -> Result<(bool, String)> {
    let g = generate_random_regular(200, 7, 1)?;
    let rules = [
        UpdateRule::ising(1.0)?,
        UpdateRule::noisy_majority(0.1)?,
        UpdateRule::potts_dominating(6.0 + 2f64.ln(), 3, 7)?,
    ];
    let mut order = 0;
    let mut scan = 0;
    for (i, rule) in rules.iter().enumerate() {
        let inits = vec![
            TwoSpinConfig::all_minus(200),
            TwoSpinConfig::biased(200, 0.0, i as u64)?,
            TwoSpinConfig::all_plus(200),
        ];
        let mut gc =
            GrandCoupling::new(&g, rule, inits, EventStream::new(10 + i as u64, 200))?.with_clusters(CheckMode::Paranoid);
        gc.advance_to(3.0, &mut Silent)?;
        order += gc.order_violations();
        scan += gc.scan_violations().total();
    }
    Ok((order + scan == 0, format!("{order} order violations, {scan} cluster-store violations")))
}

fn rigid_pair() -> Result<(bool, String)> {
    let g = generate_random_regular(200, 7, 2)?;
    let mut opts = RigidOptions::new(2);
    opts.check = CheckMode::Paranoid;
    let mut pair = RigidPair::new(&g, &UpdateRule::ising(0.3)?, EventStream::new(3, 200), opts)?;
    pair.advance_to(3.0, &mut Silent)?;
    let r = pair.summary();
    let bad = r.domination_violations + r.structure.total() + r.scan.total();
    Ok((
        bad == 0,
        format!(
            "{} events, {} rejections, {} domination, {} structure, {} store violations",
            r.events,
            r.rejected,
            r.domination_violations,
            r.structure.total(),
            r.scan.total()
        ),
    ))
}

fn potts_triple() -> Result<(bool, String)> {
    let g = generate_random_regular(200, 7, 3)?;
    let y0 = InitSpec::Biased(0.9).potts(200, 3, 4)?;
    let r = run_potts_triple(&g, y0, 6.0 + 2f64.ln(), EventStream::new(5, 200), 5.0, CheckMode::Paranoid)?;
    let bad = r.legacy_violations + r.minus_violations + r.post_extinction_disagreements;
    Ok((
        bad == 0,
        format!(
            "{} events, extinction {:?}, {} inclusion violations, {} post-extinction disagreements",
            r.events,
            r.extinction_time,
            r.legacy_violations + r.minus_violations,
            r.post_extinction_disagreements
        ),
    ))
}

/// Small graphs whose full state space is at most 2¹².
pub fn detailed_balance_fixtures() -> Vec<(String, Graph, UpdateRule)> {
    let mut out = Vec::new();
    for beta in [0.0, 0.5, 1.0, 2.0] {
        out.push((format!("K4 ising beta={beta}"), Graph::complete(4), UpdateRule::Ising { beta }));
    }
    for beta in [0.0, 0.3, 1.0] {
        out.push((format!("petersen ising beta={beta}"), Graph::petersen(), UpdateRule::Ising { beta }));
    }
    out.push(("C12 ising beta=0.7".into(), Graph::cycle(12), UpdateRule::Ising { beta: 0.7 }));
    out.push(("K3 potts q=3 beta_p=1".into(), Graph::complete(3), UpdateRule::PottsGlauber { beta_p: 1.0, q: 3 }));
    out.push(("C6 potts q=4 beta_p=0.8".into(), Graph::cycle(6), UpdateRule::PottsGlauber { beta_p: 0.8, q: 4 }));
    out
}

fn detailed_balance() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (_, g, rule) in detailed_balance_fixtures() {
        let pi = exact_gibbs(&g, &rule)?;
        worst = worst.max(detailed_balance_error(&g, &rule, &pi)?);
    }
    Ok((worst <= 1e-10, format!("worst relative error {worst:.3e}")))
}

/// Brute-force trifurcation counts on random connected subsets of random
/// trees never exceed `⌊|A|/2⌋`. Returns the number of failing instances.
pub fn trifurcation_instances(instances: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut max_seen = 0;
    for _ in 0..instances {
        let tree = random_tree(rng.random_range(2..=120), &mut rng);
        let size = rng.random_range(1..=40);
        let set = random_connected_subset(&tree, size, &mut rng);
        // Any radius at least the diameter of the set sees every branch.
        let count = trifurcation_points(&tree, &set, set.len()).len();
        max_seen = max_seen.max(count);
        failures += (count > set.len() / 2) as usize;
    }
    (failures, max_seen)
}

fn trifurcation_bound(instances: usize, seed: u64) -> Result<(bool, String)> {
    let (failures, max_seen) = trifurcation_instances(instances, seed);
    Ok((failures == 0, format!("{failures} of {instances} instances over the bound, largest count {max_seen}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("most".parse::<Suite>().is_err());
    }

    #[test]
    fn lemma_suite_passes() {
        let checks = verify_suite(Suite::Lemmas);
        assert_eq!(checks.len(), 4);
        for c in checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn fixtures_fit_the_state_budget() {
        for (name, g, rule) in detailed_balance_fixtures() {
            let size = exact_gibbs(&g, &rule).unwrap().len();
            assert!(size <= 1 << 12, "{name}: {size}");
        }
    }

    #[test]
    fn trifurcation_bound_on_small_sample() {
        assert_eq!(trifurcation_instances(200, 9).0, 0);
    }
}
