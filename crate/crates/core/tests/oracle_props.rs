use proptest::prelude::*;
use spinlab::analysis::{convolve_log, detailed_balance_error, exact_gibbs, tv_distance};
use spinlab::dynamics::UpdateRule;
use spinlab::graph::Graph;

fn pmf_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..8).prop_map(|w| {
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    })
}

/// q-fold convolution by repeated pairwise sums in linear space.
fn linear_power(pmf: &[f64], q: usize) -> Vec<f64> {
    let mut acc = vec![1.0];
    for _ in 0..q {
        let mut next = vec![0.0; acc.len() + pmf.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            for (j, b) in pmf.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    acc
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..8)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0..n as u32, 0..n as u32), 0..14)))
        .prop_map(|(n, pairs)| {
            let mut edges: Vec<(u32, u32)> =
                pairs.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
            edges.sort_unstable();
            edges.dedup();
            Graph::from_edges(n, &edges).unwrap()
        })
}

proptest! {
    #[test]
    fn log_convolution_matches_linear(pmf in pmf_strategy(), q in 1usize..5) {
        let logs: Vec<f64> = pmf.iter().map(|x| x.ln()).collect();
        let got = convolve_log(&logs, q).unwrap();
        let want = linear_power(&pmf, q);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g.exp() - w).abs() <= 1e-12 * w.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn gibbs_is_reversible_for_glauber(g in graph_strategy(), beta in 0.0f64..3.0, q in 2u32..4) {
        let ising = UpdateRule::ising(beta).unwrap();
        let pi = exact_gibbs(&g, &ising).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(detailed_balance_error(&g, &ising, &pi).unwrap() <= 1e-10);
        if g.n() <= 6 {
            let potts = UpdateRule::potts_glauber(2.0 * beta, q).unwrap();
            let pi = exact_gibbs(&g, &potts).unwrap();
            prop_assert!(detailed_balance_error(&g, &potts, &pi).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn tv_is_a_metric_on_pmfs(a in pmf_strategy(), b in pmf_strategy()) {
        let k = a.len().min(b.len());
        let norm = |p: &[f64]| { let z: f64 = p.iter().sum(); p.iter().map(|x| x / z).collect::<Vec<_>>() };
        let (a, b) = (norm(&a[..k]), norm(&b[..k]));
        let ab = tv_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - tv_distance(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(tv_distance(&a, &a).unwrap() < 1e-15);
    }
}

#[test]
fn empty_graph_gibbs_is_uniform() {
    let g = Graph::from_edges(3, &[]).unwrap();
    let pi = exact_gibbs(&g, &UpdateRule::ising(2.0).unwrap()).unwrap();
    assert!(pi.iter().all(|&p| (p - 0.125).abs() < 1e-15));
}
