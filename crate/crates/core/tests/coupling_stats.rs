use spinlab::coupling::{mix_seeds, EventStream};

const EVENTS: usize = 400_000;

#[test]
fn merged_stream_has_rate_n_and_uniform_marks() {
    let n = 50;
    let mut s = EventStream::new(2024, n);
    let mut last = 0.0;
    let mut gaps = Vec::with_capacity(EVENTS);
    let mut hits = vec![0usize; n];
    let mut u_sum = 0.0;
    let mut u_sq = 0.0;
    for _ in 0..EVENTS {
        let ev = s.next_event();
        assert!(ev.time > last);
        assert!(ev.uniform > 0.0 && ev.uniform < 1.0);
        gaps.push(ev.time - last);
        last = ev.time;
        hits[ev.vertex as usize] += 1;
        u_sum += ev.uniform;
        u_sq += ev.uniform * ev.uniform;
    }
    let m = EVENTS as f64;
    // Exp(n): mean 1/n, sd 1/n, so the sample mean has sd 1/(n sqrt(m)).
    let mean_gap = gaps.iter().sum::<f64>() / m;
    assert!((mean_gap * n as f64 - 1.0).abs() < 5.0 / m.sqrt(), "mean gap {mean_gap}");
    let second = gaps.iter().map(|g| g * g).sum::<f64>() / m * (n * n) as f64;
    assert!((second - 2.0).abs() < 0.05, "second moment {second}");
    // Vertex marks: chi-square with n-1 = 49 degrees of freedom; 99.99% quantile is about 95.
    let expect = m / n as f64;
    let chi2: f64 = hits.iter().map(|&h| (h as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 95.0, "chi2 {chi2}");
    // Uniform marks: mean 1/2 and variance 1/12.
    let mean_u = u_sum / m;
    let var_u = u_sq / m - mean_u * mean_u;
    assert!((mean_u - 0.5).abs() < 5.0 * (1.0 / 12f64).sqrt() / m.sqrt());
    assert!((var_u - 1.0 / 12.0).abs() < 2e-3);
}

#[test]
fn seeds_reproduce_and_replicas_differ() {
    let a: Vec<_> = EventStream::new(9, 10).take(100).collect();
    let b: Vec<_> = EventStream::new(9, 10).take(100).collect();
    assert_eq!(a, b);
    let r0: Vec<_> = EventStream::fork_replica(9, 0, 10).take(100).collect();
    let r1: Vec<_> = EventStream::fork_replica(9, 1, 10).take(100).collect();
    assert_ne!(r0, r1);
    assert_ne!(mix_seeds(&[1, 2]), mix_seeds(&[2, 1]));
    assert_eq!(mix_seeds(&[1, 2, 3]), mix_seeds(&[1, 2, 3]));
}
