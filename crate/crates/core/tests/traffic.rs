use rwa_core::traffic::*;

#[test]
fn batch_size_mean_within_three_sigma() {
    let params = TrafficParams::new(4.0, 1.0).unwrap();
    let mut rng = rng_from_seed(11);
    let draws = 100_000;
    let total: u64 = (0..draws).map(|_| sample_batch(&params, 5, &mut rng).total() as u64).sum();
    let mean = total as f64 / draws as f64;
    let sigma = (4.0 / draws as f64).sqrt();
    assert!((mean - 4.0).abs() < 3.0 * sigma, "mean {mean}");
}

#[test]
fn tiny_rate_is_almost_surely_empty() {
    let params = TrafficParams::new(1e-4, 1.0).unwrap();
    assert!(sample_batch(&params, 4, &mut rng_from_seed(0)).is_empty());
}

#[test]
fn pairs_are_uniform() {
    let n = 5;
    let cells = n * (n - 1);
    let draws = 1_000_000;
    let mut counts = vec![0u64; n * n];
    let mut rng = rng_from_seed(12);
    for _ in 0..draws {
        let (s, d) = sample_pair(n, &mut rng);
        assert_ne!(s, d);
        counts[s * n + d] += 1;
    }
    let p = 1.0 / cells as f64;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for s in 0..n {
        for d in 0..n {
            if s != d {
                assert!((counts[s * n + d] as f64 - draws as f64 * p).abs() < 5.0 * sigma);
            }
        }
    }
}

fn truncated_series_mean(rate: f64) -> f64 {
    (1..10_000).map(|k| k as f64 * ((-rate * (k - 1) as f64).exp() - (-rate * k as f64).exp())).sum()
}

#[test]
fn holding_mean_matches_ceil_exponential() {
    let mean_holding = 26.0;
    let rate = 1.0 / mean_holding;
    let analytic = ceil_exponential_mean(rate);
    assert!((analytic - truncated_series_mean(rate)).abs() < 1e-9);
    let params = TrafficParams::new(1.0, mean_holding).unwrap();
    let mut rng = rng_from_seed(13);
    let draws = 200_000;
    let samples: Vec<usize> = (0..draws).map(|_| sample_holding(&params, &mut rng)).collect();
    assert!(samples.iter().all(|&h| h >= 1));
    let mean = samples.iter().sum::<usize>() as f64 / draws as f64;
    let var = samples.iter().map(|&h| (h as f64 - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    assert!((mean - analytic).abs() < 3.0 * (var / draws as f64).sqrt(), "{mean} vs {analytic}");
}

#[test]
fn scenario_samples() {
    let params = TrafficParams::new(3.0, 1.0).unwrap();
    let a = sample_scenarios(&params, 6, 50, 1);
    assert_eq!(a.len(), 50);
    assert_eq!(a, sample_scenarios(&params, 6, 50, 1));
    assert_ne!(a.scenarios, sample_scenarios(&params, 6, 50, 2).scenarios);
    assert_eq!(sample_scenarios(&params, 6, 1, 1).len(), 1);
    let json = serde_json::to_string(&a).unwrap();
    let back: ScenarioSample = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
    assert_eq!(serde_json::to_string(&back).unwrap(), json);
}

#[test]
fn requests_follow_the_same_laws() {
    let params = TrafficParams::new(2.0, 3.0).unwrap();
    let mut rng = rng_from_seed(14);
    let batches: Vec<_> = (0..20_000).map(|_| sample_requests(&params, 4, &mut rng)).collect();
    let n: usize = batches.iter().map(Vec::len).sum();
    let mean = n as f64 / batches.len() as f64;
    assert!((mean - 2.0).abs() < 3.0 * (2.0 / batches.len() as f64).sqrt());
    assert!(batches.iter().flatten().all(|r| r.holding >= 1 && r.pair.0 != r.pair.1 && r.pair.1 < 4));
}
