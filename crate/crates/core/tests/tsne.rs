use graphprobe::projection::{tsne, TsneConfig};
use rand::Rng as _;

fn blobs(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = graphprobe::seed::rng(seed, &[]);
    (0..n)
        .map(|i| {
            let mut p: Vec<f64> = (0..8).map(|_| rng.random_range(-0.5..0.5)).collect();
            p[i % 3] += 6.0;
            p
        })
        .collect()
}

#[test]
fn kl_settles_after_exaggeration() {
    for seed in 0..3 {
        let cfg = TsneConfig {
            seed,
            ..TsneConfig::default()
        };
        let (_, kl, trace) = tsne(&blobs(300, seed), &cfg).unwrap();
        let late: Vec<f64> = trace
            .iter()
            .filter(|(it, _)| *it > cfg.early_iterations)
            .map(|&(_, v)| v)
            .collect();
        assert!(late.len() > 10);
        for w in late.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "KL rose from {} to {}", w[0], w[1]);
        }
        assert!(late.last().unwrap() <= late.first().unwrap());
        assert_eq!(kl, *late.last().unwrap());
    }
}

#[test]
fn same_seed_same_layout() {
    let cfg = TsneConfig {
        perplexity: 10.0,
        iterations: 200,
        seed: 4,
        ..TsneConfig::default()
    };
    let points = blobs(90, 1);
    let a = tsne(&points, &cfg).unwrap();
    let b = tsne(&points, &cfg).unwrap();
    assert_eq!(a, b);
    let c = tsne(&points, &TsneConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.0, c.0);
}
