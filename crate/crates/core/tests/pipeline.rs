use gridclust::synth::{generate, misplacement_rate, Pattern, SynthSpec};
use gridclust::{
    agglomerate, apply_merge, build_dendrogram, evaluate, fit, kept_information, kl_dissimilarity, Dimension, Merge,
    SearchConfig, SufficientStats,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn synthetic_hierarchy_joins_the_true_patterns() {
    let data = generate(&SynthSpec::new(2000, 0)).unwrap();
    let ds = &data.dataset;
    let result = fit(ds, &SearchConfig::with_seed(0));
    assert_eq!(result.model.k_c, 4);
    assert_eq!(misplacement_rate(&result, &data.truth), 0.0);
    let events = agglomerate(ds, &result);
    assert_eq!(events.iter().filter(|e| e.dimension == Dimension::Cluster).count(), 3);
    // the first cluster merge picks the pair with the smallest weighted KL
    let (mut model, mut stats) = (result.model.clone(), result.stats.clone());
    for e in &events {
        if e.dimension == Dimension::Cluster {
            let chosen = e.kl_weighted.unwrap();
            for a in 0..4 {
                for b in a + 1..4 {
                    let kl = kl_dissimilarity(&stats, a, b).unwrap().weighted_sum;
                    assert!(chosen <= kl + 1e-9, "pair ({a}, {b}) has KL {kl} below the chosen {chosen}");
                }
            }
            break;
        }
        (model, stats) = apply_merge(&model, &stats, Merge { dimension: e.dimension, a: e.operands.0, b: e.operands.1 }).unwrap();
    }
    let tree = build_dendrogram(&events, 4).unwrap();
    let mut leaves = tree.leaves_under(tree.nodes.len() - 1);
    leaves.sort_unstable();
    assert_eq!(leaves, [0, 1, 2, 3]);
    let null = evaluate(ds, &SufficientStats::null(ds)).total;
    let series = kept_information(&result, &events, null);
    assert_eq!(series.rows.first().unwrap().tau, 1.0);
    assert_eq!(series.rows.last().unwrap().tau, 0.0);
    assert!(!series.degenerate);
}

#[test]
fn curve_counts_follow_the_multinomial() {
    let data = generate(&SynthSpec::new(100_000, 12)).unwrap();
    assert_eq!(data.dataset.curves(), 40);
    let p: f64 = 1.0 / 40.0;
    let sigma = (100_000.0 * p * (1.0 - p)).sqrt();
    for &size in data.dataset.curve_sizes() {
        assert!((size as f64 - 2500.0).abs() <= 6.0 * sigma, "{size}");
    }
}

#[test]
fn noiseless_patterns_have_their_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let (x, y) = Pattern::F2.sample(0.0, &mut rng);
        assert_eq!(x, -y);
        let (x, y) = Pattern::F3.sample(0.0, &mut rng);
        assert_eq!(x.abs(), y.abs());
        let (x, y) = Pattern::F4.sample(0.0, &mut rng);
        assert!(((x * x + y * y).sqrt() - 0.75).abs() < 1e-12);
    }
}

#[test]
fn small_synthetic_samples_are_unstructured() {
    let data = generate(&SynthSpec::new(40, 3)).unwrap();
    assert!(data.points.iter().all(|p| p.0 < 40));
    let result = fit(&data.dataset, &SearchConfig::with_seed(3));
    assert!(result.model.is_null());
}
