mod common;

use common::{random_dataset, random_model};
use gridclust::synth::misplacement_of_assignment;
use gridclust::{
    agglomerate, apply_merge, build_dendrogram, compute_stats, delta_merge, evaluate, fit, fit_sequential, kept_information,
    kl_dissimilarity, Axis, Dimension, GridModel, Merge, PointDataset, SearchConfig, SufficientStats,
};
use gridclust::optimizer::FitResult;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_merge(rng: &mut ChaCha8Rng, model: &GridModel) -> Option<Merge> {
    let mut options = Vec::new();
    if model.k_c > 1 {
        options.push(Dimension::Cluster);
    }
    if model.k_x() > 1 {
        options.push(Dimension::X);
    }
    if model.k_y() > 1 {
        options.push(Dimension::Y);
    }
    let dimension = *options.get(rng.random_range(0..options.len().max(1)))?;
    Some(match dimension {
        Dimension::Cluster => {
            let a = rng.random_range(0..model.k_c);
            let b = (a + rng.random_range(1..model.k_c)) % model.k_c;
            Merge::clusters(a, b)
        }
        d => {
            let k = model.sizes()[if d == Dimension::X { 1 } else { 2 }];
            let a = rng.random_range(0..k - 1);
            Merge::intervals(d.axis().unwrap(), a, a + 1)
        }
    })
}

fn as_fit(ds: &PointDataset, model: GridModel) -> FitResult {
    let stats = compute_stats(ds, &model).unwrap();
    let criterion = evaluate(ds, &stats);
    FitResult { model, stats, initial_criterion: criterion.total, criterion, trace: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn incremental_delta_matches_full_evaluation(seed: u64, curves in 1usize..12, points in 2usize..250, distinct in 2u32..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, points, distinct);
        let model = random_model(&mut rng, &ds, 6, 8);
        let stats = compute_stats(&ds, &model).unwrap();
        if let Some(merge) = random_merge(&mut rng, &model) {
            let delta = delta_merge(&ds, &stats, merge).unwrap();
            let (_, merged) = apply_merge(&model, &stats, merge).unwrap();
            let full = evaluate(&ds, &merged).total - evaluate(&ds, &stats).total;
            prop_assert!((delta - full).abs() < 1e-9, "{:?}: {} vs {}", merge, delta, full);
        }
    }

    #[test]
    fn merged_stats_equal_recomputed_stats(seed: u64, curves in 1usize..12, points in 2usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, points, 25);
        let model = random_model(&mut rng, &ds, 6, 8);
        let stats = compute_stats(&ds, &model).unwrap();
        if let Some(merge) = random_merge(&mut rng, &model) {
            let (merged_model, merged_stats) = apply_merge(&model, &stats, merge).unwrap();
            merged_model.validate(&ds).unwrap();
            prop_assert_eq!(&merged_stats, &compute_stats(&ds, &merged_model).unwrap());
            prop_assert!(merged_stats.marginals_consistent());
            prop_assert_eq!(merged_stats.total_points(), ds.len() as u64);
        }
    }

    #[test]
    fn cluster_relabeling_keeps_criterion(seed: u64, curves in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, 120, 30);
        let model = random_model(&mut rng, &ds, 6, 6);
        let shift = rng.random_range(0..model.k_c);
        let relabeled = GridModel {
            cluster_of_curve: model.cluster_of_curve.iter().map(|&c| (c + shift) % model.k_c).collect(),
            ..model.clone()
        };
        let a = evaluate(&ds, &compute_stats(&ds, &model).unwrap()).total;
        let b = evaluate(&ds, &compute_stats(&ds, &relabeled).unwrap()).total;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn kl_is_non_negative(seed: u64, curves in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, 150, 20);
        let model = random_model(&mut rng, &ds, 5, 6);
        let stats = compute_stats(&ds, &model).unwrap();
        for a in 0..model.k_c {
            for b in a + 1..model.k_c {
                let kl = kl_dissimilarity(&stats, a, b).unwrap();
                prop_assert!(kl.kl_a >= 0.0 && kl.kl_b >= 0.0 && kl.weighted_sum >= 0.0);
            }
        }
    }

    #[test]
    fn duplicated_curves_have_zero_kl(seed: u64, points in 2usize..60, copies in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // distinct base values; cuts on tie-group boundaries keep copies together
        let mut ys: Vec<usize> = (0..points).collect();
        ys.rotate_left(rng.random_range(0..points));
        let mut pts: Vec<(usize, f64, f64)> = Vec::new();
        for curve in 0..=copies {
            pts.extend((0..points).map(|i| (curve.min(1), i as f64, ys[i] as f64)));
        }
        pts.push((2, 1000.0, 1000.0));
        let ds = PointDataset::new(&pts).unwrap();
        let group = copies + 1;
        let cut = |k: usize| k * group;
        let model = GridModel {
            cluster_of_curve: vec![0, 1, 2],
            k_c: 3,
            x_bounds: vec![cut(rng.random_range(1..points))],
            y_bounds: vec![cut(rng.random_range(1..points))],
        };
        let stats = compute_stats(&ds, &model).unwrap();
        prop_assert_eq!(kl_dissimilarity(&stats, 0, 1).unwrap().weighted_sum, 0.0);
        prop_assert!(kl_dissimilarity(&stats, 0, 2).unwrap().weighted_sum > 0.0);
    }

    #[test]
    fn matching_rate_is_bounded_and_label_free(seed: u64, curves in 1usize..60, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..curves).map(|_| rng.random_range(0..4)).collect();
        let k = k.min(curves);
        let assignment: Vec<usize> = (0..curves).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let rate = misplacement_of_assignment(&assignment, k, &truth);
        prop_assert!((0.0..=1.0).contains(&rate));
        let rotated: Vec<usize> = assignment.iter().map(|&c| (c + 1) % k).collect();
        prop_assert_eq!(rate, misplacement_of_assignment(&rotated, k, &truth));
        let perfect = misplacement_of_assignment(&truth, 4, &truth);
        prop_assert_eq!(perfect, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hierarchy_telescopes_to_the_null_model(seed: u64, curves in 1usize..10, points in 2usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, points, 30);
        let fitted = as_fit(&ds, random_model(&mut rng, &ds, 6, 6));
        let events = agglomerate(&ds, &fitted);
        let [kc, kx, ky] = fitted.model.sizes();
        prop_assert_eq!(events.len(), kc + kx + ky - 3);
        let null = evaluate(&ds, &SufficientStats::null(&ds)).total;
        let sum: f64 = events.iter().map(|e| e.delta_c).sum();
        prop_assert!((sum - (null - fitted.criterion.total)).abs() < 1e-8);
        for (i, e) in events.iter().enumerate() {
            prop_assert_eq!(e.step, i);
            prop_assert_eq!(e.kl_weighted.is_some(), e.dimension == Dimension::Cluster);
            prop_assert!(e.kl_weighted.is_none_or(|kl| kl >= 0.0));
        }
        let (mut model, mut stats) = (fitted.model.clone(), fitted.stats.clone());
        for e in &events {
            (model, stats) = apply_merge(&model, &stats, Merge { dimension: e.dimension, a: e.operands.0, b: e.operands.1 }).unwrap();
            prop_assert!((evaluate(&ds, &stats).total - e.criterion_after).abs() < 1e-9);
        }
        prop_assert!(model.is_null());
        let tree = build_dendrogram(&events, kc).unwrap();
        prop_assert_eq!(tree.leaves, kc);
        prop_assert_eq!(tree.root().size, kc);
        for node in &tree.nodes {
            if let Some((a, b)) = node.children {
                prop_assert!(node.height >= tree.nodes[a].height && node.height >= tree.nodes[b].height);
            }
        }
        let series = kept_information(&fitted, &events, null);
        prop_assert_eq!(series.rows[0].tau, 1.0);
        prop_assert_eq!(series.rows[0].k, kc);
        prop_assert!(series.rows.iter().all(|r| r.tau <= 1.0 + 1e-12 || series.degenerate));
        if !series.degenerate {
            prop_assert_eq!(series.rows.last().unwrap().tau, 0.0);
        }
        let mut ks: Vec<usize> = series.rows.iter().map(|r| r.k).collect();
        ks.dedup();
        prop_assert_eq!(ks, (1..=kc).rev().collect::<Vec<_>>());
    }

    #[test]
    fn search_contracts(seed: u64, curves in 1usize..12, points in 2usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, curves, points, 40);
        let config = SearchConfig { vns_restarts: 2, ..SearchConfig::with_seed(seed) };
        let result = fit(&ds, &config);
        let null = evaluate(&ds, &SufficientStats::null(&ds)).total;
        prop_assert!(result.criterion.total <= null + 1e-9);
        prop_assert_eq!(result.criterion, evaluate(&ds, &result.stats));
        prop_assert_eq!(&result.stats, &compute_stats(&ds, &result.model).unwrap());
        let mut prev = result.initial_criterion;
        for step in &result.trace {
            prop_assert!(step.delta < 0.0 && step.criterion < prev);
            prev = step.criterion;
        }
        let sum: f64 = result.trace.iter().map(|s| s.delta).sum();
        prop_assert!((result.initial_criterion + sum - result.criterion.total).abs() < 1e-6);
        prop_assert_eq!(&result, &fit_sequential(&ds, &config));
        prop_assert_eq!(&result, &fit(&ds, &config));
    }

    #[test]
    fn monotone_transforms_do_not_change_the_fit(seed: u64, curves in 1usize..12, points in 2usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(usize, f64, f64)> = (0..points)
            .map(|i| (if i < curves { i } else { rng.random_range(0..curves) }, rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let warped: Vec<(usize, f64, f64)> = pts.iter().map(|&(c, x, y)| (c, x.exp(), y * y * y)).collect();
        let (a, b) = (PointDataset::new(&pts).unwrap(), PointDataset::new(&warped).unwrap());
        for axis in [Axis::X, Axis::Y] {
            prop_assert_eq!(a.ranks(axis), b.ranks(axis));
        }
        let config = SearchConfig { vns_restarts: 1, ..SearchConfig::with_seed(seed) };
        let (fa, fb) = (fit(&a, &config), fit(&b, &config));
        prop_assert_eq!(&fa.model, &fb.model);
        prop_assert_eq!(fa.criterion.total.to_bits(), fb.criterion.total.to_bits());
    }
}
