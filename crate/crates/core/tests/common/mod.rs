#![allow(dead_code)]

use gridclust::{GridModel, PointDataset};
use num_bigint::BigUint;
use rand::Rng;

pub fn big_ln(x: &BigUint) -> f64 {
    assert!(x.bits() > 0, "ln of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (u64::try_from(x).unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = u64::try_from(&(x >> shift)).unwrap();
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn big_factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, i| acc * i)
}

pub fn big_binomial(a: u64, b: u64) -> BigUint {
    let b = b.min(a - b);
    let mut c = BigUint::from(1u32);
    for i in 0..b {
        c = c * (a - i) / (i + 1);
    }
    c
}

/// `bell[k] = Σ_{i ≤ k} S(n, i)` for `k = 0..=n`.
pub fn big_bell_prefix(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::from(0u32); n + 1];
    row[0] = BigUint::from(1u32);
    for i in 1..=n {
        for k in (1..=i).rev() {
            row[k] = &row[k] * k + &row[k - 1];
        }
        row[0] = BigUint::from(0u32);
    }
    let mut acc = BigUint::from(0u32);
    row.into_iter()
        .map(|s| {
            acc += s;
            acc.clone()
        })
        .collect()
}

/// Random points with ties: coordinates drawn from `distinct` levels.
pub fn random_dataset<R: Rng>(rng: &mut R, curves: usize, points: usize, distinct: u32) -> PointDataset {
    let pts: Vec<(usize, f64, f64)> = (0..points)
        .map(|i| {
            let curve = if i < curves { i } else { rng.random_range(0..curves) };
            (curve, rng.random_range(0..distinct) as f64, rng.random_range(0..distinct) as f64)
        })
        .collect();
    PointDataset::new(&pts).unwrap()
}

pub fn random_model<R: Rng>(rng: &mut R, ds: &PointDataset, max_clusters: usize, max_cuts: usize) -> GridModel {
    let n = ds.curves();
    let k_c = rng.random_range(1..=n.min(max_clusters));
    let mut cluster_of_curve: Vec<usize> = (0..n).map(|i| if i < k_c { i } else { rng.random_range(0..k_c) }).collect();
    cluster_of_curve.rotate_left(rng.random_range(0..n));
    let mut cuts = || {
        let k = rng.random_range(0..=max_cuts);
        let mut b: Vec<usize> = (0..k).map(|_| rng.random_range(1..ds.len().max(2))).filter(|&c| c < ds.len()).collect();
        b.sort_unstable();
        b.dedup();
        b
    };
    let x_bounds = cuts();
    let y_bounds = cuts();
    GridModel { cluster_of_curve, k_c, x_bounds, y_bounds }
}
