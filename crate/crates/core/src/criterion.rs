//! The model-selection criterion `c(M)` (negative log posterior, in nats),
//! merge deltas and the Kullback-Leibler view of cluster merges.

use serde::{Deserialize, Serialize};

use crate::combinatorics::CombinatoricsTables;
use crate::dataset::PointDataset;
use crate::error::{Error, Result};
use crate::model::{Dimension, Merge};
use crate::stats::{Cell, SufficientStats};

/// Criterion split into its prior and likelihood parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub total: f64,
    pub prior_terms: f64,
    pub likelihood_terms: f64,
}

impl CriterionValue {
    fn new(prior_terms: f64, likelihood_terms: f64) -> Self {
        Self { total: prior_terms + likelihood_terms, prior_terms, likelihood_terms }
    }
}

/// Per-dataset evaluation context: combinatorics tables plus the constant
/// `Σ_i ln m_i!` over curves.
#[derive(Debug, Clone)]
pub struct Evaluator {
    tables: CombinatoricsTables,
    n: usize,
    m: u64,
    curve_log_factorials: f64,
}

impl Evaluator {
    pub fn new(ds: &PointDataset) -> Self {
        let tables = CombinatoricsTables::new(ds.curves(), ds.len());
        let curve_log_factorials = ds
            .curve_sizes()
            .iter()
            .map(|&s| tables.log_factorial(s as u64))
            .sum();
        Self { tables, n: ds.curves(), m: ds.len() as u64, curve_log_factorials }
    }

    pub fn tables(&self) -> &CombinatoricsTables {
        &self.tables
    }

    pub fn points(&self) -> u64 {
        self.m
    }

    pub fn curves(&self) -> usize {
        self.n
    }

    pub fn curve_log_factorials(&self) -> f64 {
        self.curve_log_factorials
    }

    /// `ln C(m + k - 1, k - 1)` for a grid of `k` cells.
    #[inline]
    pub fn cell_prior(&self, k: u64) -> f64 {
        self.tables.log_binomial(self.m + k - 1, k - 1)
    }

    /// Prior plus likelihood terms owned by one cluster:
    /// `ln C(m_c + n_c - 1, n_c - 1) + ln m_c!`.
    #[inline]
    pub fn cluster_term(&self, points: u64, curves: u64) -> f64 {
        self.tables.log_binomial(points + curves - 1, curves - 1) + self.tables.log_factorial(points)
    }

    /// The part of a merge delta that depends only on partition sizes.
    pub fn size_delta(&self, sizes: [usize; 3], dimension: Dimension) -> f64 {
        let [kc, kx, ky] = sizes.map(|s| s as u64);
        let k = kc * kx * ky;
        match dimension {
            Dimension::Cluster => {
                self.tables.log_bell(kc as usize - 1) - self.tables.log_bell(kc as usize)
                    + self.cell_prior((kc - 1) * kx * ky)
                    - self.cell_prior(k)
            }
            Dimension::X => self.cell_prior(kc * (kx - 1) * ky) - self.cell_prior(k),
            Dimension::Y => self.cell_prior(kc * kx * (ky - 1)) - self.cell_prior(k),
        }
    }

    /// Full criterion of the model described by `stats`.
    pub fn evaluate(&self, stats: &SufficientStats) -> CriterionValue {
        let t = &self.tables;
        let lf = |v: u64| t.log_factorial(v);
        let m = self.m;
        let k = (stats.k_c * stats.k_x * stats.k_y) as u64;

        let mut prior = (self.n as f64).ln() + 2.0 * (m as f64).ln() + t.log_bell(stats.k_c) + self.cell_prior(k);
        for (&mc, &nc) in stats.cluster_counts.iter().zip(&stats.cluster_curve_counts) {
            prior += t.log_binomial(mc + nc - 1, nc - 1);
        }

        let mut likelihood = lf(m);
        likelihood -= stats.cells.iter().map(|&(_, c)| lf(c)).sum::<f64>();
        likelihood += stats.cluster_counts.iter().map(|&c| lf(c)).sum::<f64>();
        likelihood -= self.curve_log_factorials;
        likelihood += stats.x_interval_counts.iter().map(|&c| lf(c)).sum::<f64>();
        likelihood += stats.y_interval_counts.iter().map(|&c| lf(c)).sum::<f64>();
        CriterionValue::new(prior, likelihood)
    }

    /// Criterion change `c(after) - c(before)` of a merge, touching only
    /// the terms the merge changes.
    pub fn delta_merge(&self, stats: &SufficientStats, merge: Merge) -> Result<f64> {
        let (lo, hi) = merge.validated(stats.sizes())?;
        let t = &self.tables;
        let lf = |v: u64| t.log_factorial(v);
        let size = self.size_delta(stats.sizes(), merge.dimension);
        let local = match merge.dimension {
            Dimension::Cluster => {
                let (ma, na) = (stats.cluster_counts[lo], stats.cluster_curve_counts[lo]);
                let (mb, nb) = (stats.cluster_counts[hi], stats.cluster_curve_counts[hi]);
                let marginal = self.cluster_term(ma + mb, na + nb)
                    - self.cluster_term(ma, na)
                    - self.cluster_term(mb, nb);
                let shared = join_cells(stats.cluster_cells(lo), stats.cluster_cells(hi), |c| [c[1], c[2]]);
                marginal - shared.map(|(a, b)| t.pooling_gain(a, b)).sum::<f64>()
            }
            Dimension::X => {
                let (a, b) = (stats.x_interval_counts[lo], stats.x_interval_counts[hi]);
                let marginal = lf(a + b) - lf(a) - lf(b);
                let mut shared = 0.0;
                for c in 0..stats.k_c {
                    let cells = stats.cluster_cells(c);
                    let left = x_slice(cells, lo as u32);
                    let right = x_slice(cells, hi as u32);
                    shared += join_cells(left, right, |c| [c[2], 0])
                        .map(|(a, b)| t.pooling_gain(a, b))
                        .sum::<f64>();
                }
                marginal - shared
            }
            Dimension::Y => {
                let (a, b) = (stats.y_interval_counts[lo], stats.y_interval_counts[hi]);
                let marginal = lf(a + b) - lf(a) - lf(b);
                // (c, x, lo) is immediately followed by (c, x, hi) when both exist
                let shared: f64 = stats
                    .cells
                    .windows(2)
                    .filter(|w| {
                        let (p, q) = (w[0].0, w[1].0);
                        p[2] as usize == lo && q[2] as usize == hi && p[0] == q[0] && p[1] == q[1]
                    })
                    .map(|w| t.pooling_gain(w[0].1, w[1].1))
                    .sum();
                marginal - shared
            }
        };
        Ok(size + local)
    }
}

fn x_slice(cells: &[(Cell, u64)], x: u32) -> &[(Cell, u64)] {
    let lo = cells.partition_point(|(c, _)| c[1] < x);
    let hi = cells.partition_point(|(c, _)| c[1] <= x);
    &cells[lo..hi]
}

/// Merge-join two cell lists sorted by `key`, yielding count pairs of cells
/// present in both.
fn join_cells<'a>(
    left: &'a [(Cell, u64)],
    right: &'a [(Cell, u64)],
    key: impl Fn(&Cell) -> [u32; 2] + 'a,
) -> impl Iterator<Item = (u64, u64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < left.len() && j < right.len() {
            let (ka, kb) = (key(&left[i].0), key(&right[j].0));
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let out = (left[i].1, right[j].1);
                    i += 1;
                    j += 1;
                    return Some(out);
                }
            }
        }
        None
    })
}

/// Full criterion of a model.
pub fn evaluate(ds: &PointDataset, stats: &SufficientStats) -> CriterionValue {
    Evaluator::new(ds).evaluate(stats)
}

/// Incremental criterion change of one merge.
pub fn delta_merge(ds: &PointDataset, stats: &SufficientStats, merge: Merge) -> Result<f64> {
    Evaluator::new(ds).delta_merge(stats, merge)
}

/// Divergences of two clusters from their union over the `k_x × k_y` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDissimilarity {
    pub kl_a: f64,
    pub kl_b: f64,
    /// `m_a KL(a‖γ) + m_b KL(b‖γ)`.
    pub weighted_sum: f64,
}

/// KL divergences of clusters `a` and `b` from their union, with
/// `0 ln 0 = 0`.
pub fn kl_dissimilarity(stats: &SufficientStats, a: usize, b: usize) -> Result<KlDissimilarity> {
    if a == b {
        return Err(Error::InvalidArgument(format!("cluster {a} given twice")));
    }
    if a >= stats.k_c || b >= stats.k_c {
        return Err(Error::InvalidArgument(format!(
            "cluster pair ({a}, {b}) out of range (k_c = {})",
            stats.k_c
        )));
    }
    let left = stats.cluster_cells(a);
    let right = stats.cluster_cells(b);
    let pairs = outer_join(left, right);
    Ok(kl_from_pairs(&pairs))
}

/// Cell count pairs `(count in a, count in b)` over the union of supports.
fn outer_join(left: &[(Cell, u64)], right: &[(Cell, u64)]) -> Vec<(u64, u64)> {
    let key = |c: &Cell| [c[1], c[2]];
    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() || j < right.len() {
        let ord = match (left.get(i), right.get(j)) {
            (Some(l), Some(r)) => key(&l.0).cmp(&key(&r.0)),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                out.push((left[i].1, 0));
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((0, right[j].1));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((left[i].1, right[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn kl_from_pairs(pairs: &[(u64, u64)]) -> KlDissimilarity {
    let ma: u64 = pairs.iter().map(|p| p.0).sum();
    let mb: u64 = pairs.iter().map(|p| p.1).sum();
    let mg = (ma + mb) as f64;
    let (mut kl_a, mut kl_b) = (0.0, 0.0);
    for &(a, b) in pairs {
        let pg = (a + b) as f64 / mg;
        if a > 0 {
            let pa = a as f64 / ma as f64;
            kl_a += pa * (pa / pg).ln();
        }
        if b > 0 {
            let pb = b as f64 / mb as f64;
            kl_b += pb * (pb / pg).ln();
        }
    }
    // rounding can leave tiny negatives for identical distributions
    let (kl_a, kl_b) = (kl_a.max(0.0), kl_b.max(0.0));
    KlDissimilarity { kl_a, kl_b, weighted_sum: ma as f64 * kl_a + mb as f64 * kl_b }
}
