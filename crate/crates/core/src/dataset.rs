//! Point data set: every curve flattened into `(curve, x, y)` triples with
//! per-dimension rank orders.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A point dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

/// Immutable point set with precomputed ranks.
///
/// Ranks break ties by `(value, curve id, input position)`, so any strictly
/// increasing transform of one coordinate leaves the rank arrays unchanged.
#[derive(Debug, Clone)]
pub struct PointDataset {
    labels: Vec<String>,
    curve_of_point: Vec<u32>,
    values: [Vec<f64>; 2],
    curve_sizes: Vec<usize>,
    curve_points: Vec<Vec<u32>>,
    rank: [Vec<u32>; 2],
    order: [Vec<u32>; 2],
}

impl PointDataset {
    /// Build from points with dense integer curve ids. Ids need not be
    /// contiguous; they are canonicalized in increasing order.
    pub fn new(points: &[(usize, f64, f64)]) -> Result<Self> {
        Self::from_labeled(points.iter().copied())
    }

    /// Build from labeled points. Distinct labels are sorted and numbered
    /// `0..n`; the original labels are kept for output.
    pub fn from_labeled<L, I>(points: I) -> Result<Self>
    where
        L: Ord + ToString,
        I: IntoIterator<Item = (L, f64, f64)>,
    {
        let raw: Vec<(L, f64, f64)> = points.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (index, (_, x, y)) in raw.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index, axis: 'x' });
            }
            if !y.is_finite() {
                return Err(Error::NonFinite { index, axis: 'y' });
            }
        }

        let mut ids: BTreeMap<&L, u32> = BTreeMap::new();
        for (label, _, _) in &raw {
            ids.entry(label).or_insert(0);
        }
        for (i, v) in ids.values_mut().enumerate() {
            *v = i as u32;
        }
        let labels: Vec<String> = ids.keys().map(|l| l.to_string()).collect();
        let curve_of_point: Vec<u32> = raw.iter().map(|(l, _, _)| ids[l]).collect();
        let xs: Vec<f64> = raw.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = raw.iter().map(|p| p.2).collect();
        drop(ids);

        let n = labels.len();
        let mut curve_sizes = vec![0usize; n];
        let mut curve_points = vec![Vec::new(); n];
        for (p, &c) in curve_of_point.iter().enumerate() {
            curve_sizes[c as usize] += 1;
            curve_points[c as usize].push(p as u32);
        }

        let (rank_x, order_x) = rank_values(&xs, &curve_of_point);
        let (rank_y, order_y) = rank_values(&ys, &curve_of_point);
        Ok(Self {
            labels,
            curve_of_point,
            values: [xs, ys],
            curve_sizes,
            curve_points,
            rank: [rank_x, rank_y],
            order: [order_x, order_y],
        })
    }

    /// Number of points `m`.
    pub fn len(&self) -> usize {
        self.curve_of_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve_of_point.is_empty()
    }

    /// Number of curves `n`.
    pub fn curves(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn curve_sizes(&self) -> &[usize] {
        &self.curve_sizes
    }

    pub fn curve_of_point(&self) -> &[u32] {
        &self.curve_of_point
    }

    /// Point indices of one curve, in input order.
    pub fn curve_points(&self, curve: usize) -> &[u32] {
        &self.curve_points[curve]
    }

    pub fn values(&self, axis: Axis) -> &[f64] {
        &self.values[axis.index()]
    }

    /// Point → rank permutation.
    pub fn ranks(&self, axis: Axis) -> &[u32] {
        &self.rank[axis.index()]
    }

    /// Rank → point permutation.
    pub fn order(&self, axis: Axis) -> &[u32] {
        &self.order[axis.index()]
    }

    /// Value of the point at a given rank.
    pub fn value_at_rank(&self, axis: Axis, rank: usize) -> f64 {
        self.values[axis.index()][self.order[axis.index()][rank] as usize]
    }

    /// Value-space position of a rank cut `r` (between ranks `r-1` and `r`):
    /// midpoint of the two adjacent values, or the shared value when tied.
    pub fn cut_value(&self, axis: Axis, cut: usize) -> f64 {
        let lo = self.value_at_rank(axis, cut - 1);
        let hi = self.value_at_rank(axis, cut);
        if lo == hi {
            lo
        } else {
            lo + (hi - lo) / 2.0
        }
    }
}

fn rank_values(values: &[f64], curve: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(Ordering::Equal)
            .then(curve[a].cmp(&curve[b]))
            .then(a.cmp(&b))
    });
    let mut rank = vec![0u32; values.len()];
    for (r, &p) in order.iter().enumerate() {
        rank[p as usize] = r as u32;
    }
    (rank, order)
}
