//! Count tables of a grid model over a dataset.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{Axis, PointDataset};
use crate::error::Result;
use crate::model::{Dimension, GridModel, Merge};

/// Cell coordinates `(cluster, x interval, y interval)`.
pub type Cell = [u32; 3];

/// All counts needed to evaluate a model.
///
/// Cells are stored sparsely, sorted by `(cluster, x, y)`, with only
/// non-empty entries; empty cells contribute nothing to any term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub k_c: usize,
    pub k_x: usize,
    pub k_y: usize,
    pub cells: Vec<(Cell, u64)>,
    pub cluster_counts: Vec<u64>,
    pub cluster_curve_counts: Vec<u64>,
    pub x_interval_counts: Vec<u64>,
    pub y_interval_counts: Vec<u64>,
}

impl SufficientStats {
    /// Exact tables for `model` over `ds`.
    pub fn compute(ds: &PointDataset, model: &GridModel) -> Result<Self> {
        model.validate(ds)?;
        let m = ds.len();
        let x_of_rank = model.interval_of_rank(Axis::X, m);
        let y_of_rank = model.interval_of_rank(Axis::Y, m);
        let xr = ds.ranks(Axis::X);
        let yr = ds.ranks(Axis::Y);

        let mut cells: FxHashMap<Cell, u64> = FxHashMap::default();
        let mut stats = Self {
            k_c: model.k_c,
            k_x: model.k_x(),
            k_y: model.k_y(),
            cells: Vec::new(),
            cluster_counts: vec![0; model.k_c],
            cluster_curve_counts: vec![0; model.k_c],
            x_interval_counts: vec![0; model.k_x()],
            y_interval_counts: vec![0; model.k_y()],
        };
        for (curve, &c) in model.cluster_of_curve.iter().enumerate() {
            stats.cluster_curve_counts[c] += 1;
            stats.cluster_counts[c] += ds.curve_sizes()[curve] as u64;
        }
        for (p, &curve) in ds.curve_of_point().iter().enumerate() {
            let c = model.cluster_of_curve[curve as usize] as u32;
            let x = x_of_rank[xr[p] as usize];
            let y = y_of_rank[yr[p] as usize];
            *cells.entry([c, x, y]).or_insert(0) += 1;
            stats.x_interval_counts[x as usize] += 1;
            stats.y_interval_counts[y as usize] += 1;
        }
        stats.cells = cells.into_iter().collect();
        stats.cells.sort_unstable();
        Ok(stats)
    }

    /// Stats of the null model: a single cell holding every point.
    pub fn null(ds: &PointDataset) -> Self {
        let m = ds.len() as u64;
        Self {
            k_c: 1,
            k_x: 1,
            k_y: 1,
            cells: vec![([0, 0, 0], m)],
            cluster_counts: vec![m],
            cluster_curve_counts: vec![ds.curves() as u64],
            x_interval_counts: vec![m],
            y_interval_counts: vec![m],
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.k_c, self.k_x, self.k_y]
    }

    pub fn total_points(&self) -> u64 {
        self.x_interval_counts.iter().sum()
    }

    /// Count of one cell (zero when absent).
    pub fn cell(&self, cell: Cell) -> u64 {
        self.cells
            .binary_search_by(|(c, _)| c.cmp(&cell))
            .map(|i| self.cells[i].1)
            .unwrap_or(0)
    }

    /// Contiguous slice of the cells of one cluster.
    pub fn cluster_cells(&self, cluster: usize) -> &[(Cell, u64)] {
        let c = cluster as u32;
        let lo = self.cells.partition_point(|(k, _)| k[0] < c);
        let hi = self.cells.partition_point(|(k, _)| k[0] <= c);
        &self.cells[lo..hi]
    }

    /// Check that every marginal of the cell table equals the stored counts.
    pub fn marginals_consistent(&self) -> bool {
        let mut c = vec![0u64; self.k_c];
        let mut x = vec![0u64; self.k_x];
        let mut y = vec![0u64; self.k_y];
        for &(cell, n) in &self.cells {
            if n == 0 {
                return false;
            }
            c[cell[0] as usize] += n;
            x[cell[1] as usize] += n;
            y[cell[2] as usize] += n;
        }
        c == self.cluster_counts && x == self.x_interval_counts && y == self.y_interval_counts
    }

    fn merged_counts(counts: &[u64], lo: usize, hi: usize) -> Vec<u64> {
        let mut out = counts.to_vec();
        out[lo] += out[hi];
        out.remove(hi);
        out
    }
}

/// Exact count tables for `model` over `ds`.
pub fn compute_stats(ds: &PointDataset, model: &GridModel) -> Result<SufficientStats> {
    SufficientStats::compute(ds, model)
}

/// Apply a merge to a model and update its stats by summing the merged
/// slices. Members above the removed one shift down by one index.
pub fn apply_merge(
    model: &GridModel,
    stats: &SufficientStats,
    merge: Merge,
) -> Result<(GridModel, SufficientStats)> {
    let (lo, hi) = merge.validated(model.sizes())?;
    let d = match merge.dimension {
        Dimension::Cluster => 0,
        Dimension::X => 1,
        Dimension::Y => 2,
    };
    let remap = |i: u32| -> u32 {
        let i = i as usize;
        (if i == hi { lo } else if i > hi { i - 1 } else { i }) as u32
    };

    let mut model = model.clone();
    let mut next = stats.clone();
    match merge.dimension {
        Dimension::Cluster => {
            for c in model.cluster_of_curve.iter_mut() {
                *c = remap(*c as u32) as usize;
            }
            model.k_c -= 1;
            next.k_c -= 1;
            next.cluster_counts = SufficientStats::merged_counts(&stats.cluster_counts, lo, hi);
            next.cluster_curve_counts =
                SufficientStats::merged_counts(&stats.cluster_curve_counts, lo, hi);
        }
        Dimension::X => {
            model.x_bounds.remove(lo);
            next.k_x -= 1;
            next.x_interval_counts = SufficientStats::merged_counts(&stats.x_interval_counts, lo, hi);
        }
        Dimension::Y => {
            model.y_bounds.remove(lo);
            next.k_y -= 1;
            next.y_interval_counts = SufficientStats::merged_counts(&stats.y_interval_counts, lo, hi);
        }
    }

    let mut cells: Vec<(Cell, u64)> = stats
        .cells
        .iter()
        .map(|&(mut cell, n)| {
            cell[d] = remap(cell[d]);
            (cell, n)
        })
        .collect();
    cells.sort_unstable();
    cells.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 += later.1;
            true
        } else {
            false
        }
    });
    next.cells = cells;
    Ok((model, next))
}
