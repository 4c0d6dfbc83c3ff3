//! Grid models: a partition of the curves into clusters crossed with
//! rank-space interval partitions of both point dimensions.

use serde::{Deserialize, Serialize};

use crate::dataset::{Axis, PointDataset};
use crate::error::{Error, Result};

/// The three partitioned variables of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "C")]
    Cluster,
    #[serde(rename = "X")]
    X,
    #[serde(rename = "Y")]
    Y,
}

impl Dimension {
    pub fn axis(self) -> Option<Axis> {
        match self {
            Dimension::Cluster => None,
            Dimension::X => Some(Axis::X),
            Dimension::Y => Some(Axis::Y),
        }
    }

    pub fn of_axis(axis: Axis) -> Self {
        match axis {
            Axis::X => Dimension::X,
            Axis::Y => Dimension::Y,
        }
    }
}

/// Merge of two partition members: two clusters, or two adjacent intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub dimension: Dimension,
    pub a: usize,
    pub b: usize,
}

impl Merge {
    pub fn clusters(a: usize, b: usize) -> Self {
        Self { dimension: Dimension::Cluster, a, b }
    }

    pub fn intervals(axis: Axis, a: usize, b: usize) -> Self {
        Self { dimension: Dimension::of_axis(axis), a, b }
    }

    /// Operands as `(low, high)` after checking them against the partition
    /// sizes `(k_c, k_x, k_y)`.
    pub fn validated(&self, sizes: [usize; 3]) -> Result<(usize, usize)> {
        if self.a == self.b {
            return Err(Error::InvalidMerge(format!(
                "cannot merge {:?} member {} with itself",
                self.dimension, self.a
            )));
        }
        let (lo, hi) = (self.a.min(self.b), self.a.max(self.b));
        let size = match self.dimension {
            Dimension::Cluster => sizes[0],
            Dimension::X => sizes[1],
            Dimension::Y => sizes[2],
        };
        if hi >= size {
            return Err(Error::InvalidMerge(format!(
                "{:?} member {hi} out of range (size {size})",
                self.dimension
            )));
        }
        if self.dimension != Dimension::Cluster && hi != lo + 1 {
            return Err(Error::InvalidMerge(format!(
                "{:?} intervals {lo} and {hi} are not adjacent",
                self.dimension
            )));
        }
        Ok((lo, hi))
    }
}

/// Curve-to-cluster assignment plus sorted rank cuts for `X` and `Y`.
///
/// A cut `r` separates ranks `< r` from ranks `>= r`; `k` cuts give `k + 1`
/// intervals covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridModel {
    pub cluster_of_curve: Vec<usize>,
    pub k_c: usize,
    pub x_bounds: Vec<usize>,
    pub y_bounds: Vec<usize>,
}

impl GridModel {
    /// One cluster, one interval per dimension.
    pub fn null(ds: &PointDataset) -> Self {
        Self {
            cluster_of_curve: vec![0; ds.curves()],
            k_c: 1,
            x_bounds: Vec::new(),
            y_bounds: Vec::new(),
        }
    }

    pub fn k_x(&self) -> usize {
        self.x_bounds.len() + 1
    }

    pub fn k_y(&self) -> usize {
        self.y_bounds.len() + 1
    }

    pub fn bounds(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::X => &self.x_bounds,
            Axis::Y => &self.y_bounds,
        }
    }

    pub fn bounds_mut(&mut self, axis: Axis) -> &mut Vec<usize> {
        match axis {
            Axis::X => &mut self.x_bounds,
            Axis::Y => &mut self.y_bounds,
        }
    }

    /// `(k_c, k_x, k_y)`.
    pub fn sizes(&self) -> [usize; 3] {
        [self.k_c, self.k_x(), self.k_y()]
    }

    /// Total cell count `k = k_c k_x k_y`.
    pub fn cells(&self) -> usize {
        self.k_c * self.k_x() * self.k_y()
    }

    pub fn is_null(&self) -> bool {
        self.sizes() == [1, 1, 1]
    }

    /// Interval index of every rank along one axis.
    pub fn interval_of_rank(&self, axis: Axis, m: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(m);
        let mut j = 0u32;
        let bounds = self.bounds(axis);
        for r in 0..m {
            while (j as usize) < bounds.len() && bounds[j as usize] <= r {
                j += 1;
            }
            out.push(j);
        }
        out
    }

    /// Check structure against a dataset: cluster ids in range and all used,
    /// cuts strictly increasing inside `(0, m)`.
    pub fn validate(&self, ds: &PointDataset) -> Result<()> {
        if self.cluster_of_curve.len() != ds.curves() {
            return Err(Error::InvalidModel(format!(
                "model assigns {} curves, dataset has {}",
                self.cluster_of_curve.len(),
                ds.curves()
            )));
        }
        if self.k_c == 0 {
            return Err(Error::InvalidModel("no clusters".into()));
        }
        let mut used = vec![false; self.k_c];
        for (curve, &c) in self.cluster_of_curve.iter().enumerate() {
            if c >= self.k_c {
                return Err(Error::InvalidModel(format!(
                    "curve {curve} assigned to cluster {c} >= k_c {}",
                    self.k_c
                )));
            }
            used[c] = true;
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(Error::InvalidModel(format!("cluster {empty} is empty")));
        }
        let m = ds.len();
        for axis in Axis::BOTH {
            let bounds = self.bounds(axis);
            let mut prev = 0;
            for &b in bounds {
                if b <= prev || b >= m {
                    return Err(Error::InvalidModel(format!(
                        "{axis:?} cuts must be strictly increasing within (0, {m}), got {bounds:?}"
                    )));
                }
                prev = b;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PointDataset {
        PointDataset::new(&[(0, 0.0, 0.0), (0, 1.0, 1.0), (1, 2.0, 2.0), (1, 3.0, 3.0)]).unwrap()
    }

    #[test]
    fn null_model_shape() {
        let ds = tiny();
        let m = GridModel::null(&ds);
        assert_eq!(m.sizes(), [1, 1, 1]);
        assert_eq!(m.cluster_of_curve, vec![0, 0]);
        assert!(m.validate(&ds).is_ok());
    }

    #[test]
    fn interval_lookup() {
        let mut m = GridModel::null(&tiny());
        m.x_bounds = vec![1, 3];
        assert_eq!(m.interval_of_rank(Axis::X, 4), vec![0, 1, 1, 2]);
    }

    #[test]
    fn validation_errors() {
        let ds = tiny();
        let mut m = GridModel::null(&ds);
        m.x_bounds = vec![0];
        assert!(m.validate(&ds).is_err());
        m.x_bounds = vec![2, 2];
        assert!(m.validate(&ds).is_err());
        m.x_bounds = vec![4];
        assert!(m.validate(&ds).is_err());
        let mut m = GridModel::null(&ds);
        m.k_c = 3;
        m.cluster_of_curve = vec![0, 2];
        assert!(m.validate(&ds).is_err());
    }

    #[test]
    fn merge_validation() {
        let sizes = [3, 4, 2];
        assert_eq!(Merge::clusters(2, 0).validated(sizes).unwrap(), (0, 2));
        assert!(Merge::clusters(1, 1).validated(sizes).is_err());
        assert!(Merge::clusters(1, 3).validated(sizes).is_err());
        assert!(Merge::intervals(Axis::X, 0, 2).validated(sizes).is_err());
        assert_eq!(Merge::intervals(Axis::X, 3, 2).validated(sizes).unwrap(), (2, 3));
        assert!(Merge::intervals(Axis::Y, 1, 2).validated(sizes).is_err());
    }
}
