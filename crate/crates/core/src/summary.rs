//! Human-readable cluster summaries: a piecewise-constant prototype curve
//! and the conditional distribution of Y intervals given X intervals.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Axis, PointDataset};
use crate::error::Result;
use crate::model::GridModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub curves: Vec<String>,
    pub points: u64,
    /// Mean y of the cluster's points per X interval; `None` when the
    /// cluster has no point there.
    pub prototype: Vec<Option<f64>>,
    /// `conditional[jx][jy] = p(jy | jx, cluster)`; all zero for empty columns.
    pub conditional: Vec<Vec<f64>>,
    /// Points per `(jx, jy)`.
    pub counts: Vec<Vec<u64>>,
    /// X intervals where the cluster has no point.
    pub empty_columns: Vec<bool>,
}

pub fn summarize(ds: &PointDataset, model: &GridModel) -> Vec<ClusterSummary> {
    let (kx, ky) = (model.k_x(), model.k_y());
    let jx = model.interval_of_rank(Axis::X, ds.len());
    let jy = model.interval_of_rank(Axis::Y, ds.len());
    let (rx, ry) = (ds.ranks(Axis::X), ds.ranks(Axis::Y));
    let ys = ds.values(Axis::Y);
    let mut counts = vec![vec![vec![0u64; ky]; kx]; model.k_c];
    let mut sums = vec![vec![0.0f64; kx]; model.k_c];
    for (p, &curve) in ds.curve_of_point().iter().enumerate() {
        let c = model.cluster_of_curve[curve as usize];
        let (i, j) = (jx[rx[p] as usize] as usize, jy[ry[p] as usize] as usize);
        counts[c][i][j] += 1;
        sums[c][i] += ys[p];
    }
    let mut curves = vec![Vec::new(); model.k_c];
    for (curve, &c) in model.cluster_of_curve.iter().enumerate() {
        curves[c].push(ds.labels()[curve].clone());
    }
    counts
        .into_iter()
        .zip(sums)
        .zip(curves)
        .enumerate()
        .map(|(cluster, ((counts, sums), curves))| {
            let column_totals: Vec<u64> = counts.iter().map(|col| col.iter().sum()).collect();
            let prototype = column_totals
                .iter()
                .zip(&sums)
                .map(|(&t, &s)| (t > 0).then(|| s / t as f64))
                .collect();
            let conditional = counts
                .iter()
                .zip(&column_totals)
                .map(|(col, &t)| col.iter().map(|&c| if t > 0 { c as f64 / t as f64 } else { 0.0 }).collect())
                .collect();
            ClusterSummary {
                cluster,
                curves,
                points: column_totals.iter().sum(),
                prototype,
                conditional,
                empty_columns: column_totals.iter().map(|&t| t == 0).collect(),
                counts,
            }
        })
        .collect()
}

/// `cluster, x_interval, points, mean_y` rows; empty columns are skipped.
pub fn write_prototypes_tsv(path: impl AsRef<Path>, summaries: &[ClusterSummary]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "cluster\tx_interval\tpoints\tmean_y")?;
    for s in summaries {
        for (jx, mean) in s.prototype.iter().enumerate() {
            if let Some(mean) = mean {
                writeln!(out, "{}\t{jx}\t{}\t{mean}", s.cluster, s.counts[jx].iter().sum::<u64>())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `cluster, x_interval, y_interval, count, probability` rows.
pub fn write_conditional_tsv(path: impl AsRef<Path>, summaries: &[ClusterSummary]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "cluster\tx_interval\ty_interval\tcount\tprobability")?;
    for s in summaries {
        for (jx, col) in s.conditional.iter().enumerate() {
            if s.empty_columns[jx] {
                continue;
            }
            for (jy, p) in col.iter().enumerate() {
                writeln!(out, "{}\t{jx}\t{jy}\t{}\t{p}", s.cluster, s.counts[jx][jy])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
