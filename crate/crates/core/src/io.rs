//! File formats: point CSV input, model and hierarchy JSON, synthetic data
//! output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criterion::CriterionValue;
use crate::dataset::{Axis, PointDataset};
use crate::error::{Error, Result};
use crate::hierarchy::{Dendrogram, MergeEvent, NestedNode, ParetoSeries};
use crate::model::GridModel;
use crate::optimizer::{FitResult, TraceStep};

/// Read `curve_id,x,y` rows (header required).
pub fn read_points(path: impl AsRef<Path>) -> Result<PointDataset> {
    let file = File::open(path)?;
    parse_points(file)
}

/// [`read_points`] from any reader.
pub fn parse_points<R: std::io::Read>(reader: R) -> Result<PointDataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| csv_error(e, 1))?.clone();
    let expected = ["curve_id", "x", "y"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse { line: 1, message: format!("expected header `curve_id,x,y`, found `{}`", header.iter().collect::<Vec<_>>().join(",")) });
    }
    let mut points = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize, name: &str| -> Result<f64> {
            let field = &record[i];
            let value: f64 = field.parse().map_err(|_| Error::Parse { line, message: format!("{name} value `{field}` is not a number") })?;
            if !value.is_finite() {
                return Err(Error::Parse { line, message: format!("{name} value `{field}` is not finite") });
            }
            Ok(value)
        };
        if record[0].is_empty() {
            return Err(Error::Parse { line, message: "empty curve id".into() });
        }
        points.push((record[0].to_string(), parse(1, "x")?, parse(2, "y")?));
    }
    if points.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    PointDataset::from_labeled(points)
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Parse { line, message: e.to_string() }
}

/// One interval of a point dimension, in rank and value space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    /// Half-open rank range `[start, end)`.
    pub ranks: (usize, usize),
    /// Value range; outer intervals reach the data extremes.
    pub values: (f64, f64),
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub curves: Vec<String>,
    pub points: u64,
}

/// Serialized fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub points: usize,
    pub curves: usize,
    pub clusters: Vec<ClusterRecord>,
    pub x_intervals: Vec<IntervalRecord>,
    pub y_intervals: Vec<IntervalRecord>,
    pub criterion: CriterionValue,
    pub initial_criterion: f64,
    pub trace: Vec<TraceStep>,
}

fn intervals(ds: &PointDataset, model: &GridModel, axis: Axis, counts: &[u64]) -> Vec<IntervalRecord> {
    let m = ds.len();
    let mut starts = vec![0];
    starts.extend_from_slice(model.bounds(axis));
    let value_at = |cut: usize| match cut {
        0 => ds.value_at_rank(axis, 0),
        c if c == m => ds.value_at_rank(axis, m - 1),
        c => ds.cut_value(axis, c),
    };
    starts
        .iter()
        .enumerate()
        .map(|(j, &lo)| {
            let hi = starts.get(j + 1).copied().unwrap_or(m);
            IntervalRecord { ranks: (lo, hi), values: (value_at(lo), value_at(hi)), points: counts[j] }
        })
        .collect()
}

impl ModelFile {
    pub fn from_fit(ds: &PointDataset, fit: &FitResult) -> Self {
        let model = &fit.model;
        let mut clusters: Vec<ClusterRecord> = (0..model.k_c)
            .map(|id| ClusterRecord { id, curves: Vec::new(), points: fit.stats.cluster_counts[id] })
            .collect();
        for (curve, &c) in model.cluster_of_curve.iter().enumerate() {
            clusters[c].curves.push(ds.labels()[curve].clone());
        }
        Self {
            points: ds.len(),
            curves: ds.curves(),
            clusters,
            x_intervals: intervals(ds, model, Axis::X, &fit.stats.x_interval_counts),
            y_intervals: intervals(ds, model, Axis::Y, &fit.stats.y_interval_counts),
            criterion: fit.criterion,
            initial_criterion: fit.initial_criterion,
            trace: fit.trace.clone(),
        }
    }

    /// Rebuild the grid on `ds`, matching curves by label and intervals by
    /// rank bounds.
    pub fn to_model(&self, ds: &PointDataset) -> Result<GridModel> {
        if self.points != ds.len() || self.curves != ds.curves() {
            return Err(Error::InvalidModel(format!(
                "model covers {} points and {} curves, dataset has {} and {}",
                self.points,
                self.curves,
                ds.len(),
                ds.curves()
            )));
        }
        let index: std::collections::HashMap<&str, usize> =
            ds.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut cluster_of_curve = vec![usize::MAX; ds.curves()];
        for (c, cluster) in self.clusters.iter().enumerate() {
            for label in &cluster.curves {
                let curve = *index
                    .get(label.as_str())
                    .ok_or_else(|| Error::InvalidModel(format!("curve `{label}` is not in the dataset")))?;
                if cluster_of_curve[curve] != usize::MAX {
                    return Err(Error::InvalidModel(format!("curve `{label}` assigned twice")));
                }
                cluster_of_curve[curve] = c;
            }
        }
        if let Some(curve) = cluster_of_curve.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidModel(format!("curve `{}` has no cluster", ds.labels()[curve])));
        }
        let bounds = |records: &[IntervalRecord]| -> Vec<usize> { records.iter().skip(1).map(|r| r.ranks.0).collect() };
        let model = GridModel {
            cluster_of_curve,
            k_c: self.clusters.len(),
            x_bounds: bounds(&self.x_intervals),
            y_bounds: bounds(&self.y_intervals),
        };
        model.validate(ds)?;
        Ok(model)
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Serialized coarsening sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyFile {
    pub events: Vec<MergeEvent>,
    pub dendrogram: NestedNode,
    pub pareto: ParetoSeries,
}

impl HierarchyFile {
    pub fn new(events: Vec<MergeEvent>, dendrogram: &Dendrogram, pareto: ParetoSeries) -> Self {
        Self { events, dendrogram: dendrogram.nested(), pareto }
    }
}

/// Write `curve_id,x,y` rows.
pub fn write_points<L: std::fmt::Display>(path: impl AsRef<Path>, points: &[(L, f64, f64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "curve_id,x,y")?;
    for (label, x, y) in points {
        writeln!(out, "{label},{x},{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// Write `curve_id,group` rows.
pub fn write_truth<L: std::fmt::Display>(path: impl AsRef<Path>, truth: &[(L, usize)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "curve_id,group")?;
    for (label, group) in truth {
        writeln!(out, "{label},{group}")?;
    }
    out.flush()?;
    Ok(())
}
