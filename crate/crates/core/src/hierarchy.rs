//! Agglomerative coarsening of a fitted grid down to the null model.
//!
//! At every level the cheapest merge among all cluster pairs and adjacent
//! interval pairs is applied, without re-optimizing anything else. Cluster
//! merges build a dendrogram over the fitted clusters; the criterion of the
//! intermediate grids gives the kept-information series.

use serde::{Deserialize, Serialize};

use crate::criterion::Evaluator;
use crate::dataset::PointDataset;
use crate::engine::{Candidate, GridState};
use crate::error::{Error, Result};
use crate::model::Dimension;
use crate::optimizer::FitResult;
use crate::stats::compute_stats;

/// One coarsening step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub step: usize,
    pub dimension: Dimension,
    /// Canonical indices of the merged members in the grid before the merge
    /// (clusters, or the left and right interval).
    pub operands: (usize, usize),
    /// Dendrogram nodes joined by a cluster merge.
    pub nodes: Option<(usize, usize)>,
    /// `criterion_after - criterion_before`.
    pub delta_c: f64,
    pub criterion_after: f64,
    /// Weighted KL divergence of the two clusters from their union.
    pub kl_weighted: Option<f64>,
    pub k_c_after: usize,
    pub k_x_after: usize,
    pub k_y_after: usize,
}

/// Merge the fitted grid down to one cell, cheapest merge first.
///
/// Event criteria are full evaluations of the intermediate grids, so the
/// final `criterion_after` is exactly the null-model criterion.
pub fn agglomerate(ds: &PointDataset, fit: &FitResult) -> Vec<MergeEvent> {
    let ev = Evaluator::new(ds);
    let mut state = GridState::new(ds, &ev, &fit.model);
    let mut before = fit.criterion.total;
    let mut node_of_cluster: Vec<usize> = (0..fit.model.k_c).collect();
    let mut next_node = fit.model.k_c;
    let mut events = Vec::new();
    while let Some((cand, _)) = state.best_merge() {
        let (operands, nodes, kl_weighted) = match cand {
            Candidate::Clusters(a, b) => {
                let (lo, hi) = (a.min(b), a.max(b));
                let nodes = (node_of_cluster[lo as usize], node_of_cluster[hi as usize]);
                node_of_cluster[lo as usize] = next_node;
                next_node += 1;
                let kl = state.cluster_kl(lo, hi).weighted_sum;
                ((state.cluster_index(lo), state.cluster_index(hi)), Some(nodes), Some(kl))
            }
            Candidate::Intervals(axis, left) => {
                let j = state.interval_index(axis, left);
                ((j, j + 1), None, None)
            }
        };
        state.apply_merge(cand);
        let model = state.to_model();
        let stats = compute_stats(ds, &model).expect("merged grid is valid");
        let after = ev.evaluate(&stats).total;
        let [k_c_after, k_x_after, k_y_after] = state.sizes();
        events.push(MergeEvent {
            step: events.len(),
            dimension: cand.dimension(),
            operands,
            nodes,
            delta_c: after - before,
            criterion_after: after,
            kl_weighted,
            k_c_after,
            k_x_after,
            k_y_after,
        });
        before = after;
    }
    events
}

/// A node of the cluster tree. Nodes `0..leaves` are the fitted clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode {
    pub id: usize,
    pub children: Option<(usize, usize)>,
    /// Index of the merge event that created the node.
    pub event: Option<usize>,
    /// Criterion increase since the fitted grid, made non-decreasing
    /// towards the root.
    pub height: f64,
    /// Number of fitted clusters below the node.
    pub size: usize,
}

/// Binary merge tree over the fitted clusters; the root is the last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub nodes: Vec<DendrogramNode>,
}

/// Nested form of a dendrogram, for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedNode {
    pub id: usize,
    pub height: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<NestedNode>,
}

impl Dendrogram {
    pub fn root(&self) -> &DendrogramNode {
        self.nodes.last().expect("a dendrogram has at least one leaf")
    }

    pub fn nested(&self) -> NestedNode {
        self.nest(self.nodes.len() - 1)
    }

    fn nest(&self, id: usize) -> NestedNode {
        let node = &self.nodes[id];
        let children = node.children.map_or_else(Vec::new, |(a, b)| vec![self.nest(a), self.nest(b)]);
        NestedNode { id, height: node.height, event: node.event, children }
    }

    /// Leaves of the subtree under `id`, in tree order.
    pub fn leaves_under(&self, id: usize) -> Vec<usize> {
        match self.nodes[id].children {
            None => vec![id],
            Some((a, b)) => {
                let mut out = self.leaves_under(a);
                out.extend(self.leaves_under(b));
                out
            }
        }
    }
}

/// Tree of the cluster merges among `events`, over `k_c` fitted clusters.
pub fn build_dendrogram(events: &[MergeEvent], k_c: usize) -> Result<Dendrogram> {
    if k_c == 0 {
        return Err(Error::InvalidArgument("a dendrogram needs at least one cluster".into()));
    }
    let cluster_events: Vec<&MergeEvent> = events.iter().filter(|e| e.dimension == Dimension::Cluster).collect();
    if cluster_events.len() != k_c - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} cluster merges cannot join {k_c} clusters into one tree",
            cluster_events.len()
        )));
    }
    let fitted = events.first().map_or(0.0, |e| e.criterion_after - e.delta_c);
    let mut nodes: Vec<DendrogramNode> = (0..k_c)
        .map(|id| DendrogramNode { id, children: None, event: None, height: 0.0, size: 1 })
        .collect();
    for event in cluster_events {
        let (a, b) = event.nodes.ok_or_else(|| Error::InvalidArgument(format!("cluster event {} lacks nodes", event.step)))?;
        let id = nodes.len();
        if a >= id || b >= id || a == b {
            return Err(Error::InvalidArgument(format!("event {} joins unknown nodes ({a}, {b})", event.step)));
        }
        let height = (event.criterion_after - fitted).max(nodes[a].height).max(nodes[b].height);
        let size = nodes[a].size + nodes[b].size;
        nodes.push(DendrogramNode { id, children: Some((a, b)), event: Some(event.step), height, size });
    }
    let mut parent_count = vec![0usize; nodes.len()];
    for node in &nodes {
        if let Some((a, b)) = node.children {
            parent_count[a] += 1;
            parent_count[b] += 1;
        }
    }
    if parent_count[..nodes.len() - 1].iter().any(|&c| c != 1) {
        return Err(Error::InvalidArgument("cluster merges do not form a single binary tree".into()));
    }
    Ok(Dendrogram { leaves: k_c, nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    /// Cluster count.
    pub k: usize,
    pub criterion: f64,
    /// `(c(M_k) - c(M_null)) / (c(M_opt) - c(M_null))`.
    pub tau: f64,
    /// Number of events applied to reach this grid.
    pub events_applied: usize,
}

/// Kept information along the merge sequence.
///
/// One row per cluster count, taken the first time the count is reached,
/// followed by a final row for the null model at the end of the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSeries {
    pub rows: Vec<ParetoRow>,
    pub fitted_criterion: f64,
    pub null_criterion: f64,
    /// The fitted grid is no better than the null model; every tau is 1.
    pub degenerate: bool,
}

pub fn kept_information(fit: &FitResult, events: &[MergeEvent], null_criterion: f64) -> ParetoSeries {
    let fitted = fit.criterion.total;
    let span = fitted - null_criterion;
    let degenerate = span.abs() <= 1e-9;
    let tau = |c: f64| {
        if degenerate {
            1.0
        } else if c == null_criterion {
            0.0
        } else {
            (c - null_criterion) / span
        }
    };
    let mut rows = vec![ParetoRow { k: fit.model.k_c, criterion: fitted, tau: 1.0, events_applied: 0 }];
    for (i, event) in events.iter().enumerate() {
        if event.dimension == Dimension::Cluster {
            rows.push(ParetoRow {
                k: event.k_c_after,
                criterion: event.criterion_after,
                tau: tau(event.criterion_after),
                events_applied: i + 1,
            });
        }
    }
    if let Some(last) = events.last() {
        if last.dimension != Dimension::Cluster {
            rows.push(ParetoRow {
                k: last.k_c_after,
                criterion: last.criterion_after,
                tau: tau(last.criterion_after),
                events_applied: events.len(),
            });
        }
    }
    ParetoSeries { rows, fitted_criterion: fitted, null_criterion, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::evaluate;
    use crate::model::{GridModel, Merge};
    use crate::optimizer::{fit, SearchConfig};
    use crate::stats::{apply_merge, SufficientStats};
    use crate::synth::{generate, SynthSpec};

    fn fitted(model: GridModel, ds: &PointDataset) -> FitResult {
        let stats = compute_stats(ds, &model).unwrap();
        let criterion = evaluate(ds, &stats);
        FitResult { model, stats, initial_criterion: criterion.total, criterion, trace: Vec::new() }
    }

    #[test]
    fn null_fit_has_no_events() {
        let ds = PointDataset::new(&[(0, 1.0, 2.0), (1, 2.0, 1.0)]).unwrap();
        let fit = fitted(GridModel::null(&ds), &ds);
        let events = agglomerate(&ds, &fit);
        assert!(events.is_empty());
        let tree = build_dendrogram(&events, 1).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        let series = kept_information(&fit, &events, fit.criterion.total);
        assert!(series.degenerate);
        assert_eq!(series.rows.len(), 1);
        assert_eq!(series.rows[0].tau, 1.0);
    }

    #[test]
    fn two_clusters_single_event() {
        let pts: Vec<(usize, f64, f64)> = (0..20).map(|i| (i % 4, i as f64, (i % 3) as f64)).collect();
        let ds = PointDataset::new(&pts).unwrap();
        let fit = fitted(GridModel { cluster_of_curve: vec![0, 1, 0, 1], k_c: 2, x_bounds: vec![], y_bounds: vec![] }, &ds);
        let events = agglomerate(&ds, &fit);
        assert_eq!(events.len(), 1);
        let null = evaluate(&ds, &SufficientStats::null(&ds)).total;
        assert_eq!(events[0].criterion_after, null);
        assert!((events[0].delta_c - (null - fit.criterion.total)).abs() < 1e-12);
        assert_eq!(events[0].nodes, Some((0, 1)));
        let tree = build_dendrogram(&events, 2).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.root().children, Some((0, 1)));
    }

    #[test]
    fn synthetic_sequence_is_consistent() {
        let data = generate(&SynthSpec::new(1000, 3)).unwrap();
        let ds = &data.dataset;
        let fit = fit(ds, &SearchConfig { vns_restarts: 2, ..SearchConfig::with_seed(1) });
        let events = agglomerate(ds, &fit);
        assert_eq!(events.len(), fit.model.k_c + fit.model.k_x() + fit.model.k_y() - 3);
        let null = evaluate(ds, &SufficientStats::null(ds)).total;
        let sum: f64 = events.iter().map(|e| e.delta_c).sum();
        assert!((sum - (null - fit.criterion.total)).abs() < 1e-8);
        let last = events.last().unwrap();
        assert_eq!((last.k_c_after, last.k_x_after, last.k_y_after), (1, 1, 1));
        assert_eq!(last.criterion_after, null);

        // replay through the canonical merge
        let (mut model, mut stats) = (fit.model.clone(), fit.stats.clone());
        for e in &events {
            let merge = Merge { dimension: e.dimension, a: e.operands.0, b: e.operands.1 };
            (model, stats) = apply_merge(&model, &stats, merge).unwrap();
            assert!((evaluate(ds, &stats).total - e.criterion_after).abs() < 1e-9);
        }

        let tree = build_dendrogram(&events, fit.model.k_c).unwrap();
        assert_eq!(tree.leaves, fit.model.k_c);
        assert_eq!(tree.root().size, fit.model.k_c);
        for node in &tree.nodes {
            if let Some((a, b)) = node.children {
                assert!(node.height >= tree.nodes[a].height && node.height >= tree.nodes[b].height);
            }
        }
        let series = kept_information(&fit, &events, null);
        assert_eq!(series.rows[0].tau, 1.0);
        assert_eq!(series.rows.last().unwrap().tau, 0.0);
    }

    #[test]
    fn dendrogram_rejects_missing_cluster_merges() {
        assert!(build_dendrogram(&[], 3).is_err());
    }
}
