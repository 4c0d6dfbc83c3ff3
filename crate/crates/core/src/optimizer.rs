//! Search for the criterion-minimizing grid.
//!
//! A chain starts from a fine random grid, merges greedily while the
//! criterion decreases, then polishes the result with interval-bound shifts
//! and curve reassignments. Independent chains with different random
//! starting partitions are run and the best result kept.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionValue, Evaluator};
use crate::dataset::{Axis, PointDataset};
use crate::engine::{GridState, IMPROVEMENT_EPS};
use crate::model::{Dimension, GridModel};
use crate::stats::{compute_stats, SufficientStats};

/// Search knobs. Identical config and data give an identical result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    /// Number of independent chains (at least 1).
    pub vns_restarts: usize,
    /// Ranks per initial interval; `None` uses `max(2, ⌈√m / 2⌉)`.
    pub initial_points_per_interval: Option<usize>,
    pub initial_curves_per_cluster: usize,
    pub max_post_opt_rounds: usize,
    /// Widest perturbation tried around a chain's best grid: level `l`
    /// splits every interval and cluster into up to `2^l` parts.
    pub vns_max_level: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            vns_restarts: 8,
            initial_points_per_interval: None,
            initial_curves_per_cluster: 2,
            max_post_opt_rounds: 16,
            vns_max_level: 4,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn points_per_interval(&self, m: usize) -> usize {
        self.initial_points_per_interval
            .unwrap_or_else(|| ((m as f64).sqrt() / 2.0).ceil() as usize)
            .max(2)
    }
}

/// What an accepted search step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Merge(Dimension),
    BoundShift(Dimension),
    CurveMove,
    /// A run of consecutive best merges, some of them individually
    /// worsening, whose net effect decreases the criterion.
    MergeDescent { merges: usize },
    /// Re-optimizing a perturbed copy of the grid found a better one.
    Perturbation { level: usize },
    /// The chain result was replaced by the better null model.
    NullFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub kind: StepKind,
    /// Criterion change of the step (`after - before`, negative).
    pub delta: f64,
    pub criterion: f64,
    pub k_c: usize,
    pub k_x: usize,
    pub k_y: usize,
}

/// Outcome of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GridModel,
    pub stats: SufficientStats,
    pub criterion: CriterionValue,
    /// Criterion of the chain's starting model.
    pub initial_criterion: f64,
    pub trace: Vec<TraceStep>,
}

/// Fine-grained starting grid: equal-frequency rank intervals on both axes
/// and a random partition of the curves into clusters of
/// `initial_curves_per_cluster` curves.
pub fn initial_solution<R: Rng + ?Sized>(
    ds: &PointDataset,
    config: &SearchConfig,
    rng: &mut R,
) -> (GridModel, SufficientStats) {
    let model = initial_model(ds, config, rng);
    let stats = compute_stats(ds, &model).expect("initial model is valid by construction");
    (model, stats)
}

fn initial_model<R: Rng + ?Sized>(ds: &PointDataset, config: &SearchConfig, rng: &mut R) -> GridModel {
    let m = ds.len();
    let n = ds.curves();
    let k_axis = (m / config.points_per_interval(m)).max(1);
    let cuts: Vec<usize> = (1..k_axis).map(|j| j * m / k_axis).collect();
    let k_c = (n / config.initial_curves_per_cluster.max(1)).max(1);
    let mut curves: Vec<usize> = (0..n).collect();
    curves.shuffle(rng);
    let mut cluster_of_curve = vec![0; n];
    for (pos, &curve) in curves.iter().enumerate() {
        cluster_of_curve[curve] = pos % k_c;
    }
    GridModel { cluster_of_curve, k_c, x_bounds: cuts.clone(), y_bounds: cuts }
}

struct Chain<'a> {
    state: GridState<'a>,
    initial_criterion: f64,
    trace: Vec<TraceStep>,
}

impl<'a> Chain<'a> {
    fn new(ds: &'a PointDataset, ev: &'a Evaluator, model: &GridModel) -> Self {
        let state = GridState::new(ds, ev, model);
        let initial_criterion = state.criterion();
        Self { state, initial_criterion, trace: Vec::new() }
    }

    fn record(&mut self, kind: StepKind, delta: f64) {
        let [k_c, k_x, k_y] = self.state.sizes();
        self.trace.push(TraceStep {
            step: self.trace.len(),
            kind,
            delta,
            criterion: self.state.criterion(),
            k_c,
            k_x,
            k_y,
        });
    }

    /// Apply the best strictly improving merge until none is left.
    fn greedy(&mut self) -> bool {
        let mut any = false;
        while let Some((cand, _)) = self.state.best_merge() {
            if self.state.exact_delta(cand) >= -IMPROVEMENT_EPS {
                break;
            }
            let delta = self.state.apply_merge(cand);
            self.record(StepKind::Merge(cand.dimension()), delta);
            any = true;
        }
        any
    }

    fn shift_bounds(&mut self, axis: Axis) -> bool {
        let mut any = false;
        for left in self.state.interval_ids(axis) {
            let Some(right) = self.state.next_interval(axis, left) else { break };
            let reach = self.state.interval_width(axis, left).max(self.state.interval_width(axis, right));
            let mut best = None;
            let mut step = 1usize;
            while step < reach {
                for offset in [-(step as isize), step as isize] {
                    if let Some((delta, shift)) = self.state.shift_delta(axis, left, offset) {
                        if delta < -IMPROVEMENT_EPS && best.as_ref().is_none_or(|(d, _)| delta < *d) {
                            best = Some((delta, shift));
                        }
                    }
                }
                step *= 2;
            }
            if let Some((delta, shift)) = best {
                self.state.apply_shift(shift, delta);
                self.record(StepKind::BoundShift(Dimension::of_axis(axis)), delta);
                any = true;
            }
        }
        any
    }

    fn move_curves(&mut self, curves: usize) -> bool {
        let mut any = false;
        for curve in 0..curves {
            let source = self.state.cluster_of_curve(curve);
            if self.state.cluster_size(source) < 2 {
                continue;
            }
            let cells = self.state.curve_cells(curve);
            let mut best: Option<(f64, u32)> = None;
            for &target in self.state.alive_clusters() {
                if target == source {
                    continue;
                }
                let delta = self.state.move_delta(curve, &cells, target);
                if delta < -IMPROVEMENT_EPS && best.is_none_or(|(d, _)| delta < d) {
                    best = Some((delta, target));
                }
            }
            if let Some((delta, target)) = best {
                self.state.apply_move(curve, &cells, target, delta);
                self.record(StepKind::CurveMove, delta);
                any = true;
            }
        }
        any
    }

    fn post_optimize(&mut self, ds: &PointDataset, rounds: usize) -> bool {
        let mut any = false;
        for _ in 0..rounds {
            let mut improved = false;
            for axis in Axis::BOTH {
                improved |= self.shift_bounds(axis);
            }
            improved |= self.move_curves(ds.curves());
            if !improved {
                break;
            }
            any = true;
        }
        any
    }

    /// Keep applying the best merge, improving or not, down to the null
    /// model, then jump to the best model met on the way if it beats the
    /// current one.
    fn descend(&mut self) -> bool {
        let mut probe = self.state.clone();
        let start = probe.criterion();
        let mut path = Vec::new();
        let (mut best, mut best_len) = (start, 0);
        while let Some((cand, _)) = probe.best_merge() {
            probe.apply_merge(cand);
            path.push(cand);
            if probe.criterion() < best {
                (best, best_len) = (probe.criterion(), path.len());
            }
        }
        if best >= start - IMPROVEMENT_EPS {
            return false;
        }
        let mut delta = 0.0;
        for &cand in &path[..best_len] {
            delta += self.state.apply_merge(cand);
        }
        self.record(StepKind::MergeDescent { merges: best_len }, delta);
        true
    }

    fn finish(self, ds: &PointDataset, ev: &Evaluator) -> FitResult {
        let model = self.state.to_model();
        let stats = compute_stats(ds, &model).expect("search state yields a valid model");
        let criterion = ev.evaluate(&stats);
        FitResult { model, stats, criterion, initial_criterion: self.initial_criterion, trace: self.trace }
    }
}

/// Greedy bottom-up merging: repeatedly apply the best merge among all
/// cluster pairs and adjacent interval pairs while it decreases the criterion.
pub fn greedy_merge(ds: &PointDataset, model: &GridModel) -> FitResult {
    let ev = Evaluator::new(ds);
    let mut chain = Chain::new(ds, &ev, model);
    chain.greedy();
    chain.finish(ds, &ev)
}

/// Polish a result with interval-bound shifts (step sizes 1, 2, 4, … ranks)
/// and curve reassignments, keeping only strict improvements.
pub fn post_optimize(ds: &PointDataset, result: &FitResult, config: &SearchConfig) -> FitResult {
    let ev = Evaluator::new(ds);
    let mut chain = Chain::new(ds, &ev, &result.model);
    chain.initial_criterion = result.initial_criterion;
    chain.trace = result.trace.clone();
    chain.post_optimize(ds, config.max_post_opt_rounds);
    chain.finish(ds, &ev)
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Refine every interval and cluster of `model` into up to `2^level` parts;
/// curves are spread over the parts of their cluster at random.
fn perturb<R: Rng + ?Sized>(model: &GridModel, ds: &PointDataset, level: usize, rng: &mut R) -> GridModel {
    let parts = 1usize << level.min(20);
    let refine = |bounds: &[usize]| {
        let mut out = Vec::new();
        let mut lo = 0;
        for hi in bounds.iter().copied().chain(std::iter::once(ds.len())) {
            let p = parts.min(hi - lo);
            out.extend((1..p).map(|j| lo + j * (hi - lo) / p));
            if hi < ds.len() {
                out.push(hi);
            }
            lo = hi;
        }
        out
    };
    let mut members = vec![Vec::new(); model.k_c];
    for (curve, &c) in model.cluster_of_curve.iter().enumerate() {
        members[c].push(curve);
    }
    let mut cluster_of_curve = vec![0; model.cluster_of_curve.len()];
    let mut k_c = 0;
    for mut group in members {
        group.shuffle(rng);
        let p = parts.min(group.len());
        for (pos, curve) in group.into_iter().enumerate() {
            cluster_of_curve[curve] = k_c + pos % p;
        }
        k_c += p;
    }
    GridModel { cluster_of_curve, k_c, x_bounds: refine(&model.x_bounds), y_bounds: refine(&model.y_bounds) }
}

/// Greedy merges, then bound shifts, curve moves and merge descents until
/// none of them improves.
fn local_search(chain: &mut Chain, ds: &PointDataset, config: &SearchConfig) {
    chain.greedy();
    loop {
        // merges can reopen after moves; alternate until all are stuck
        while chain.post_optimize(ds, config.max_post_opt_rounds) && chain.greedy() {}
        if !chain.descend() {
            break;
        }
        chain.greedy();
    }
}

fn run_chain(ds: &PointDataset, ev: &Evaluator, config: &SearchConfig, index: usize) -> FitResult {
    let mut rng = chain_rng(config.seed, index);
    let model = initial_model(ds, config, &mut rng);
    let mut chain = Chain::new(ds, ev, &model);
    local_search(&mut chain, ds, config);
    let mut level = 1;
    while level <= config.vns_max_level {
        let start = perturb(&chain.state.to_model(), ds, level, &mut rng);
        let mut candidate = Chain::new(ds, ev, &start);
        local_search(&mut candidate, ds, config);
        let delta = candidate.state.criterion() - chain.state.criterion();
        if delta < -IMPROVEMENT_EPS {
            chain.state = candidate.state;
            chain.record(StepKind::Perturbation { level }, delta);
            level = 1;
        } else {
            level += 1;
        }
    }
    chain.finish(ds, ev)
}

fn select_best(ds: &PointDataset, ev: &Evaluator, results: Vec<FitResult>) -> FitResult {
    let mut best = results
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.criterion.total.total_cmp(&b.criterion.total).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one chain");
    let null_stats = SufficientStats::null(ds);
    let null = ev.evaluate(&null_stats);
    if null.total < best.criterion.total - IMPROVEMENT_EPS {
        let delta = null.total - best.criterion.total;
        best.trace.push(TraceStep {
            step: best.trace.len(),
            kind: StepKind::NullFallback,
            delta,
            criterion: null.total,
            k_c: 1,
            k_x: 1,
            k_y: 1,
        });
        best.model = GridModel::null(ds);
        best.stats = null_stats;
        best.criterion = null;
    }
    best
}

/// Run every restart chain one after the other.
pub fn fit_sequential(ds: &PointDataset, config: &SearchConfig) -> FitResult {
    let ev = Evaluator::new(ds);
    let results = (0..config.vns_restarts.max(1)).map(|i| run_chain(ds, &ev, config, i)).collect();
    select_best(ds, &ev, results)
}

/// Run the restart chains on the rayon pool.
#[cfg(feature = "parallel")]
pub fn fit_parallel(ds: &PointDataset, config: &SearchConfig) -> FitResult {
    use rayon::prelude::*;
    let ev = Evaluator::new(ds);
    let results = (0..config.vns_restarts.max(1))
        .into_par_iter()
        .map(|i| run_chain(ds, &ev, config, i))
        .collect();
    select_best(ds, &ev, results)
}

/// Best of `vns_restarts` independent chains; parallel when the `parallel`
/// feature is enabled. The result does not depend on the execution mode.
pub fn fit(ds: &PointDataset, config: &SearchConfig) -> FitResult {
    #[cfg(feature = "parallel")]
    return fit_parallel(ds, config);
    #[cfg(not(feature = "parallel"))]
    return fit_sequential(ds, config);
}
