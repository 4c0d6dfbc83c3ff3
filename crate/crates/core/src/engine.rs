//! Mutable search state with incremental merge and move costs.
//!
//! Partition members carry stable ids for the lifetime of a state: a merged
//! cluster keeps the lower id, a merged interval keeps the id of the larger
//! side, and dead ids are never reused. Alive interval ids stay increasing
//! along their axis, so id order equals position order.
//!
//! The cell tensor is held in three sparse views (by cluster, by X interval,
//! by Y interval). For every merge candidate the state caches the sum of
//! `ln C(a+b, a)` over the cell pairs the merge would pool; each single-cell
//! count change updates exactly the cached sums that involve that cell, so
//! candidate costs are available in `O(1)` from the cache plus marginals.

use rustc_hash::FxHashMap;

use crate::criterion::{kl_from_pairs, CriterionValue, Evaluator, KlDissimilarity};
use crate::dataset::{Axis, PointDataset};
use crate::model::{Dimension, GridModel};
use crate::stats::Cell;

/// Smallest criterion decrease accepted as an improvement.
pub(crate) const IMPROVEMENT_EPS: f64 = 1e-9;

const NONE: u32 = u32::MAX;

type SliceMap = FxHashMap<u64, u32>;

#[inline]
fn pack(a: u32, b: u32) -> u64 {
    ((a as u64) << 32) | b as u64
}

#[inline]
fn unpack(k: u64) -> (u32, u32) {
    ((k >> 32) as u32, k as u32)
}

#[inline]
fn view_key(dim: usize, cell: Cell) -> (usize, u64) {
    match dim {
        0 => (cell[0] as usize, pack(cell[1], cell[2])),
        1 => (cell[1] as usize, pack(cell[0], cell[2])),
        _ => (cell[2] as usize, pack(cell[0], cell[1])),
    }
}

#[inline]
fn cell_from(dim: usize, slice: u32, key: u64) -> Cell {
    let (a, b) = unpack(key);
    match dim {
        0 => [slice, a, b],
        1 => [a, slice, b],
        _ => [a, b, slice],
    }
}

/// A merge candidate in stable ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Candidate {
    Clusters(u32, u32),
    /// Interval with stable id `left` and its right neighbour.
    Intervals(Axis, u32),
}

impl Candidate {
    pub fn dimension(self) -> Dimension {
        match self {
            Candidate::Clusters(..) => Dimension::Cluster,
            Candidate::Intervals(axis, _) => Dimension::of_axis(axis),
        }
    }
}

/// Points moved by a bound shift, aggregated by `(cluster, other-axis interval)`.
pub(crate) struct Shift {
    axis: Axis,
    from: u32,
    to: u32,
    ranks: std::ops::Range<usize>,
    moved: Vec<(u32, u32, u32)>,
}

#[derive(Debug, Clone)]
struct AxisState {
    alive: Vec<bool>,
    prev: Vec<u32>,
    next: Vec<u32>,
    lo: Vec<usize>,
    hi: Vec<usize>,
    count: Vec<u64>,
    of_rank: Vec<u32>,
    first: u32,
    live: usize,
    /// Cached pooled-cell sum of the pair `(id, next[id])`.
    pair_term: Vec<f64>,
}

impl AxisState {
    fn from_bounds(bounds: &[usize], m: usize) -> Self {
        let k = bounds.len() + 1;
        let mut lo = Vec::with_capacity(k);
        let mut hi = Vec::with_capacity(k);
        let mut start = 0;
        for &b in bounds.iter().chain(std::iter::once(&m)) {
            lo.push(start);
            hi.push(b);
            start = b;
        }
        let mut of_rank = vec![0u32; m];
        for j in 0..k {
            of_rank[lo[j]..hi[j]].fill(j as u32);
        }
        Self {
            alive: vec![true; k],
            prev: (0..k).map(|j| if j == 0 { NONE } else { j as u32 - 1 }).collect(),
            next: (0..k).map(|j| if j + 1 == k { NONE } else { j as u32 + 1 }).collect(),
            count: lo.iter().zip(&hi).map(|(l, h)| (h - l) as u64).collect(),
            lo,
            hi,
            of_rank,
            first: 0,
            live: k,
            pair_term: vec![0.0; k],
        }
    }

    fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        let mut cur = self.first;
        std::iter::from_fn(move || {
            if cur == NONE {
                return None;
            }
            let out = cur;
            cur = self.next[cur as usize];
            Some(out)
        })
    }

    fn width(&self, id: u32) -> usize {
        self.hi[id as usize] - self.lo[id as usize]
    }
}

/// Working state of one search chain or agglomeration replay.
#[derive(Clone)]
pub(crate) struct GridState<'a> {
    ds: &'a PointDataset,
    ev: &'a Evaluator,
    cluster_of_curve: Vec<u32>,
    /// Alive cluster ids, ascending.
    clusters: Vec<u32>,
    cluster_points: Vec<u64>,
    cluster_curves: Vec<u64>,
    members: Vec<Vec<u32>>,
    id_space: usize,
    /// Cached pooled-cell sums of cluster pairs, `[min * id_space + max]`.
    cluster_pair_term: Vec<f64>,
    axes: [AxisState; 2],
    views: [Vec<SliceMap>; 3],
    criterion: f64,
}

impl<'a> GridState<'a> {
    /// State for a canonical model; stable ids start as canonical indices.
    pub fn new(ds: &'a PointDataset, ev: &'a Evaluator, model: &GridModel) -> Self {
        let m = ds.len();
        let kc = model.k_c;
        let axes = [
            AxisState::from_bounds(&model.x_bounds, m),
            AxisState::from_bounds(&model.y_bounds, m),
        ];
        let mut members = vec![Vec::new(); kc];
        let mut cluster_points = vec![0u64; kc];
        let mut cluster_curves = vec![0u64; kc];
        for (curve, &c) in model.cluster_of_curve.iter().enumerate() {
            members[c].push(curve as u32);
            cluster_points[c] += ds.curve_sizes()[curve] as u64;
            cluster_curves[c] += 1;
        }
        let mut views: [Vec<SliceMap>; 3] = [
            vec![SliceMap::default(); kc],
            vec![SliceMap::default(); axes[0].alive.len()],
            vec![SliceMap::default(); axes[1].alive.len()],
        ];
        let xr = ds.ranks(Axis::X);
        let yr = ds.ranks(Axis::Y);
        for (p, &curve) in ds.curve_of_point().iter().enumerate() {
            let cell = [
                model.cluster_of_curve[curve as usize] as u32,
                axes[0].of_rank[xr[p] as usize],
                axes[1].of_rank[yr[p] as usize],
            ];
            for (d, view) in views.iter_mut().enumerate() {
                let (s, k) = view_key(d, cell);
                *view[s].entry(k).or_insert(0) += 1;
            }
        }
        let mut state = Self {
            ds,
            ev,
            cluster_of_curve: model.cluster_of_curve.iter().map(|&c| c as u32).collect(),
            clusters: (0..kc as u32).collect(),
            cluster_points,
            cluster_curves,
            members,
            id_space: kc,
            cluster_pair_term: vec![0.0; kc * kc],
            axes,
            views,
            criterion: 0.0,
        };
        for i in 0..kc as u32 {
            for j in i + 1..kc as u32 {
                let t = state.fresh_cluster_pair(i, j);
                state.cluster_pair_term[i as usize * kc + j as usize] = t;
            }
        }
        for axis in Axis::BOTH {
            let ids: Vec<u32> = state.axes[axis.index()].ids().collect();
            for w in ids.windows(2) {
                let t = state.fresh_axis_pair(axis, w[0]);
                state.axes[axis.index()].pair_term[w[0] as usize] = t;
            }
        }
        state.criterion = state.full_criterion().total;
        state
    }

    pub fn criterion(&self) -> f64 {
        self.criterion
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.clusters.len(), self.axes[0].live, self.axes[1].live]
    }

    #[cfg(test)]
    pub fn is_null(&self) -> bool {
        self.sizes() == [1, 1, 1]
    }

    pub fn alive_clusters(&self) -> &[u32] {
        &self.clusters
    }

    // ----- cell access -------------------------------------------------

    #[inline]
    fn get(&self, cell: Cell) -> u64 {
        self.views[0][cell[0] as usize]
            .get(&pack(cell[1], cell[2]))
            .copied()
            .unwrap_or(0) as u64
    }

    #[inline]
    fn set(&mut self, cell: Cell, value: u64) {
        for d in 0..3 {
            let (s, k) = view_key(d, cell);
            if value == 0 {
                self.views[d][s].remove(&k);
            } else {
                self.views[d][s].insert(k, value as u32);
            }
        }
    }

    #[inline]
    fn gain(&self, a: u64, b: u64) -> f64 {
        self.ev.tables().pooling_gain(a, b)
    }

    #[inline]
    fn cluster_pair_slot(&self, a: u32, b: u32) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo as usize * self.id_space + hi as usize
    }

    /// Set one cell count, updating every cached pair sum involving the cell
    /// except those of `skip`.
    fn adjust(&mut self, cell: Cell, new: u64, skip: Option<usize>) {
        let old = self.get(cell);
        if old == new {
            return;
        }
        if skip != Some(0) {
            for i in 0..self.clusters.len() {
                let other = self.clusters[i];
                if other == cell[0] {
                    continue;
                }
                let w = self.get([other, cell[1], cell[2]]);
                if w > 0 {
                    let diff = self.gain(new, w) - self.gain(old, w);
                    let slot = self.cluster_pair_slot(cell[0], other);
                    self.cluster_pair_term[slot] += diff;
                }
            }
        }
        for axis in Axis::BOTH {
            let d = axis.index() + 1;
            if skip == Some(d) {
                continue;
            }
            let s = cell[d];
            let prev = self.axes[axis.index()].prev[s as usize];
            let next = self.axes[axis.index()].next[s as usize];
            if prev != NONE {
                let mut partner = cell;
                partner[d] = prev;
                let w = self.get(partner);
                if w > 0 {
                    let diff = self.gain(new, w) - self.gain(old, w);
                    self.axes[axis.index()].pair_term[prev as usize] += diff;
                }
            }
            if next != NONE {
                let mut partner = cell;
                partner[d] = next;
                let w = self.get(partner);
                if w > 0 {
                    let diff = self.gain(new, w) - self.gain(old, w);
                    self.axes[axis.index()].pair_term[s as usize] += diff;
                }
            }
        }
        self.set(cell, new);
    }

    fn pooled_sum(&self, dim: usize, a: u32, b: u32) -> f64 {
        let (va, vb) = (&self.views[dim][a as usize], &self.views[dim][b as usize]);
        let (small, large) = if va.len() <= vb.len() { (va, vb) } else { (vb, va) };
        small
            .iter()
            .filter_map(|(k, &x)| large.get(k).map(|&y| self.gain(x as u64, y as u64)))
            .sum()
    }

    fn fresh_cluster_pair(&self, a: u32, b: u32) -> f64 {
        self.pooled_sum(0, a, b)
    }

    fn fresh_axis_pair(&self, axis: Axis, left: u32) -> f64 {
        let right = self.axes[axis.index()].next[left as usize];
        self.pooled_sum(axis.index() + 1, left, right)
    }

    // ----- criterion ---------------------------------------------------

    /// Criterion recomputed from scratch from the current counts.
    pub fn full_criterion(&self) -> CriterionValue {
        let t = self.ev.tables();
        let lf = |v: u64| t.log_factorial(v);
        let m = self.ev.points();
        let [kc, kx, ky] = self.sizes();
        let mut prior = (self.ev.curves() as f64).ln()
            + 2.0 * (m as f64).ln()
            + t.log_bell(kc)
            + self.ev.cell_prior((kc * kx * ky) as u64);
        let mut likelihood = lf(m) - self.ev.curve_log_factorials();
        for &c in &self.clusters {
            let (mc, nc) = (self.cluster_points[c as usize], self.cluster_curves[c as usize]);
            prior += t.log_binomial(mc + nc - 1, nc - 1);
            likelihood += lf(mc);
            likelihood -= self.views[0][c as usize].values().map(|&v| lf(v as u64)).sum::<f64>();
        }
        for axis in &self.axes {
            likelihood += axis.ids().map(|j| lf(axis.count[j as usize])).sum::<f64>();
        }
        CriterionValue {
            total: prior + likelihood,
            prior_terms: prior,
            likelihood_terms: likelihood,
        }
    }

    fn cluster_marginal(&self, a: u32, b: u32) -> f64 {
        let (ma, na) = (self.cluster_points[a as usize], self.cluster_curves[a as usize]);
        let (mb, nb) = (self.cluster_points[b as usize], self.cluster_curves[b as usize]);
        self.ev.cluster_term(ma + mb, na + nb) - self.ev.cluster_term(ma, na) - self.ev.cluster_term(mb, nb)
    }

    fn interval_marginal(&self, axis: Axis, left: u32) -> f64 {
        let st = &self.axes[axis.index()];
        let right = st.next[left as usize];
        let (a, b) = (st.count[left as usize], st.count[right as usize]);
        let t = self.ev.tables();
        t.log_factorial(a + b) - t.log_factorial(a) - t.log_factorial(b)
    }

    /// Criterion change of a candidate merge, recomputing its pooled-cell
    /// sum from the views rather than the cache.
    pub fn exact_delta(&self, cand: Candidate) -> f64 {
        let size = self.ev.size_delta(self.sizes(), cand.dimension());
        match cand {
            Candidate::Clusters(a, b) => size + self.cluster_marginal(a, b) - self.fresh_cluster_pair(a, b),
            Candidate::Intervals(axis, left) => {
                size + self.interval_marginal(axis, left) - self.fresh_axis_pair(axis, left)
            }
        }
    }

    /// Visit every merge candidate with its cached cost, in tie-break order
    /// (clusters before X before Y, lower operand first).
    pub fn for_each_candidate(&self, mut visit: impl FnMut(Candidate, f64)) {
        let sizes = self.sizes();
        if sizes[0] > 1 {
            let size = self.ev.size_delta(sizes, Dimension::Cluster);
            let terms: Vec<f64> = self
                .clusters
                .iter()
                .map(|&c| self.ev.cluster_term(self.cluster_points[c as usize], self.cluster_curves[c as usize]))
                .collect();
            for (i, &a) in self.clusters.iter().enumerate() {
                for (j, &b) in self.clusters.iter().enumerate().skip(i + 1) {
                    let (ma, na) = (self.cluster_points[a as usize], self.cluster_curves[a as usize]);
                    let (mb, nb) = (self.cluster_points[b as usize], self.cluster_curves[b as usize]);
                    let marginal = self.ev.cluster_term(ma + mb, na + nb) - terms[i] - terms[j];
                    let cached = self.cluster_pair_term[a as usize * self.id_space + b as usize];
                    visit(Candidate::Clusters(a, b), size + marginal - cached);
                }
            }
        }
        for axis in Axis::BOTH {
            if sizes[axis.index() + 1] < 2 {
                continue;
            }
            let size = self.ev.size_delta(sizes, Dimension::of_axis(axis));
            let st = &self.axes[axis.index()];
            for left in st.ids() {
                if st.next[left as usize] == NONE {
                    break;
                }
                let cached = st.pair_term[left as usize];
                visit(Candidate::Intervals(axis, left), size + self.interval_marginal(axis, left) - cached);
            }
        }
    }

    /// Cheapest merge by cached cost; ties resolved by candidate order.
    pub fn best_merge(&self) -> Option<(Candidate, f64)> {
        let mut best: Option<(Candidate, f64)> = None;
        self.for_each_candidate(|cand, delta| {
            if best.is_none_or(|(_, d)| delta < d) {
                best = Some((cand, delta));
            }
        });
        best
    }

    /// Apply a merge and return its exact criterion change.
    pub fn apply_merge(&mut self, cand: Candidate) -> f64 {
        let delta = self.exact_delta(cand);
        match cand {
            Candidate::Clusters(a, b) => self.merge_clusters(a.min(b), a.max(b)),
            Candidate::Intervals(axis, left) => self.merge_intervals(axis, left),
        }
        self.criterion += delta;
        delta
    }

    fn merge_clusters(&mut self, keep: u32, gone: u32) {
        let pos = self.clusters.binary_search(&gone).expect("merging a dead cluster");
        self.clusters.remove(pos);
        let moved = std::mem::take(&mut self.members[gone as usize]);
        for &curve in &moved {
            self.cluster_of_curve[curve as usize] = keep;
        }
        self.members[keep as usize].extend(moved);
        self.cluster_points[keep as usize] += self.cluster_points[gone as usize];
        self.cluster_curves[keep as usize] += self.cluster_curves[gone as usize];
        self.cluster_points[gone as usize] = 0;
        self.cluster_curves[gone as usize] = 0;

        let entries: Vec<(u64, u32)> = self.views[0][gone as usize].iter().map(|(&k, &v)| (k, v)).collect();
        for (key, v) in entries {
            let from = cell_from(0, gone, key);
            self.adjust(from, 0, Some(0));
            let to = cell_from(0, keep, key);
            let u = self.get(to);
            self.adjust(to, u + v as u64, None);
        }
    }

    fn merge_intervals(&mut self, axis: Axis, left: u32) {
        let d = axis.index() + 1;
        let right = self.axes[axis.index()].next[left as usize];
        debug_assert_ne!(right, NONE);
        let st = &self.axes[axis.index()];
        let (keep, gone) = if st.count[left as usize] >= st.count[right as usize] {
            (left, right)
        } else {
            (right, left)
        };

        let entries: Vec<(u64, u32)> = self.views[d][gone as usize].iter().map(|(&k, &v)| (k, v)).collect();
        for (key, v) in entries {
            let from = cell_from(d, gone, key);
            self.adjust(from, 0, Some(d));
            let to = cell_from(d, keep, key);
            let u = self.get(to);
            self.adjust(to, u + v as u64, Some(d));
        }

        let st = &mut self.axes[axis.index()];
        let (g_lo, g_hi) = (st.lo[gone as usize], st.hi[gone as usize]);
        st.of_rank[g_lo..g_hi].fill(keep);
        let prev = st.prev[left as usize];
        let next = st.next[right as usize];
        st.lo[keep as usize] = st.lo[left as usize];
        st.hi[keep as usize] = st.hi[right as usize];
        st.count[keep as usize] += st.count[gone as usize];
        st.count[gone as usize] = 0;
        st.alive[gone as usize] = false;
        st.live -= 1;
        st.prev[keep as usize] = prev;
        st.next[keep as usize] = next;
        if prev == NONE {
            st.first = keep;
        } else {
            st.next[prev as usize] = keep;
        }
        if next != NONE {
            st.prev[next as usize] = keep;
        }
        if prev != NONE {
            let t = self.fresh_axis_pair(axis, prev);
            self.axes[axis.index()].pair_term[prev as usize] = t;
        }
        if next != NONE {
            let t = self.fresh_axis_pair(axis, keep);
            self.axes[axis.index()].pair_term[keep as usize] = t;
        }
    }

    // ----- bound shifts --------------------------------------------------

    /// Alive interval ids of an axis, in position order.
    pub fn interval_ids(&self, axis: Axis) -> Vec<u32> {
        self.axes[axis.index()].ids().collect()
    }

    pub fn interval_width(&self, axis: Axis, id: u32) -> usize {
        self.axes[axis.index()].width(id)
    }

    pub fn next_interval(&self, axis: Axis, id: u32) -> Option<u32> {
        let n = self.axes[axis.index()].next[id as usize];
        (n != NONE).then_some(n)
    }

    /// Cost of moving the cut between `left` and its right neighbour by
    /// `offset` ranks (negative moves it left). `None` when the shift would
    /// empty an interval.
    pub fn shift_delta(&self, axis: Axis, left: u32, offset: isize) -> Option<(f64, Shift)> {
        let st = &self.axes[axis.index()];
        let right = st.next[left as usize];
        if right == NONE || offset == 0 {
            return None;
        }
        let s = offset.unsigned_abs();
        let cut = st.hi[left as usize];
        let (from, to, ranks) = if offset < 0 {
            if s >= st.width(left) {
                return None;
            }
            (left, right, cut - s..cut)
        } else {
            if s >= st.width(right) {
                return None;
            }
            (right, left, cut..cut + s)
        };

        let other = axis.other();
        let other_of_rank = &self.axes[other.index()].of_rank;
        let other_ranks = self.ds.ranks(other);
        let order = self.ds.order(axis);
        let curve_of_point = self.ds.curve_of_point();
        let mut keys: Vec<u64> = ranks
            .clone()
            .map(|r| {
                let p = order[r] as usize;
                let c = self.cluster_of_curve[curve_of_point[p] as usize];
                pack(c, other_of_rank[other_ranks[p] as usize])
            })
            .collect();
        keys.sort_unstable();
        let mut moved: Vec<(u32, u32, u32)> = Vec::new();
        for k in keys {
            let (c, o) = unpack(k);
            match moved.last_mut() {
                Some(last) if last.0 == c && last.1 == o => last.2 += 1,
                _ => moved.push((c, o, 1)),
            }
        }

        let t = self.ev.tables();
        let lf = |v: u64| t.log_factorial(v);
        let (mf, mt) = (st.count[from as usize], st.count[to as usize]);
        let s64 = s as u64;
        let mut delta = lf(mf - s64) + lf(mt + s64) - lf(mf) - lf(mt);
        for &(c, o, n) in &moved {
            let n = n as u64;
            let src = self.get(self.axis_cell(axis, c, from, o));
            let dst = self.get(self.axis_cell(axis, c, to, o));
            delta -= lf(src - n) - lf(src) + lf(dst + n) - lf(dst);
        }
        Some((delta, Shift { axis, from, to, ranks, moved }))
    }

    #[inline]
    fn axis_cell(&self, axis: Axis, cluster: u32, interval: u32, other: u32) -> Cell {
        match axis {
            Axis::X => [cluster, interval, other],
            Axis::Y => [cluster, other, interval],
        }
    }

    pub fn apply_shift(&mut self, shift: Shift, delta: f64) {
        let axis = shift.axis;
        let d = axis.index() + 1;
        for &(c, o, n) in &shift.moved {
            let src = self.axis_cell(axis, c, shift.from, o);
            let dst = self.axis_cell(axis, c, shift.to, o);
            let (a, b) = (self.get(src), self.get(dst));
            self.adjust(src, a - n as u64, Some(d));
            self.adjust(dst, b + n as u64, Some(d));
        }
        let s = shift.ranks.len();
        let st = &mut self.axes[axis.index()];
        st.of_rank[shift.ranks.clone()].fill(shift.to);
        st.count[shift.from as usize] -= s as u64;
        st.count[shift.to as usize] += s as u64;
        let (left, right) = if st.next[shift.from as usize] == shift.to {
            (shift.from, shift.to)
        } else {
            (shift.to, shift.from)
        };
        let cut = if shift.from == left { shift.ranks.start } else { shift.ranks.end };
        st.hi[left as usize] = cut;
        st.lo[right as usize] = cut;
        let prev = st.prev[left as usize];
        let next = st.next[right as usize];
        for l in [prev, left, right] {
            if l != NONE && (l != right || next != NONE) {
                let t = self.fresh_axis_pair(axis, l);
                self.axes[axis.index()].pair_term[l as usize] = t;
            }
        }
        self.criterion += delta;
    }

    // ----- curve moves ---------------------------------------------------

    pub fn cluster_of_curve(&self, curve: usize) -> u32 {
        self.cluster_of_curve[curve]
    }

    pub fn cluster_size(&self, cluster: u32) -> usize {
        self.members[cluster as usize].len()
    }

    /// Cell counts `(x, y, n)` of one curve under the current intervals.
    pub fn curve_cells(&self, curve: usize) -> Vec<(u32, u32, u32)> {
        let xr = self.ds.ranks(Axis::X);
        let yr = self.ds.ranks(Axis::Y);
        let mut keys: Vec<u64> = self
            .ds
            .curve_points(curve)
            .iter()
            .map(|&p| {
                pack(
                    self.axes[0].of_rank[xr[p as usize] as usize],
                    self.axes[1].of_rank[yr[p as usize] as usize],
                )
            })
            .collect();
        keys.sort_unstable();
        let mut out: Vec<(u32, u32, u32)> = Vec::new();
        for k in keys {
            let (x, y) = unpack(k);
            match out.last_mut() {
                Some(last) if last.0 == x && last.1 == y => last.2 += 1,
                _ => out.push((x, y, 1)),
            }
        }
        out
    }

    /// Cost of moving `curve` (with cells from `curve_cells`) to `target`.
    /// The source cluster must keep at least one curve.
    pub fn move_delta(&self, curve: usize, cells: &[(u32, u32, u32)], target: u32) -> f64 {
        let source = self.cluster_of_curve[curve];
        debug_assert!(source != target && self.members[source as usize].len() >= 2);
        let mi = self.ds.curve_sizes()[curve] as u64;
        let (ma, na) = (self.cluster_points[source as usize], self.cluster_curves[source as usize]);
        let (mb, nb) = (self.cluster_points[target as usize], self.cluster_curves[target as usize]);
        let ev = self.ev;
        let mut delta = ev.cluster_term(ma - mi, na - 1) + ev.cluster_term(mb + mi, nb + 1)
            - ev.cluster_term(ma, na)
            - ev.cluster_term(mb, nb);
        let t = ev.tables();
        let lf = |v: u64| t.log_factorial(v);
        let (src_view, dst_view) = (&self.views[0][source as usize], &self.views[0][target as usize]);
        for &(x, y, n) in cells {
            let n = n as u64;
            let key = pack(x, y);
            let a = src_view.get(&key).copied().unwrap_or(0) as u64;
            let b = dst_view.get(&key).copied().unwrap_or(0) as u64;
            delta -= lf(a - n) - lf(a) + lf(b + n) - lf(b);
        }
        delta
    }

    pub fn apply_move(&mut self, curve: usize, cells: &[(u32, u32, u32)], target: u32, delta: f64) {
        let source = self.cluster_of_curve[curve];
        for &(x, y, n) in cells {
            let src = [source, x, y];
            let dst = [target, x, y];
            let (a, b) = (self.get(src), self.get(dst));
            self.adjust(src, a - n as u64, None);
            self.adjust(dst, b + n as u64, None);
        }
        let mi = self.ds.curve_sizes()[curve] as u64;
        let list = &mut self.members[source as usize];
        let pos = list.iter().position(|&c| c as usize == curve).expect("curve not in its cluster");
        list.remove(pos);
        self.members[target as usize].push(curve as u32);
        self.cluster_of_curve[curve] = target;
        self.cluster_points[source as usize] -= mi;
        self.cluster_curves[source as usize] -= 1;
        self.cluster_points[target as usize] += mi;
        self.cluster_curves[target as usize] += 1;
        self.criterion += delta;
    }

    // ----- export ------------------------------------------------------

    /// Canonical index of an alive cluster id.
    pub fn cluster_index(&self, id: u32) -> usize {
        self.clusters.binary_search(&id).expect("dead cluster id")
    }

    /// Canonical index of an alive interval id.
    pub fn interval_index(&self, axis: Axis, id: u32) -> usize {
        self.axes[axis.index()].ids().position(|j| j == id).expect("dead interval id")
    }

    /// Weighted KL divergences of two clusters from their union.
    pub fn cluster_kl(&self, a: u32, b: u32) -> KlDissimilarity {
        let (va, vb) = (&self.views[0][a as usize], &self.views[0][b as usize]);
        let mut pairs: Vec<(u64, u64)> = va
            .iter()
            .map(|(k, &x)| (x as u64, vb.get(k).copied().unwrap_or(0) as u64))
            .collect();
        pairs.extend(vb.iter().filter(|(k, _)| !va.contains_key(k)).map(|(_, &y)| (0, y as u64)));
        kl_from_pairs(&pairs)
    }

    /// The current grid as a canonical model.
    pub fn to_model(&self) -> GridModel {
        let mut canonical = vec![0usize; self.id_space];
        for (i, &c) in self.clusters.iter().enumerate() {
            canonical[c as usize] = i;
        }
        let bounds = |axis: Axis| -> Vec<usize> {
            let st = &self.axes[axis.index()];
            st.ids().skip(1).map(|j| st.lo[j as usize]).collect()
        };
        GridModel {
            cluster_of_curve: self.cluster_of_curve.iter().map(|&c| canonical[c as usize]).collect(),
            k_c: self.clusters.len(),
            x_bounds: bounds(Axis::X),
            y_bounds: bounds(Axis::Y),
        }
    }

    /// Largest disagreement between cached pair sums and fresh recomputation.
    #[cfg(test)]
    pub fn cache_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &a) in self.clusters.iter().enumerate() {
            for &b in &self.clusters[i + 1..] {
                let cached = self.cluster_pair_term[a as usize * self.id_space + b as usize];
                worst = worst.max((cached - self.fresh_cluster_pair(a, b)).abs());
            }
        }
        for axis in Axis::BOTH {
            let st = &self.axes[axis.index()];
            for left in st.ids() {
                if st.next[left as usize] != NONE {
                    worst = worst.max((st.pair_term[left as usize] - self.fresh_axis_pair(axis, left)).abs());
                }
            }
        }
        worst
    }
}
