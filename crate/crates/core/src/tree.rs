//! Shared tree-growing engine.
//!
//! Regression and causal forests differ only in the per-unit scores fed to
//! the split criterion and in what a leaf stores; both are expressed through
//! [`TreeTask`] and share one split search. The criterion maximizes
//! `sum_children (sum of scores)^2 / child size`, which for raw outcomes is
//! algebraically the variance-reduction split and for gradient pseudo-scores
//! is the heterogeneity split.
//!
//! Honesty: each tree draws a subsample without replacement and halves it
//! into a split half (chooses the structure) and an honest half (fills the
//! leaves). `min_node_size` constrains the honest half, enforced during the
//! sweep, so every leaf is populated. All index sets are kept sorted
//! ascending so accumulation order — and therefore every float — is
//! reproducible.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::regression::ForestConfig;
use crate::rng::{mix_seed, stream_rng};

/// Depth levels that participate in variable importance (split at root = 1).
pub const IMPORTANCE_DEPTH: usize = 4;

/// Relative tolerance on split gain: a split must beat the parent criterion
/// by more than this times max(1, |parent|), which silences float noise on
/// effectively constant scores.
const GAIN_EPS: f64 = 1e-10;

// ============================================================================
// Nodes and trees
// ============================================================================

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Honest-half aggregates. Regression: `sum_a` = Σy (sum_b unused).
    /// Causal: `sum_a` = Σ w̃ỹ, `sum_b` = Σ w̃².
    Leaf { count: u32, sum_a: f64, sum_b: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct Tree {
    pub nodes: Vec<Node>,
    /// Bitset over training rows: 1 = row was in this tree's subsample.
    pub in_bag: Vec<u64>,
    pub n_rows: u32,
}

impl Tree {
    pub fn is_in_bag(&self, row: usize) -> bool {
        self.in_bag[row / 64] >> (row % 64) & 1 == 1
    }

    /// Index of the leaf a covariate row routes to (x ≤ threshold goes left).
    pub fn leaf_index(&self, x: &Matrix, row: usize) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(row, *feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { .. } => return at,
            }
        }
    }

    pub fn leaf_for(&self, x: &Matrix, row: usize) -> (u32, f64, f64) {
        match &self.nodes[self.leaf_index(x, row)] {
            Node::Leaf { count, sum_a, sum_b } => (*count, *sum_a, *sum_b),
            Node::Split { .. } => unreachable!("leaf_index returned a split node"),
        }
    }
}

/// Per-variable split tallies: the first four depth levels separately (for
/// importance) plus an all-depths total (for structural sanity checks).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SplitCounts {
    pub num_vars: usize,
    /// Var-major: `by_depth[v * IMPORTANCE_DEPTH + d]`, d zero-based.
    pub by_depth: Vec<u64>,
    pub totals: Vec<u64>,
}

impl SplitCounts {
    pub fn new(num_vars: usize) -> Self {
        SplitCounts {
            num_vars,
            by_depth: vec![0; num_vars * IMPORTANCE_DEPTH],
            totals: vec![0; num_vars],
        }
    }

    fn tally(&mut self, var: usize, depth: usize) {
        self.totals[var] += 1;
        if depth < IMPORTANCE_DEPTH {
            self.by_depth[var * IMPORTANCE_DEPTH + depth] += 1;
        }
    }

    pub fn merge(&mut self, other: &SplitCounts) {
        debug_assert_eq!(self.num_vars, other.num_vars);
        for (a, b) in self.by_depth.iter_mut().zip(&other.by_depth) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
    }

    pub fn at(&self, var: usize, depth: usize) -> u64 {
        self.by_depth[var * IMPORTANCE_DEPTH + depth]
    }

    /// Splits at a given depth summed over variables.
    pub fn depth_total(&self, depth: usize) -> u64 {
        (0..self.num_vars).map(|v| self.at(v, depth)).sum()
    }
}

// ============================================================================
// Growth task abstraction
// ============================================================================

/// What distinguishes one forest flavor from another.
pub(crate) trait TreeTask: Sync {
    /// Fill `out` with one criterion score per unit in `units` (same order).
    /// Returning `false` forces a leaf (degenerate node).
    fn scores(&self, units: &[u32], out: &mut Vec<f64>) -> bool;

    /// Honest-half aggregates stored in a leaf.
    fn leaf_stats(&self, honest: &[u32]) -> (u32, f64, f64);
}

/// Regression: scores are the raw outcomes, leaves store Σy.
pub(crate) struct RegressionTask<'a> {
    pub y: &'a [f64],
}

impl TreeTask for RegressionTask<'_> {
    fn scores(&self, units: &[u32], out: &mut Vec<f64>) -> bool {
        out.clear();
        out.extend(units.iter().map(|&u| self.y[u as usize]));
        true
    }

    fn leaf_stats(&self, honest: &[u32]) -> (u32, f64, f64) {
        let sum: f64 = honest.iter().map(|&u| self.y[u as usize]).sum();
        (honest.len() as u32, sum, 0.0)
    }
}

/// Causal: scores are gradient pseudo-outcomes around the node's local
/// effect estimate; leaves store the moment sums the forest predictor needs.
pub(crate) struct CausalTask<'a> {
    pub y_resid: &'a [f64],
    pub w_resid: &'a [f64],
}

impl TreeTask for CausalTask<'_> {
    fn scores(&self, units: &[u32], out: &mut Vec<f64>) -> bool {
        let mut sum_wy = 0.0;
        let mut sum_ww = 0.0;
        for &u in units {
            let w = self.w_resid[u as usize];
            sum_wy += w * self.y_resid[u as usize];
            sum_ww += w * w;
        }
        if sum_ww <= 0.0 {
            return false; // no treatment variation left in this node
        }
        let tau = sum_wy / sum_ww;
        let mean_ww = sum_ww / units.len() as f64;
        out.clear();
        out.extend(units.iter().map(|&u| {
            let w = self.w_resid[u as usize];
            w * (self.y_resid[u as usize] - w * tau) / mean_ww
        }));
        true
    }

    fn leaf_stats(&self, honest: &[u32]) -> (u32, f64, f64) {
        let mut sum_wy = 0.0;
        let mut sum_ww = 0.0;
        for &u in honest {
            let w = self.w_resid[u as usize];
            sum_wy += w * self.y_resid[u as usize];
            sum_ww += w * w;
        }
        (honest.len() as u32, sum_wy, sum_ww)
    }
}

// ============================================================================
// Subsampling
// ============================================================================

pub(crate) struct SampleSets {
    pub split: Vec<u32>,
    pub honest: Vec<u32>,
}

/// Draw the tree's subsample and divide it into split/honest halves.
/// Both halves come back sorted ascending.
pub(crate) fn tree_samples(n: usize, cfg: &ForestConfig, tree_seed: u64) -> SampleSets {
    let mut rng = stream_rng(tree_seed, 0x53414D50);
    let target = (cfg.subsample_fraction * n as f64).round() as usize;
    let s = target.clamp(2.min(n), n);
    let mut subsample: Vec<u32> = sample(&mut rng, n, s).iter().map(|i| i as u32).collect();
    subsample.sort_unstable();

    if !cfg.honesty {
        return SampleSets {
            split: subsample.clone(),
            honest: subsample,
        };
    }
    let h = ((cfg.honesty_fraction * s as f64).round() as usize).clamp(1, s - 1);
    let mut is_honest = vec![false; s];
    for pos in sample(&mut rng, s, h) {
        is_honest[pos] = true;
    }
    let mut split = Vec::with_capacity(s - h);
    let mut honest = Vec::with_capacity(h);
    for (pos, &unit) in subsample.iter().enumerate() {
        if is_honest[pos] {
            honest.push(unit);
        } else {
            split.push(unit);
        }
    }
    SampleSets { split, honest }
}

// ============================================================================
// Growth
// ============================================================================

struct Scratch {
    pairs: Vec<(f64, f64)>, // (covariate value, score) over split units
    honest_vals: Vec<f64>,
    scores: Vec<f64>,
}

struct Grower<'a, T: TreeTask> {
    x: &'a Matrix,
    cfg: &'a ForestConfig,
    task: &'a T,
    tree_seed: u64,
    mtry: usize,
    nodes: Vec<Node>,
    counts: SplitCounts,
    scratch: Scratch,
}

/// Grow one tree over `x`'s rows. Returns the tree plus its split tallies.
pub(crate) fn grow_tree<T: TreeTask>(
    x: &Matrix,
    cfg: &ForestConfig,
    tree_seed: u64,
    task: &T,
) -> (Tree, SplitCounts) {
    let n = x.rows();
    let samples = tree_samples(n, cfg, tree_seed);
    let mut in_bag = vec![0u64; n.div_ceil(64)];
    for &u in samples.split.iter().chain(&samples.honest) {
        in_bag[u as usize / 64] |= 1 << (u % 64);
    }

    let mut grower = Grower {
        x,
        cfg,
        task,
        tree_seed,
        mtry: cfg.mtry_for(x.cols()),
        nodes: Vec::new(),
        counts: SplitCounts::new(x.cols()),
        scratch: Scratch {
            pairs: Vec::new(),
            honest_vals: Vec::new(),
            scores: Vec::new(),
        },
    };
    grower.grow(samples.split, samples.honest, 0);
    (
        Tree {
            nodes: grower.nodes,
            in_bag,
            n_rows: n as u32,
        },
        grower.counts,
    )
}

impl<T: TreeTask> Grower<'_, T> {
    fn grow(&mut self, split_units: Vec<u32>, honest_units: Vec<u32>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            count: 0,
            sum_a: 0.0,
            sum_b: 0.0,
        });

        if let Some((feature, threshold)) = self.try_split(&split_units, &honest_units, depth, id) {
            self.counts.tally(feature as usize, depth);
            let col = self.x.col(feature as usize);
            let part = |units: &[u32]| -> (Vec<u32>, Vec<u32>) {
                units
                    .iter()
                    .copied()
                    .partition(|&u| col[u as usize] <= threshold)
            };
            let (sl, sr) = part(&split_units);
            let (hl, hr) = part(&honest_units);
            drop(split_units);
            drop(honest_units);
            let left = self.grow(sl, hl, depth + 1);
            let right = self.grow(sr, hr, depth + 1);
            self.nodes[id as usize] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        } else {
            let (count, sum_a, sum_b) = self.task.leaf_stats(&honest_units);
            self.nodes[id as usize] = Node::Leaf { count, sum_a, sum_b };
        }
        id
    }

    /// Best (feature, threshold) for this node, or None to leaf it.
    fn try_split(
        &mut self,
        split_units: &[u32],
        honest_units: &[u32],
        depth: usize,
        node_id: u32,
    ) -> Option<(u32, f64)> {
        let cfg = self.cfg;
        if let Some(md) = cfg.max_depth {
            if depth >= md {
                return None;
            }
        }
        let m = split_units.len();
        let h_total = honest_units.len();
        if m < 2 || h_total < 2 * cfg.min_node_size {
            return None;
        }
        // take scores out of scratch to satisfy borrows; returned below
        let mut scores = std::mem::take(&mut self.scratch.scores);
        let ok = self.task.scores(split_units, &mut scores);
        if !ok {
            self.scratch.scores = scores;
            return None;
        }

        let total: f64 = scores.iter().sum();
        let parent_crit = total * total / m as f64;
        let min_gain = GAIN_EPS * parent_crit.abs().max(1.0);

        // candidate variables for this node, ascending so ties resolve to the
        // lowest variable index
        let mut rng = stream_rng(mix_seed(self.tree_seed, 0x4E4F4445), node_id as u64);
        let mut candidates: Vec<usize> = sample(&mut rng, self.x.cols(), self.mtry).into_vec();
        candidates.sort_unstable();

        let mut best: Option<(f64, u32, f64)> = None;
        for v in candidates {
            let col = self.x.col(v);
            let pairs = &mut self.scratch.pairs;
            pairs.clear();
            pairs.extend(
                split_units
                    .iter()
                    .zip(scores.iter())
                    .map(|(&u, &s)| (col[u as usize], s)),
            );
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let hvals = &mut self.scratch.honest_vals;
            hvals.clear();
            hvals.extend(honest_units.iter().map(|&u| col[u as usize]));
            hvals.sort_unstable_by(f64::total_cmp);

            let mut acc = 0.0;
            let mut hp = 0usize;
            for j in 0..m - 1 {
                acc += pairs[j].1;
                let a = pairs[j].0;
                let b = pairs[j + 1].0;
                if a == b {
                    continue;
                }
                let mid = a + (b - a) * 0.5;
                let thr = if mid < b { mid } else { a };
                while hp < h_total && hvals[hp] <= thr {
                    hp += 1;
                }
                if hp < cfg.min_node_size || h_total - hp < cfg.min_node_size {
                    continue;
                }
                let nl = (j + 1) as f64;
                let nr = (m - j - 1) as f64;
                let rest = total - acc;
                let crit = acc * acc / nl + rest * rest / nr;
                if crit > best.map_or(parent_crit + min_gain, |(c, _, _)| c) {
                    best = Some((crit, v as u32, thr));
                }
            }
        }
        self.scratch.scores = scores;
        best.map(|(_, v, t)| (v, t))
    }
}

// ============================================================================
// Forest-level helpers
// ============================================================================

/// Variable importance from split tallies: depth-decayed share of splits,
/// weight 1/d² for depth d ∈ 1..=4, normalized to sum 1 (all zeros when the
/// forest never split).
pub(crate) fn importance_from_counts(counts: &SplitCounts) -> Vec<f64> {
    let p = counts.num_vars;
    let mut raw = vec![0.0; p];
    for d in 0..IMPORTANCE_DEPTH {
        let total = counts.depth_total(d);
        if total == 0 {
            continue;
        }
        let weight = 1.0 / ((d + 1) * (d + 1)) as f64;
        for (v, r) in raw.iter_mut().enumerate() {
            *r += weight * counts.at(v, d) as f64 / total as f64;
        }
    }
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 {
        for r in &mut raw {
            *r /= sum;
        }
    }
    raw
}
