//! Honest regression forests.
//!
//! These are the nuisance learners behind local centering: one forest fits
//! the conditional outcome surface, another the treatment propensity (a
//! regression on the 0/1 assignment, so predictions are probabilities).
//! Out-of-bag prediction gives the leave-self-out estimates centering needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel::map_indices;
use crate::rng::mix_seed;
use crate::tree::{grow_tree, RegressionTask, SplitCounts, Tree};

// ============================================================================
// Configuration
// ============================================================================

/// Hyperparameters shared by every forest flavor in this crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Share of training rows drawn (without replacement) per tree.
    pub subsample_fraction: f64,
    /// Grow structure on one half of the subsample, fill leaves with the other.
    pub honesty: bool,
    /// Share of the subsample reserved for the honest (leaf-filling) half.
    pub honesty_fraction: f64,
    /// Minimum honest units required in each child of a split.
    pub min_node_size: usize,
    /// Candidate variables per node; `None` = ceil(sqrt(p)).
    pub mtry: Option<usize>,
    /// Maximum split depth; `None` = unlimited, `Some(0)` = root-only leaves.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 500,
            subsample_fraction: 0.5,
            honesty: true,
            honesty_fraction: 0.5,
            min_node_size: 5,
            mtry: None,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    /// Defaults sized for the final effect forest rather than nuisance work.
    pub fn causal_default() -> Self {
        ForestConfig {
            num_trees: 1500,
            ..ForestConfig::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ForestConfig { seed, ..self.clone() }
    }

    /// Candidate count for `p` covariates.
    pub(crate) fn mtry_for(&self, p: usize) -> usize {
        match self.mtry {
            Some(m) => m.min(p).max(1),
            None => (p as f64).sqrt().ceil() as usize,
        }
    }

    /// Check settings against a concrete training size.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Config("num_trees must be at least 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "subsample_fraction {} outside (0, 1]",
                self.subsample_fraction
            )));
        }
        if self.honesty && !(self.honesty_fraction > 0.0 && self.honesty_fraction < 1.0) {
            return Err(Error::Config(format!(
                "honesty_fraction {} outside (0, 1)",
                self.honesty_fraction
            )));
        }
        if self.min_node_size == 0 {
            return Err(Error::Config("min_node_size must be at least 1".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::Config("mtry must be at least 1".into()));
        }
        let honest_share = if self.honesty { self.honesty_fraction } else { 1.0 };
        let expected_honest = self.subsample_fraction * honest_share * n as f64;
        if expected_honest < self.min_node_size as f64 {
            return Err(Error::Config(format!(
                "min_node_size {} exceeds the expected honest sample (~{:.1} units) — \
                 lower it or raise the subsample/honesty fractions",
                self.min_node_size, expected_honest
            )));
        }
        Ok(())
    }

    /// Seed for tree `t` of a forest rooted at this config's seed.
    pub(crate) fn tree_seed(&self, t: usize) -> u64 {
        mix_seed(self.seed, t as u64)
    }
}

// ============================================================================
// Forest
// ============================================================================

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionForest {
    pub(crate) trees: Vec<Tree>,
    pub cfg: ForestConfig,
    pub n_train: usize,
    pub num_covariates: usize,
    pub split_counts: SplitCounts,
}

/// Out-of-bag predictions for the training rows.
#[derive(Clone, Debug)]
pub struct OobPrediction {
    pub values: Vec<f64>,
    /// Rows that were in-bag in every tree and fell back to the full-forest
    /// prediction. A handful is harmless; a large share means too few trees.
    pub fallback_count: usize,
}

/// Fit a forest of honest regression trees on (x, y).
pub fn fit_regression_forest(
    x: &Matrix,
    y: &[f64],
    cfg: &ForestConfig,
) -> Result<RegressionForest> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{} outcomes for {} covariate rows",
            y.len(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::Precondition(
            "need at least two training rows".into(),
        ));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Dataset(format!("non-finite outcome at row {i}")));
    }
    cfg.validate(n)?;

    let task = RegressionTask { y };
    let grown = map_indices(cfg.num_trees, |t| grow_tree(x, cfg, cfg.tree_seed(t), &task));
    let mut trees = Vec::with_capacity(cfg.num_trees);
    let mut split_counts = SplitCounts::new(x.cols());
    for (tree, counts) in grown {
        split_counts.merge(&counts);
        trees.push(tree);
    }
    Ok(RegressionForest {
        trees,
        cfg: cfg.clone(),
        n_train: n,
        num_covariates: x.cols(),
        split_counts,
    })
}

impl RegressionForest {
    fn check_cols(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.num_covariates {
            return Err(Error::Shape(format!(
                "forest was trained on {} covariates, got {}",
                self.num_covariates,
                x.cols()
            )));
        }
        Ok(())
    }

    fn predict_row(&self, x: &Matrix, row: usize) -> f64 {
        let mut acc = 0.0;
        for tree in &self.trees {
            let (count, sum, _) = tree.leaf_for(x, row);
            acc += sum / count as f64;
        }
        acc / self.trees.len() as f64
    }

    /// Mean honest-leaf prediction across trees for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_cols(x)?;
        Ok(map_indices(x.rows(), |i| self.predict_row(x, i)))
    }

    /// Out-of-bag prediction over the training matrix: each row is averaged
    /// only over trees whose subsample excluded it.
    pub fn predict_oob(&self, x_train: &Matrix) -> Result<OobPrediction> {
        self.check_cols(x_train)?;
        if x_train.rows() != self.n_train {
            return Err(Error::Precondition(format!(
                "out-of-bag prediction needs the training matrix ({} rows, got {})",
                self.n_train,
                x_train.rows()
            )));
        }
        let per_row: Vec<(f64, bool)> = map_indices(x_train.rows(), |i| {
            let mut acc = 0.0;
            let mut used = 0usize;
            for tree in &self.trees {
                if tree.is_in_bag(i) {
                    continue;
                }
                let (count, sum, _) = tree.leaf_for(x_train, i);
                acc += sum / count as f64;
                used += 1;
            }
            if used == 0 {
                (self.predict_row(x_train, i), true)
            } else {
                (acc / used as f64, false)
            }
        });
        let fallback_count = per_row.iter().filter(|(_, fb)| *fb).count();
        if fallback_count > 0 {
            log::warn!(
                "{fallback_count} of {} rows were in-bag in every tree; \
                 their out-of-bag values fall back to full-forest predictions",
                self.n_train
            );
        }
        Ok(OobPrediction {
            values: per_row.into_iter().map(|(v, _)| v).collect(),
            fallback_count,
        })
    }

    /// Total splits per variable across all trees and depths.
    pub fn split_totals(&self) -> &[u64] {
        &self.split_counts.totals
    }
}
