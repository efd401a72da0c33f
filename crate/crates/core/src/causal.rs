//! Binary-treatment causal forest with local centering.
//!
//! The pipeline: regress out the covariate-predictable parts of outcome and
//! assignment with out-of-bag nuisance forests ([`center`]), grow honest
//! trees on the residuals with the gradient pseudo-outcome split rule
//! ([`fit_causal_forest`]), and read treatment effects from the forest's
//! implicit neighborhood weights ([`CausalForest::predict_ite`]).

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel::map_indices;
use crate::regression::{fit_regression_forest, ForestConfig};
use crate::rng::{mix_seed, SALT_OUTCOME_FOREST, SALT_PROPENSITY_FOREST};
use crate::tree::{grow_tree, importance_from_counts, CausalTask, SplitCounts, Tree};

/// Propensity estimates are clamped to this interval before residualizing.
pub const PROPENSITY_CLAMP: (f64, f64) = (0.01, 0.99);
/// Fraction of clamped units beyond which centering refuses to proceed.
pub const CLAMP_BUDGET: f64 = 0.05;

// ============================================================================
// Local centering
// ============================================================================

/// Residualized training data for one binary treatment comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenteredData {
    pub covariates: Matrix,
    /// y − ŷ(x), outcome centered by its out-of-bag nuisance estimate.
    pub y_resid: Vec<f64>,
    /// w − ê(x), assignment centered by the out-of-bag propensity.
    pub w_resid: Vec<f64>,
    /// Clamped out-of-bag propensities, kept for diagnostics.
    pub e_hat: Vec<f64>,
    pub diagnostics: CenteringDiagnostics,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CenteringDiagnostics {
    /// Units whose propensity landed outside the clamp interval.
    pub clamped_units: usize,
    pub clamped_fraction: f64,
    /// Rows with no out-of-bag tree in the outcome / propensity forest.
    pub oob_fallback_outcome: usize,
    pub oob_fallback_propensity: usize,
    /// Should be near zero on well-specified data; scale-dependent, so it is
    /// reported rather than enforced.
    pub mean_y_resid: f64,
    pub mean_w_resid: f64,
}

/// Residualize a binary-treatment dataset with out-of-bag nuisance forests.
///
/// The outcome forest and propensity forest run on decorrelated seed streams
/// derived from `nuisance.seed`. Errors if more than [`CLAMP_BUDGET`] of the
/// propensities needed clamping — that is an overlap violation, not noise.
pub fn center(ds: &Dataset, nuisance: &ForestConfig) -> Result<CenteredData> {
    if ds.treatment.iter().any(|&t| t > 1) {
        return Err(Error::Precondition(
            "centering expects binary treatment codes (subset or binarize first)".into(),
        ));
    }
    let n_treated = ds.treatment.iter().filter(|&&t| t == 1).count();
    if n_treated == 0 || n_treated == ds.n() {
        return Err(Error::Precondition(
            "centering needs both treated and control units".into(),
        ));
    }

    let y_forest = fit_regression_forest(
        &ds.covariates,
        &ds.outcome,
        &nuisance.with_seed(mix_seed(nuisance.seed, SALT_OUTCOME_FOREST)),
    )?;
    let y_oob = y_forest.predict_oob(&ds.covariates)?;

    let w: Vec<f64> = ds.treatment.iter().map(|&t| f64::from(t)).collect();
    let w_forest = fit_regression_forest(
        &ds.covariates,
        &w,
        &nuisance.with_seed(mix_seed(nuisance.seed, SALT_PROPENSITY_FOREST)),
    )?;
    let w_oob = w_forest.predict_oob(&ds.covariates)?;

    let n = ds.n();
    let mut e_hat = Vec::with_capacity(n);
    let mut clamped_units = 0usize;
    for &raw in &w_oob.values {
        let c = raw.clamp(PROPENSITY_CLAMP.0, PROPENSITY_CLAMP.1);
        if c != raw {
            clamped_units += 1;
        }
        e_hat.push(c);
    }
    let clamped_fraction = clamped_units as f64 / n as f64;
    if clamped_fraction > CLAMP_BUDGET {
        return Err(Error::Overlap(format!(
            "{clamped_units} of {n} units ({:.1}%) lie outside the propensity clamp \
             [{}, {}]; treatment assignment is too predictable from covariates",
            100.0 * clamped_fraction,
            PROPENSITY_CLAMP.0,
            PROPENSITY_CLAMP.1
        )));
    }

    let y_resid: Vec<f64> = ds
        .outcome
        .iter()
        .zip(&y_oob.values)
        .map(|(y, yhat)| y - yhat)
        .collect();
    let w_resid: Vec<f64> = w.iter().zip(&e_hat).map(|(w, e)| w - e).collect();

    let diagnostics = CenteringDiagnostics {
        clamped_units,
        clamped_fraction,
        oob_fallback_outcome: y_oob.fallback_count,
        oob_fallback_propensity: w_oob.fallback_count,
        mean_y_resid: y_resid.iter().sum::<f64>() / n as f64,
        mean_w_resid: w_resid.iter().sum::<f64>() / n as f64,
    };
    Ok(CenteredData {
        covariates: ds.covariates.clone(),
        y_resid,
        w_resid,
        e_hat,
        diagnostics,
    })
}

// ============================================================================
// Causal forest
// ============================================================================

/// Provenance a forest carries so later scoring can check compatibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestMeta {
    pub outcome_kind: OutcomeKind,
    /// Label of the treatment arm this forest compares against control.
    pub arm: String,
}

impl Default for ForestMeta {
    fn default() -> Self {
        ForestMeta {
            outcome_kind: OutcomeKind::Revenue,
            arm: "treatment".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fingerprint {
    pub n_train: usize,
    pub num_covariates: usize,
    pub seed: u64,
    pub outcome_kind: OutcomeKind,
    pub arm: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CausalForest {
    pub(crate) trees: Vec<Tree>,
    pub cfg: ForestConfig,
    pub split_counts: SplitCounts,
    pub fingerprint: Fingerprint,
}

/// Per-unit treatment-effect predictions for one arm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ItePrediction {
    pub arm: String,
    pub tau: Vec<f64>,
    /// Rows whose forest-weight denominator collapsed to zero; they predict 0.
    pub degenerate_count: usize,
}

/// Grow an honest causal forest on centered data.
pub fn fit_causal_forest(
    cd: &CenteredData,
    cfg: &ForestConfig,
    meta: ForestMeta,
) -> Result<CausalForest> {
    let n = cd.covariates.rows();
    if cd.y_resid.len() != n || cd.w_resid.len() != n {
        return Err(Error::Shape(format!(
            "residual vectors ({}, {}) do not match {} covariate rows",
            cd.y_resid.len(),
            cd.w_resid.len(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::Precondition("need at least two training rows".into()));
    }
    cfg.validate(n)?;
    let sum_ww: f64 = cd.w_resid.iter().map(|w| w * w).sum();
    if sum_ww <= 0.0 {
        return Err(Error::Estimation(
            "treatment residuals are identically zero; no variation to learn from".into(),
        ));
    }

    let task = CausalTask {
        y_resid: &cd.y_resid,
        w_resid: &cd.w_resid,
    };
    let grown = map_indices(cfg.num_trees, |t| {
        grow_tree(&cd.covariates, cfg, cfg.tree_seed(t), &task)
    });
    let mut trees = Vec::with_capacity(cfg.num_trees);
    let mut split_counts = SplitCounts::new(cd.covariates.cols());
    for (tree, counts) in grown {
        split_counts.merge(&counts);
        trees.push(tree);
    }
    Ok(CausalForest {
        trees,
        cfg: cfg.clone(),
        split_counts,
        fingerprint: Fingerprint {
            n_train: n,
            num_covariates: cd.covariates.cols(),
            seed: cfg.seed,
            outcome_kind: meta.outcome_kind,
            arm: meta.arm,
        },
    })
}

impl CausalForest {
    /// Treatment-effect estimate per row of `x`.
    ///
    /// Each tree contributes its honest leaf's moment sums scaled by leaf
    /// size, which is exactly the forest-weight estimator
    /// τ̂(x) = Σᵢ αᵢ(x) w̃ᵢ ỹᵢ / Σᵢ αᵢ(x) w̃ᵢ².
    pub fn predict_ite(&self, x: &Matrix) -> Result<ItePrediction> {
        if x.cols() != self.fingerprint.num_covariates {
            return Err(Error::Shape(format!(
                "forest was trained on {} covariates, got {}",
                self.fingerprint.num_covariates,
                x.cols()
            )));
        }
        let per_row: Vec<(f64, bool)> = map_indices(x.rows(), |i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for tree in &self.trees {
                let (count, sum_wy, sum_ww) = tree.leaf_for(x, i);
                let c = count as f64;
                num += sum_wy / c;
                den += sum_ww / c;
            }
            if den > 0.0 {
                (num / den, false)
            } else {
                (0.0, true)
            }
        });
        let degenerate_count = per_row.iter().filter(|(_, d)| *d).count();
        Ok(ItePrediction {
            arm: self.fingerprint.arm.clone(),
            tau: per_row.into_iter().map(|(v, _)| v).collect(),
            degenerate_count,
        })
    }

    /// Depth-decayed share of splits per variable; sums to 1 when the forest
    /// split at all. See `tree::importance_from_counts` for the weighting.
    pub fn variable_importance(&self) -> Vec<f64> {
        importance_from_counts(&self.split_counts)
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }
}
