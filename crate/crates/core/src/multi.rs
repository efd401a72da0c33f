//! Multiple-treatment orchestration.
//!
//! Two schemes reduce a K-arm campaign to binary causal forests:
//!
//! * `TreatmentComparison` — one forest per arm, each trained on that arm's
//!   units plus the shared control group. Effects stay arm-specific.
//! * `CombinedTreatment` — all arms collapsed into one pseudo-treatment and
//!   a single forest; cheaper, but differences between arms are lost.
//!
//! Each arm trains on its own seed stream derived from (seed, arm code), so
//! adding or removing an arm never perturbs the others, and with K = 1 the
//! two schemes coincide exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::causal::{center, fit_causal_forest, CausalForest, CenteringDiagnostics, ForestMeta, ItePrediction};
use crate::data::{binarize_treatments, subset_by_arm, Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::regression::ForestConfig;
use crate::rng::{mix_seed, SALT_ARM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    TreatmentComparison,
    CombinedTreatment,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::TreatmentComparison => write!(f, "treatment_comparison"),
            Scheme::CombinedTreatment => write!(f, "combined_treatment"),
        }
    }
}

/// Forest settings for the two stages of each arm's pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MultiTrainConfig {
    pub causal: ForestConfig,
    pub nuisance: ForestConfig,
}

impl MultiTrainConfig {
    pub fn evaluation_default() -> Self {
        MultiTrainConfig {
            causal: ForestConfig::causal_default(),
            nuisance: ForestConfig::default(),
        }
    }
}

/// One arm's trained forest plus its centering diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmModel {
    pub arm_code: u32,
    pub arm_name: String,
    pub n_train: usize,
    pub forest: CausalForest,
    pub centering: CenteringDiagnostics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiForestModel {
    pub scheme: Scheme,
    pub outcome_kind: OutcomeKind,
    pub covariate_names: Vec<String>,
    pub control_name: String,
    /// Ascending by arm code. Under `CombinedTreatment` there is exactly one
    /// entry, coded 1.
    pub arms: Vec<ArmModel>,
}

/// Fit the per-arm (or combined) causal forests for a K-arm dataset.
///
/// `mode` must match the dataset's outcome kind — passing a revenue-fitted
/// dataset to a conversion run is a wiring bug worth failing loudly on.
pub fn fit_multi(
    ds: &Dataset,
    scheme: Scheme,
    mode: OutcomeKind,
    cfg: &MultiTrainConfig,
) -> Result<MultiForestModel> {
    if mode != ds.outcome_kind {
        return Err(Error::Precondition(format!(
            "requested {mode} mode on a dataset loaded as {}",
            ds.outcome_kind
        )));
    }
    let codes = ds.arm_codes();
    if codes.is_empty() {
        return Err(Error::Precondition("dataset has no treatment arms".into()));
    }

    let mut arms = Vec::new();
    match scheme {
        Scheme::TreatmentComparison => {
            for arm in codes {
                let sub = subset_by_arm(ds, arm)?;
                arms.push(fit_arm(&sub, arm, mode, cfg)?);
            }
        }
        Scheme::CombinedTreatment => {
            let bin = binarize_treatments(ds)?;
            arms.push(fit_arm(&bin, 1, mode, cfg)?);
        }
    }
    Ok(MultiForestModel {
        scheme,
        outcome_kind: mode,
        covariate_names: ds.covariate_names.clone(),
        control_name: ds.arm_names[&0].clone(),
        arms,
    })
}

/// Train one binary comparison on its own (seed, arm) stream.
fn fit_arm(sub: &Dataset, arm: u32, mode: OutcomeKind, cfg: &MultiTrainConfig) -> Result<ArmModel> {
    let arm_name = sub.arm_names[&1].clone();
    let nuisance_seed = mix_seed(mix_seed(cfg.nuisance.seed, SALT_ARM), u64::from(arm));
    let causal_seed = mix_seed(mix_seed(cfg.causal.seed, SALT_ARM), u64::from(arm));
    let cd = center(sub, &cfg.nuisance.with_seed(nuisance_seed)).map_err(|e| match e {
        Error::Overlap(msg) => Error::Overlap(format!("arm {arm_name}: {msg}")),
        other => other,
    })?;
    let forest = fit_causal_forest(
        &cd,
        &cfg.causal.with_seed(causal_seed),
        ForestMeta {
            outcome_kind: mode,
            arm: arm_name.clone(),
        },
    )?;
    Ok(ArmModel {
        arm_code: arm,
        arm_name,
        n_train: sub.n(),
        forest,
        centering: cd.diagnostics.clone(),
    })
}

/// Predict every arm's treatment effect for each row of `x`.
/// Keys are original arm codes (or 1 for the combined pseudo-arm).
pub fn predict_all(
    model: &MultiForestModel,
    x: &Matrix,
) -> Result<BTreeMap<u32, ItePrediction>> {
    let mut out = BTreeMap::new();
    for arm in &model.arms {
        out.insert(arm.arm_code, arm.forest.predict_ite(x)?);
    }
    Ok(out)
}

/// Per-unit policy: the arm with the largest predicted effect, if that effect
/// is strictly positive; control (0) otherwise. Ties go to the lowest code.
pub fn recommend_treatment(ites: &BTreeMap<u32, Vec<f64>>) -> Result<Vec<u32>> {
    if ites.is_empty() {
        return Err(Error::Precondition("no arms to recommend from".into()));
    }
    let n = ites.values().next().unwrap().len();
    for (code, tau) in ites {
        if tau.len() != n {
            return Err(Error::Shape(format!(
                "arm {code} has {} predictions, expected {n}",
                tau.len()
            )));
        }
        if let Some(i) = tau.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "arm {code} prediction {i} is not finite"
            )));
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut best_arm = 0u32;
        let mut best_tau = 0.0f64;
        for (&code, tau) in ites {
            if tau[i] > best_tau {
                best_tau = tau[i];
                best_arm = code;
            }
        }
        out.push(best_arm);
    }
    Ok(out)
}
