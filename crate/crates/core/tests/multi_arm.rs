//! Multi-treatment orchestration: per-arm decomposition on the bundled demo
//! campaign, scheme equivalence on a single arm, and recommendation
//! invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use uplift_forest::data::hillstrom::{load_campaign_csv, write_demo_campaign_csv};
use uplift_forest::data::OutcomeKind;
use uplift_forest::multi::{
    fit_multi, predict_all, recommend_treatment, MultiTrainConfig, Scheme,
};
use uplift_forest::regression::ForestConfig;
use uplift_forest::synthetic::{generate, Baseline, EffectSpec, SyntheticSpec};
use uplift_forest::Error;

fn tiny_cfg(seed: u64) -> MultiTrainConfig {
    MultiTrainConfig {
        causal: ForestConfig {
            num_trees: 4,
            max_depth: Some(3),
            min_node_size: 50,
            seed,
            ..ForestConfig::default()
        },
        nuisance: ForestConfig {
            num_trees: 4,
            max_depth: Some(3),
            min_node_size: 50,
            seed,
            ..ForestConfig::default()
        },
    }
}

#[test]
fn demo_campaign_decomposes_into_per_arm_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("campaign.csv");
    write_demo_campaign_csv(&path, 0).unwrap();
    let (ds, warnings) = load_campaign_csv(&path, OutcomeKind::Revenue).unwrap();
    assert!(warnings.is_empty());

    let model = fit_multi(&ds, Scheme::TreatmentComparison, OutcomeKind::Revenue, &tiny_cfg(5))
        .unwrap();
    assert_eq!(model.control_name, "No E-Mail");
    assert_eq!(model.covariate_names.len(), 18);
    assert_eq!(model.arms.len(), 2);

    // control units appear in both comparisons, each arm only in its own
    assert_eq!(model.arms[0].arm_code, 1);
    assert_eq!(model.arms[0].arm_name, "Mens E-Mail");
    assert_eq!(model.arms[0].n_train, 21_306 + 21_307);
    assert_eq!(model.arms[1].arm_code, 2);
    assert_eq!(model.arms[1].arm_name, "Womens E-Mail");
    assert_eq!(model.arms[1].n_train, 21_306 + 21_387);

    let head = ds.covariates.select_rows(&(0..100).collect::<Vec<_>>());
    let preds = predict_all(&model, &head).unwrap();
    assert_eq!(preds.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
    for p in preds.values() {
        assert_eq!(p.tau.len(), 100);
        assert!(p.tau.iter().all(|t| t.is_finite()));
    }

    let scores: BTreeMap<u32, Vec<f64>> =
        preds.into_iter().map(|(k, v)| (k, v.tau)).collect();
    let rec = recommend_treatment(&scores).unwrap();
    assert_eq!(rec.len(), 100);
    assert!(rec.iter().all(|&r| r <= 2));
}

#[test]
fn single_arm_comparison_and_combined_schemes_coincide() {
    let spec = SyntheticSpec {
        n: 600,
        p: 4,
        arm_probs: vec![0.5, 0.5],
        baseline: Baseline::Linear {
            coefficients: vec![1.0, 0.0, 0.0, 0.0],
        },
        effects: vec![EffectSpec::Constant { value: 1.0 }],
        noise_sd: 0.5,
        purchase_sparsity: 0.0,
        seed: 41,
    };
    let ds = generate(&spec).unwrap().dataset;

    let cfg = MultiTrainConfig {
        causal: ForestConfig {
            num_trees: 20,
            seed: 42,
            ..ForestConfig::default()
        },
        nuisance: ForestConfig {
            num_trees: 30,
            seed: 43,
            ..ForestConfig::default()
        },
    };
    let per_arm = fit_multi(&ds, Scheme::TreatmentComparison, OutcomeKind::Revenue, &cfg).unwrap();
    let combined = fit_multi(&ds, Scheme::CombinedTreatment, OutcomeKind::Revenue, &cfg).unwrap();

    // with one treatment arm the two schemes see identical training data and
    // must produce identical models, arm naming included
    assert_eq!(per_arm.arms.len(), 1);
    assert_eq!(combined.arms.len(), 1);
    assert_eq!(
        serde_json::to_string(&per_arm.arms[0]).unwrap(),
        serde_json::to_string(&combined.arms[0]).unwrap()
    );
}

#[test]
fn outcome_mode_must_match_the_dataset() {
    let spec = SyntheticSpec {
        n: 100,
        p: 2,
        arm_probs: vec![0.5, 0.5],
        baseline: Baseline::Zero,
        effects: vec![EffectSpec::Constant { value: 1.0 }],
        noise_sd: 1.0,
        purchase_sparsity: 0.0,
        seed: 44,
    };
    let ds = generate(&spec).unwrap().dataset;
    assert!(matches!(
        fit_multi(&ds, Scheme::TreatmentComparison, OutcomeKind::Conversion, &tiny_cfg(1)),
        Err(Error::Precondition(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Scaling every arm's scores by the same positive power of two (exact in
    /// floating point) must not change any recommendation.
    #[test]
    fn recommendations_are_scale_invariant(
        raw in prop::collection::vec(prop::collection::vec(-64i32..=64, 1..=12), 1..=3),
        scale_exp in -2i32..=6,
    ) {
        let n = raw.iter().map(Vec::len).min().unwrap();
        let scale = (2.0f64).powi(scale_exp);
        let mut base = BTreeMap::new();
        let mut scaled = BTreeMap::new();
        for (k, arm) in raw.iter().enumerate() {
            let tau: Vec<f64> = arm[..n].iter().map(|&v| v as f64 / 4.0).collect();
            scaled.insert(k as u32 + 1, tau.iter().map(|t| t * scale).collect::<Vec<_>>());
            base.insert(k as u32 + 1, tau);
        }
        prop_assert_eq!(
            recommend_treatment(&base).unwrap(),
            recommend_treatment(&scaled).unwrap()
        );
    }

    /// Relabeling arms monotonically preserves which unit gets which score
    /// vector, so recommendations map through the relabeling.
    #[test]
    fn recommendations_follow_arm_relabeling(
        raw in prop::collection::vec(prop::collection::vec(-64i32..=64, 4), 2..=3),
        offset in 1u32..=5,
    ) {
        let mut base = BTreeMap::new();
        let mut shifted = BTreeMap::new();
        for (k, arm) in raw.iter().enumerate() {
            let tau: Vec<f64> = arm.iter().map(|&v| v as f64 / 4.0).collect();
            base.insert(k as u32 + 1, tau.clone());
            shifted.insert(k as u32 + offset, tau);
        }
        let a = recommend_treatment(&base).unwrap();
        let b = recommend_treatment(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            // control stays control; picked arms shift by the offset
            if *x == 0 {
                prop_assert_eq!(*y, 0);
            } else {
                prop_assert_eq!(*y, x + offset - 1);
            }
        }
    }
}
