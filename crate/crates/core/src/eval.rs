//! Campaign evaluation: decile boards, incremental cumulative revenue, and
//! the end-to-end experiment runner.
//!
//! The board layout mirrors campaign-analytics practice: score the test set,
//! sort descending by predicted effect, cut into ten deciles, and compare
//! treated vs control purchasing inside each. `delta_sum` scales the
//! per-person delta by decile size, so cumulating it over deciles yields the
//! incremental revenue a campaign targeting the top k deciles would have
//! produced (ICR curve). Revenue-mode and conversion-mode targeting are
//! compared by the percentage difference of their median ICR levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::causal::CenteringDiagnostics;
use crate::data::{
    binarize_treatments, partition_indices, subset_by_arm, Dataset, OutcomeKind, PartitionScheme,
};
use crate::error::{Error, Result};
use crate::multi::{fit_multi, MultiTrainConfig, Scheme};

pub const NUM_DECILES: usize = 10;
const HISTOGRAM_BINS: usize = 40;

// ============================================================================
// Evaluation boards
// ============================================================================

/// One decile's treated-vs-control comparison. Per-person fields are `None`
/// when a side has no units (`valid` is false); such rows serialize as null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    /// 1 (highest predicted effect) through 10.
    pub decile: u8,
    pub records_t: u32,
    pub records_c: u32,
    pub purchasers_t: u32,
    pub purchasers_c: u32,
    pub outcome_sum_t: f64,
    pub outcome_sum_c: f64,
    pub per_person_t: Option<f64>,
    pub per_person_c: Option<f64>,
    /// per_person_t − per_person_c, full precision.
    pub delta_per_person: Option<f64>,
    /// delta_per_person × (records_t + records_c): the decile's incremental
    /// contribution in outcome units.
    pub delta_sum: Option<f64>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBoard {
    pub deciles: Vec<DecileRow>,
    pub test_size: u32,
}

/// Build the decile board for one scored test set.
///
/// Units sort by descending `tau_hat`, ties broken by ascending unit id so
/// the shuffle order of the input cannot leak into the result. Decile sizes
/// follow the largest-remainder rule.
pub fn build_board(
    tau_hat: &[f64],
    outcome: &[f64],
    treated: &[bool],
    unit_ids: &[u64],
) -> Result<EvaluationBoard> {
    let m = tau_hat.len();
    if outcome.len() != m || treated.len() != m || unit_ids.len() != m {
        return Err(Error::Shape(format!(
            "board inputs disagree: {m} scores, {} outcomes, {} flags, {} ids",
            outcome.len(),
            treated.len(),
            unit_ids.len()
        )));
    }
    if m < NUM_DECILES {
        return Err(Error::Evaluation(format!(
            "test set of {m} units cannot fill {NUM_DECILES} deciles"
        )));
    }
    if let Some(i) = tau_hat.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "non-finite predicted effect for unit {}",
            unit_ids[i]
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| {
        tau_hat[b]
            .total_cmp(&tau_hat[a])
            .then(unit_ids[a].cmp(&unit_ids[b]))
    });

    let base = m / NUM_DECILES;
    let extra = m % NUM_DECILES;
    let mut deciles = Vec::with_capacity(NUM_DECILES);
    let mut offset = 0usize;
    for d in 0..NUM_DECILES {
        let size = base + usize::from(d < extra);
        let members = &order[offset..offset + size];
        offset += size;

        let mut row = DecileRow {
            decile: (d + 1) as u8,
            records_t: 0,
            records_c: 0,
            purchasers_t: 0,
            purchasers_c: 0,
            outcome_sum_t: 0.0,
            outcome_sum_c: 0.0,
            per_person_t: None,
            per_person_c: None,
            delta_per_person: None,
            delta_sum: None,
            valid: false,
        };
        for &i in members {
            let purchaser = outcome[i] > 0.0;
            if treated[i] {
                row.records_t += 1;
                row.purchasers_t += u32::from(purchaser);
                row.outcome_sum_t += outcome[i];
            } else {
                row.records_c += 1;
                row.purchasers_c += u32::from(purchaser);
                row.outcome_sum_c += outcome[i];
            }
        }
        if row.records_t > 0 && row.records_c > 0 {
            let pp_t = row.outcome_sum_t / f64::from(row.records_t);
            let pp_c = row.outcome_sum_c / f64::from(row.records_c);
            let delta = pp_t - pp_c;
            row.per_person_t = Some(pp_t);
            row.per_person_c = Some(pp_c);
            row.delta_per_person = Some(delta);
            row.delta_sum = Some(delta * f64::from(row.records_t + row.records_c));
            row.valid = true;
        }
        deciles.push(row);
    }
    Ok(EvaluationBoard {
        deciles,
        test_size: m as u32,
    })
}

// ============================================================================
// ICR curves
// ============================================================================

/// Incremental cumulative revenue: running sum of `delta_sum` over deciles
/// 1..=k. Entry 9 is the whole test set's incremental outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcrCurve {
    pub values: Vec<f64>,
}

pub fn icr(board: &EvaluationBoard) -> Result<IcrCurve> {
    let mut values = Vec::with_capacity(NUM_DECILES);
    let mut acc = 0.0;
    for row in &board.deciles {
        let delta = row.delta_sum.ok_or_else(|| {
            Error::Evaluation(format!(
                "decile {} has an empty treated or control side; \
                 the cumulative curve is undefined",
                row.decile
            ))
        })?;
        acc += delta;
        values.push(acc);
    }
    Ok(IcrCurve { values })
}

// ============================================================================
// Summaries and comparisons
// ============================================================================

/// Percentage difference of revenue-mode vs conversion-mode targeting:
/// 100 · (rev − conv) / |conv|. `None` when the conversion level is zero.
pub fn compare_modes(revenue_median: f64, conversion_median: f64) -> Option<f64> {
    if conversion_median == 0.0 {
        return None;
    }
    Some(100.0 * (revenue_median - conversion_median) / conversion_median.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile on a sorted slice (the common "type 7").
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        sorted[lo.min(n - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Five-number summary of a prediction vector.
pub fn ite_summary(tau: &[f64]) -> Result<FiveNumber> {
    if tau.is_empty() {
        return Err(Error::Evaluation("no predictions to summarize".into()));
    }
    if tau.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite prediction in summary".into()));
    }
    let mut sorted = tau.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(FiveNumber {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Min-max scale importance scores to [0, 1] for reporting; an all-equal
/// vector maps to all ones (every variable is equally, maximally ranked).
pub fn scale_importance(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|v| (v - min) / (max - min)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bins + 1 edges, ascending. Degenerate (constant) data gets one bin.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

fn histogram(values: &[f64]) -> Histogram {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Histogram {
            edges: vec![min, max],
            counts: vec![values.len() as u64],
        };
    }
    let width = (max - min) / HISTOGRAM_BINS as f64;
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &v in values {
        let bin = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    Histogram {
        edges: (0..=HISTOGRAM_BINS)
            .map(|b| min + b as f64 * width)
            .collect(),
        counts,
    }
}

// ============================================================================
// Experiment runner
// ============================================================================

/// Input datasets per outcome reading. When both are present they must
/// describe the same units (ids, covariates, treatment) so partitions and
/// models line up across modes.
pub struct ExperimentInput {
    pub revenue: Option<Dataset>,
    pub conversion: Option<Dataset>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub partitions: PartitionScheme,
    pub train: MultiTrainConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub scheme: Scheme,
    pub modes: Vec<OutcomeKind>,
    pub num_partitions: usize,
    pub train_fraction: f64,
    pub partition_seed: u64,
    pub causal_seed: u64,
    pub nuisance_seed: u64,
    pub causal_trees: usize,
    pub nuisance_trees: usize,
    /// How per-partition curves reduce to one number per arm and mode.
    pub aggregation_order: String,
    pub total_units: usize,
    pub covariates: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionReport {
    pub partition: usize,
    pub test_units: u32,
    pub board: EvaluationBoard,
    pub icr: Vec<f64>,
    /// Median of the ten cumulative levels of this partition's curve.
    pub median_icr: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CenteringSummary {
    pub clamped_units: usize,
    pub oob_fallback_outcome: usize,
    pub oob_fallback_propensity: usize,
}

impl CenteringSummary {
    fn absorb(&mut self, d: &CenteringDiagnostics) {
        self.clamped_units += d.clamped_units;
        self.oob_fallback_outcome += d.oob_fallback_outcome;
        self.oob_fallback_propensity += d.oob_fallback_propensity;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeReport {
    pub partitions: Vec<PartitionReport>,
    /// Mean across partitions, per decile (length 10).
    pub icr_decile_means: Vec<f64>,
    /// Mean across partitions of the within-partition median ICR level —
    /// the headline number per arm and mode.
    pub median_icr: f64,
    /// `icr_decile_means` restricted to deciles 1–3, plus their mean.
    pub top_three_deciles: [f64; 3],
    pub top_three_mean: f64,
    /// Five-number summary of test-set predictions pooled over partitions.
    pub ite_summary: FiveNumber,
    pub ite_histogram: Histogram,
    /// Mean raw importance across partition models, and its min-max scaling.
    pub importance_raw: Vec<f64>,
    pub importance_scaled: Vec<f64>,
    pub degenerate_predictions: usize,
    pub centering: CenteringSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeComparison {
    pub revenue_median_icr: f64,
    pub conversion_median_icr: f64,
    /// `None` marks an undefined comparison (conversion level exactly zero).
    pub percent_difference: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm_code: u32,
    pub arm_name: String,
    /// Keyed "revenue" / "conversion".
    pub modes: BTreeMap<String, ModeReport>,
    pub mode_comparison: Option<ModeComparison>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpliftReport {
    pub metadata: ReportMetadata,
    pub arms: Vec<ArmReport>,
}

/// Everything one (mode, partition, arm) cell produces.
struct CellOutcome {
    board: EvaluationBoard,
    icr: Vec<f64>,
    tau: Vec<f64>,
    importance_raw: Vec<f64>,
    degenerate: usize,
    diagnostics: CenteringDiagnostics,
    test_units: u32,
}

/// Run the full evaluation protocol: partition, train per partition and
/// mode, score the held-out side, and aggregate decile boards into a report.
pub fn run_experiment(input: &ExperimentInput, cfg: &ExperimentConfig) -> Result<UpliftReport> {
    let modes: Vec<(OutcomeKind, &Dataset)> = [
        (OutcomeKind::Revenue, input.revenue.as_ref()),
        (OutcomeKind::Conversion, input.conversion.as_ref()),
    ]
    .into_iter()
    .filter_map(|(kind, ds)| ds.map(|d| (kind, d)))
    .collect();
    if modes.is_empty() {
        return Err(Error::Precondition(
            "experiment needs at least one dataset".into(),
        ));
    }
    for (kind, ds) in &modes {
        if ds.outcome_kind != *kind {
            return Err(Error::Precondition(format!(
                "dataset supplied for {kind} mode is loaded as {}",
                ds.outcome_kind
            )));
        }
    }
    if let [(_, a), (_, b)] = modes.as_slice() {
        if a.unit_ids != b.unit_ids
            || a.covariate_names != b.covariate_names
            || a.covariates != b.covariates
            || a.treatment != b.treatment
        {
            return Err(Error::Precondition(
                "revenue and conversion datasets must describe the same units".into(),
            ));
        }
    }
    let reference = modes[0].1;
    let folds = partition_indices(reference.n(), &cfg.partitions)?;

    // arm list fixed up front so every cell reports the same arms
    let arm_codes: Vec<u32> = match cfg.scheme {
        Scheme::TreatmentComparison => reference.arm_codes(),
        Scheme::CombinedTreatment => vec![1],
    };
    if arm_codes.is_empty() {
        return Err(Error::Precondition("dataset has no treatment arms".into()));
    }

    // (mode, partition, arm) → outcome, trained and scored cell by cell
    let mut cells: BTreeMap<(usize, usize, u32), CellOutcome> = BTreeMap::new();
    for (mode_idx, (mode, ds)) in modes.iter().enumerate() {
        for (p_idx, (train_idx, test_idx)) in folds.iter().enumerate() {
            let train = ds.select(train_idx)?;
            let test = ds.select(test_idx)?;
            let model = fit_multi(&train, cfg.scheme, *mode, &cfg.train)?;
            log::info!(
                "trained {} mode partition {} ({} arms, {} train units)",
                mode,
                p_idx + 1,
                model.arms.len(),
                train.n()
            );
            for arm_model in &model.arms {
                let sub = match cfg.scheme {
                    Scheme::TreatmentComparison => subset_by_arm(&test, arm_model.arm_code)?,
                    Scheme::CombinedTreatment => binarize_treatments(&test)?,
                };
                let pred = arm_model.forest.predict_ite(&sub.covariates)?;
                let treated: Vec<bool> = sub.treatment.iter().map(|&t| t == 1).collect();
                let board = build_board(&pred.tau, &sub.outcome, &treated, &sub.unit_ids)?;
                let curve = icr(&board)?;
                cells.insert(
                    (mode_idx, p_idx, arm_model.arm_code),
                    CellOutcome {
                        board,
                        icr: curve.values,
                        tau: pred.tau,
                        importance_raw: arm_model.forest.variable_importance(),
                        degenerate: pred.degenerate_count,
                        diagnostics: arm_model.centering.clone(),
                        test_units: sub.n() as u32,
                    },
                );
            }
        }
    }

    // aggregate
    let num_parts = folds.len();
    let mut arms = Vec::with_capacity(arm_codes.len());
    for &arm in &arm_codes {
        let arm_name = match cfg.scheme {
            Scheme::TreatmentComparison => reference.arm_names[&arm].clone(),
            Scheme::CombinedTreatment => {
                if reference.arm_codes() == vec![1] {
                    reference.arm_names[&1].clone()
                } else {
                    "any-treatment".to_string()
                }
            }
        };
        let mut mode_reports = BTreeMap::new();
        for (mode_idx, (mode, _)) in modes.iter().enumerate() {
            let mut partitions = Vec::with_capacity(num_parts);
            let mut pooled_tau = Vec::new();
            let mut importance_acc: Vec<f64> = Vec::new();
            let mut degenerate = 0usize;
            let mut centering = CenteringSummary::default();
            for p_idx in 0..num_parts {
                let cell = cells
                    .remove(&(mode_idx, p_idx, arm))
                    .expect("every cell was populated above");
                partitions.push(PartitionReport {
                    partition: p_idx + 1,
                    test_units: cell.test_units,
                    median_icr: median(&cell.icr),
                    icr: cell.icr,
                    board: cell.board,
                });
                pooled_tau.extend(cell.tau);
                if importance_acc.is_empty() {
                    importance_acc = cell.importance_raw.clone();
                } else {
                    for (a, b) in importance_acc.iter_mut().zip(&cell.importance_raw) {
                        *a += b;
                    }
                }
                degenerate += cell.degenerate;
                centering.absorb(&cell.diagnostics);
            }
            for v in &mut importance_acc {
                *v /= num_parts as f64;
            }
            let icr_decile_means: Vec<f64> = (0..NUM_DECILES)
                .map(|d| mean(&partitions.iter().map(|p| p.icr[d]).collect::<Vec<_>>()))
                .collect();
            let median_icr = mean(
                &partitions
                    .iter()
                    .map(|p| p.median_icr)
                    .collect::<Vec<_>>(),
            );
            let top_three = [
                icr_decile_means[0],
                icr_decile_means[1],
                icr_decile_means[2],
            ];
            mode_reports.insert(
                mode.to_string(),
                ModeReport {
                    partitions,
                    icr_decile_means,
                    median_icr,
                    top_three_deciles: top_three,
                    top_three_mean: mean(&top_three),
                    ite_summary: ite_summary(&pooled_tau)?,
                    ite_histogram: histogram(&pooled_tau),
                    importance_scaled: scale_importance(&importance_acc),
                    importance_raw: importance_acc,
                    degenerate_predictions: degenerate,
                    centering,
                },
            );
        }
        let mode_comparison = match (mode_reports.get("revenue"), mode_reports.get("conversion"))
        {
            (Some(rev), Some(conv)) => Some(ModeComparison {
                revenue_median_icr: rev.median_icr,
                conversion_median_icr: conv.median_icr,
                percent_difference: compare_modes(rev.median_icr, conv.median_icr),
            }),
            _ => None,
        };
        arms.push(ArmReport {
            arm_code: arm,
            arm_name,
            modes: mode_reports,
            mode_comparison,
        });
    }

    Ok(UpliftReport {
        metadata: ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scheme: cfg.scheme,
            modes: modes.iter().map(|(m, _)| *m).collect(),
            num_partitions: cfg.partitions.num_partitions,
            train_fraction: cfg.partitions.train_fraction,
            partition_seed: cfg.partitions.seed,
            causal_seed: cfg.train.causal.seed,
            nuisance_seed: cfg.train.nuisance.seed,
            causal_trees: cfg.train.causal.num_trees,
            nuisance_trees: cfg.train.nuisance.num_trees,
            aggregation_order: "median-within-partition-then-mean-across-partitions".into(),
            total_units: reference.n(),
            covariates: reference.covariate_names.clone(),
        },
        arms,
    })
}

// ============================================================================
// Tests
// ============================================================================
