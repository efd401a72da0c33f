//! Typed campaign datasets and the operations that reshape them.
//!
//! A [`Dataset`] is the fully encoded, validated form every other module
//! consumes: numeric covariate matrix (categoricals already one-hot), integer
//! treatment codes with 0 reserved for control, and a single outcome column
//! whose interpretation is pinned by [`OutcomeKind`]. Reshaping operations —
//! train/test partitioning, per-arm subsetting, treatment binarization — all
//! return new `Dataset`s and never mutate in place.

pub mod csv;
pub mod hillstrom;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, SALT_SHUFFLE, SALT_SPLIT};

// ============================================================================
// Core types
// ============================================================================

/// How the outcome column is to be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    /// Continuous non-negative spend; zero for non-purchasers.
    #[default]
    Revenue,
    /// Binary purchase indicator in {0, 1}.
    Conversion,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeKind::Revenue => write!(f, "revenue"),
            OutcomeKind::Conversion => write!(f, "conversion"),
        }
    }
}

/// Encoded campaign data; invariants are enforced by [`Dataset::new`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Stable per-unit identifiers, unique within the dataset.
    pub unit_ids: Vec<u64>,
    /// Numeric covariates, one row per unit (categoricals one-hot encoded).
    pub covariates: Matrix,
    /// Column names aligned with `covariates`.
    pub covariate_names: Vec<String>,
    /// Treatment codes; 0 is control, 1..=K are the treatment arms.
    pub treatment: Vec<u32>,
    /// Outcome per unit, read according to `outcome_kind`.
    pub outcome: Vec<f64>,
    pub outcome_kind: OutcomeKind,
    /// Human-readable arm labels; must cover every code in `treatment`.
    pub arm_names: BTreeMap<u32, String>,
}

impl Dataset {
    /// Validating constructor; every invariant other modules rely on is
    /// checked here so downstream code can index freely.
    pub fn new(
        unit_ids: Vec<u64>,
        covariates: Matrix,
        covariate_names: Vec<String>,
        treatment: Vec<u32>,
        outcome: Vec<f64>,
        outcome_kind: OutcomeKind,
        arm_names: BTreeMap<u32, String>,
    ) -> Result<Self> {
        let n = unit_ids.len();
        if n == 0 {
            return Err(Error::Dataset("dataset has no units".into()));
        }
        if covariates.rows() != n || treatment.len() != n || outcome.len() != n {
            return Err(Error::Dataset(format!(
                "length mismatch: {} ids, {} covariate rows, {} treatments, {} outcomes",
                n,
                covariates.rows(),
                treatment.len(),
                outcome.len()
            )));
        }
        if covariate_names.len() != covariates.cols() {
            return Err(Error::Dataset(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.cols()
            )));
        }
        let mut sorted_ids = unit_ids.clone();
        sorted_ids.sort_unstable();
        if sorted_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Dataset("unit ids are not unique".into()));
        }
        if !arm_names.contains_key(&0) {
            return Err(Error::Labeling("arm names lack a control (code 0) entry".into()));
        }
        for (i, code) in treatment.iter().enumerate() {
            if !arm_names.contains_key(code) {
                return Err(Error::Labeling(format!(
                    "unit {} carries treatment code {} with no arm name",
                    unit_ids[i], code
                )));
            }
        }
        for (i, y) in outcome.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::Dataset(format!(
                    "non-finite outcome for unit {}",
                    unit_ids[i]
                )));
            }
            if outcome_kind == OutcomeKind::Conversion && *y != 0.0 && *y != 1.0 {
                return Err(Error::Dataset(format!(
                    "conversion outcome {} for unit {} is not 0/1",
                    y, unit_ids[i]
                )));
            }
        }
        Ok(Dataset {
            unit_ids,
            covariates,
            covariate_names,
            treatment,
            outcome,
            outcome_kind,
            arm_names,
        })
    }

    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates.cols()
    }

    /// Treatment-arm codes present in the label map, ascending, control excluded.
    pub fn arm_codes(&self) -> Vec<u32> {
        self.arm_names.keys().copied().filter(|&c| c != 0).collect()
    }

    /// Row subset in the order given; ids, outcomes, and labels follow along.
    pub fn select(&self, idx: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Shape(format!(
                "row index {} out of bounds for {} units",
                bad,
                self.n()
            )));
        }
        Dataset::new(
            idx.iter().map(|&i| self.unit_ids[i]).collect(),
            self.covariates.select_rows(idx),
            self.covariate_names.clone(),
            idx.iter().map(|&i| self.treatment[i]).collect(),
            idx.iter().map(|&i| self.outcome[i]).collect(),
            self.outcome_kind,
            self.arm_names.clone(),
        )
    }

    /// Purchase/assignment summary used by audits and the CLI `prepare` step.
    pub fn audit(&self) -> DataAudit {
        let mut arm_counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &t in &self.treatment {
            *arm_counts.entry(t).or_insert(0) += 1;
        }
        let mut audit = DataAudit {
            units: self.n(),
            num_covariates: self.num_covariates(),
            outcome_kind: self.outcome_kind,
            arms: arm_counts
                .iter()
                .map(|(code, count)| ArmCount {
                    code: *code,
                    name: self.arm_names.get(code).cloned().unwrap_or_default(),
                    units: *count,
                })
                .collect(),
            treated_purchasers: 0,
            treated_outcome_sum: 0.0,
            control_purchasers: 0,
            control_outcome_sum: 0.0,
        };
        for i in 0..self.n() {
            let purchaser = self.outcome[i] > 0.0;
            if self.treatment[i] > 0 {
                if purchaser {
                    audit.treated_purchasers += 1;
                    audit.treated_outcome_sum += self.outcome[i];
                }
            } else if purchaser {
                audit.control_purchasers += 1;
                audit.control_outcome_sum += self.outcome[i];
            }
        }
        audit
    }

    /// Write the encoded form back out as CSV: `unit_id`, covariates,
    /// `treatment` (label), `outcome`. Loadable again via
    /// [`Dataset::canonical_schema`].
    pub fn write_canonical_csv(&self, path: &Path) -> Result<()> {
        let mut w = ::csv::Writer::from_path(path)?;
        let mut header = vec!["unit_id".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.push("treatment".into());
        header.push("outcome".into());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.unit_ids[i].to_string());
            for j in 0..self.num_covariates() {
                rec.push(fmt_float(self.covariates.get(i, j)));
            }
            rec.push(self.arm_names[&self.treatment[i]].clone());
            rec.push(fmt_float(self.outcome[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Schema that reloads the output of [`Dataset::write_canonical_csv`].
    /// Arm codes are re-derived from sorted labels, which matches the codes
    /// this crate assigns in the first place.
    pub fn canonical_schema(&self) -> csv::CsvSchema {
        csv::CsvSchema {
            treatment: "treatment".into(),
            outcome: "outcome".into(),
            control_label: self.arm_names[&0].clone(),
            outcome_kind: self.outcome_kind,
            id: Some("unit_id".into()),
            covariates: Some(self.covariate_names.clone()),
            categorical: Vec::new(),
            arms: Some(self.arm_names.values().cloned().collect()),
            drop_constant_columns: false,
        }
    }
}

/// Render a float without trailing noise: integers print bare.
fn fmt_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

// ============================================================================
// Audit summary
// ============================================================================

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmCount {
    pub code: u32,
    pub name: String,
    pub units: usize,
}

/// Aggregates checked against the published campaign description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataAudit {
    pub units: usize,
    pub num_covariates: usize,
    pub outcome_kind: OutcomeKind,
    pub arms: Vec<ArmCount>,
    /// Units with outcome > 0 among all treated (any arm) and control.
    pub treated_purchasers: usize,
    pub treated_outcome_sum: f64,
    pub control_purchasers: usize,
    pub control_outcome_sum: f64,
}

impl fmt::Display for DataAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "units: {}", self.units)?;
        writeln!(f, "covariates: {}", self.num_covariates)?;
        writeln!(f, "outcome: {}", self.outcome_kind)?;
        for arm in &self.arms {
            writeln!(f, "  arm {} ({}): {} units", arm.code, arm.name, arm.units)?;
        }
        writeln!(
            f,
            "treated purchasers: {} (outcome sum {:.2})",
            self.treated_purchasers, self.treated_outcome_sum
        )?;
        write!(
            f,
            "control purchasers: {} (outcome sum {:.2})",
            self.control_purchasers, self.control_outcome_sum
        )
    }
}

// ============================================================================
// Partitioning
// ============================================================================

/// Repeated shuffled train/test splitting. The defaults mirror the reference
/// evaluation protocol: five partitions, 70% training share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionScheme {
    pub num_partitions: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PartitionScheme {
    fn default() -> Self {
        PartitionScheme {
            num_partitions: 5,
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl PartitionScheme {
    pub fn validate(&self) -> Result<()> {
        if self.num_partitions == 0 {
            return Err(Error::Sizing("num_partitions must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Sizing(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Index-level partitioning: disjoint partitions whose sizes follow the
/// largest-remainder rule (first `n mod k` partitions get one extra unit),
/// each split into (train, test) row indices. Index lists are ascending, so
/// derived datasets preserve original row order.
pub fn partition_indices(
    n: usize,
    scheme: &PartitionScheme,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    scheme.validate()?;
    let k = scheme.num_partitions;
    if n < 2 * k {
        return Err(Error::Sizing(format!(
            "{n} units cannot fill {k} partitions with non-empty train and test sides"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(scheme.seed, SALT_SHUFFLE));

    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut offset = 0;
    for p in 0..k {
        let size = base + usize::from(p < extra);
        let mut members: Vec<usize> = order[offset..offset + size].to_vec();
        offset += size;
        members.shuffle(&mut stream_rng(scheme.seed, SALT_SPLIT + p as u64));
        let train_len =
            ((scheme.train_fraction * size as f64).round() as usize).clamp(1, size - 1);
        let mut train = members[..train_len].to_vec();
        let mut test = members[train_len..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        out.push((train, test));
    }
    Ok(out)
}

/// Materialized form of [`partition_indices`].
pub fn partition(ds: &Dataset, scheme: &PartitionScheme) -> Result<Vec<(Dataset, Dataset)>> {
    partition_indices(ds.n(), scheme)?
        .into_iter()
        .map(|(train, test)| Ok((ds.select(&train)?, ds.select(&test)?)))
        .collect()
}

// ============================================================================
// Arm subsetting and binarization
// ============================================================================

/// Restrict to control plus one treatment arm, recoding that arm to 1.
/// The result is the binary dataset a single causal forest trains on.
pub fn subset_by_arm(ds: &Dataset, arm: u32) -> Result<Dataset> {
    if arm == 0 {
        return Err(Error::Composition(
            "cannot subset on the control arm (code 0)".into(),
        ));
    }
    let name = ds.arm_names.get(&arm).cloned().ok_or_else(|| {
        Error::Composition(format!("unknown treatment arm code {arm}"))
    })?;
    let idx: Vec<usize> = (0..ds.n())
        .filter(|&i| ds.treatment[i] == 0 || ds.treatment[i] == arm)
        .collect();
    let treated = idx.iter().filter(|&&i| ds.treatment[i] == arm).count();
    if treated == 0 || treated == idx.len() {
        return Err(Error::Composition(format!(
            "arm {name} (code {arm}) needs at least one treated and one control unit"
        )));
    }
    let mut sub = ds.select(&idx)?;
    for t in &mut sub.treatment {
        if *t == arm {
            *t = 1;
        }
    }
    let mut names = BTreeMap::new();
    names.insert(0, ds.arm_names[&0].clone());
    names.insert(1, name);
    sub.arm_names = names;
    Ok(sub)
}

/// Collapse all treatment arms into a single pseudo-arm (code 1). With one
/// arm the dataset is already binary and is returned unchanged.
pub fn binarize_treatments(ds: &Dataset) -> Result<Dataset> {
    let codes = ds.arm_codes();
    if codes.is_empty() {
        return Err(Error::Composition("dataset has no treatment arms".into()));
    }
    let treated = ds.treatment.iter().filter(|&&t| t > 0).count();
    if treated == 0 || treated == ds.n() {
        return Err(Error::Composition(
            "binarization needs at least one treated and one control unit".into(),
        ));
    }
    if codes.len() == 1 && codes[0] == 1 {
        return Ok(ds.clone());
    }
    let mut out = ds.clone();
    for t in &mut out.treatment {
        if *t > 0 {
            *t = 1;
        }
    }
    let mut names = BTreeMap::new();
    names.insert(0, ds.arm_names[&0].clone());
    names.insert(1, "any-treatment".to_string());
    out.arm_names = names;
    Ok(out)
}

// ============================================================================
// Tests
// ============================================================================
