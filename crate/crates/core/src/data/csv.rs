//! Generic CSV ingestion: schema-driven parsing, treatment labeling, and
//! deterministic one-hot encoding.
//!
//! Missing values are rejected outright — imputation is a modeling decision
//! that does not belong in a loader. Categorical levels become one dummy per
//! level (no reference level is dropped; forests are unaffected by the
//! redundancy and importance stays attributable per level). Final column
//! order sorts by (source column name, level), so encoding is reproducible
//! regardless of row order.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Declarative description of a raw CSV file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Column holding treatment labels.
    pub treatment: String,
    /// Column holding the outcome.
    pub outcome: String,
    /// Label mapped to code 0. Must occur in the data.
    pub control_label: String,
    pub outcome_kind: OutcomeKind,
    /// Optional column of unique integer unit ids; row order otherwise.
    #[serde(default)]
    pub id: Option<String>,
    /// Covariate columns; defaults to every column not otherwise claimed.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    /// Covariates to one-hot encode; the rest must parse as numbers.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Closed set of expected treatment labels (control included). Labels
    /// outside the set become errors; codes follow the sorted non-control
    /// labels. Without the list, codes are derived from the labels observed.
    #[serde(default)]
    pub arms: Option<Vec<String>>,
    /// Drop encoded columns with zero variance, reporting them as warnings.
    #[serde(default)]
    pub drop_constant_columns: bool,
}

/// Load and encode `path` according to `schema`.
/// Returns the dataset plus human-readable warnings (e.g. dropped columns).
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(Dataset, Vec<String>)> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    encode_table(&headers, &records, schema, &|_, v| Cow::Borrowed(v))
}

/// Shared encoding path. `value_map` lets source-specific loaders normalize
/// raw cell text (column name, raw value) before typing; the generic loader
/// passes values through untouched.
pub(crate) fn encode_table(
    headers: &[String],
    records: &[::csv::StringRecord],
    schema: &CsvSchema,
    value_map: &dyn for<'a> Fn(&str, &'a str) -> Cow<'a, str>,
) -> Result<(Dataset, Vec<String>)> {
    let mut warnings = Vec::new();

    // ---- header resolution -------------------------------------------------
    let mut col_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (j, h) in headers.iter().enumerate() {
        if col_index.insert(h.as_str(), j).is_some() {
            return Err(Error::Schema(format!("duplicate column name '{h}'")));
        }
    }
    let find = |name: &str| -> Result<usize> {
        col_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let treat_idx = find(&schema.treatment)?;
    let outcome_idx = find(&schema.outcome)?;
    let id_idx = schema.id.as_deref().map(find).transpose()?;

    let covariate_cols: Vec<String> = match &schema.covariates {
        Some(cols) => {
            for c in cols {
                find(c)?;
            }
            cols.clone()
        }
        None => headers
            .iter()
            .filter(|h| {
                **h != schema.treatment
                    && **h != schema.outcome
                    && Some(h.as_str()) != schema.id.as_deref()
            })
            .cloned()
            .collect(),
    };
    if covariate_cols.is_empty() {
        return Err(Error::Schema("no covariate columns".into()));
    }
    for c in &schema.categorical {
        if !covariate_cols.contains(c) {
            return Err(Error::Schema(format!(
                "categorical column '{c}' is not a covariate"
            )));
        }
    }
    if records.is_empty() {
        return Err(Error::Dataset("file contains no data rows".into()));
    }

    // ---- pass 1: categorical levels ---------------------------------------
    let mut levels: BTreeMap<&str, BTreeSet<String>> = schema
        .categorical
        .iter()
        .map(|c| (c.as_str(), BTreeSet::new()))
        .collect();
    for (r, rec) in records.iter().enumerate() {
        for cat in &schema.categorical {
            let j = col_index[cat.as_str()];
            let raw = cell(rec, j, r, cat)?;
            let mapped = value_map(cat, raw);
            if mapped.is_empty() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: cat.clone(),
                    msg: "missing value".into(),
                });
            }
            levels.get_mut(cat.as_str()).unwrap().insert(mapped.into_owned());
        }
    }

    // ---- column plan: sorted by (source name, level) -----------------------
    enum Source {
        Numeric(usize),
        Dummy(usize, String),
    }
    let mut plan: Vec<(String, Source)> = Vec::new();
    for c in &covariate_cols {
        let j = col_index[c.as_str()];
        match levels.get(c.as_str()) {
            Some(lv) => {
                for level in lv {
                    plan.push((format!("{c}={level}"), Source::Dummy(j, level.clone())));
                }
            }
            None => plan.push((c.clone(), Source::Numeric(j))),
        }
    }
    plan.sort_by(|a, b| a.0.cmp(&b.0));

    // ---- treatment labels --------------------------------------------------
    let code_of: BTreeMap<String, u32> = match &schema.arms {
        Some(arms) => {
            if !arms.contains(&schema.control_label) {
                return Err(Error::Labeling(format!(
                    "control label '{}' missing from declared arms",
                    schema.control_label
                )));
            }
            let mut treat_labels: Vec<&String> = arms
                .iter()
                .filter(|a| **a != schema.control_label)
                .collect();
            treat_labels.sort();
            let mut map = BTreeMap::new();
            map.insert(schema.control_label.clone(), 0);
            for (k, label) in treat_labels.iter().enumerate() {
                map.insert((*label).clone(), (k + 1) as u32);
            }
            map
        }
        None => {
            let mut observed = BTreeSet::new();
            for (r, rec) in records.iter().enumerate() {
                observed.insert(cell(rec, treat_idx, r, &schema.treatment)?.to_string());
            }
            if !observed.remove(&schema.control_label) {
                return Err(Error::Labeling(format!(
                    "control label '{}' never occurs in column '{}'",
                    schema.control_label, schema.treatment
                )));
            }
            let mut map = BTreeMap::new();
            map.insert(schema.control_label.clone(), 0);
            for (k, label) in observed.into_iter().enumerate() {
                map.insert(label, (k + 1) as u32);
            }
            map
        }
    };

    // ---- pass 2: parse rows ------------------------------------------------
    let n = records.len();
    let mut columns: Vec<Vec<f64>> = plan.iter().map(|_| Vec::with_capacity(n)).collect();
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut unit_ids = Vec::with_capacity(n);

    for (r, rec) in records.iter().enumerate() {
        for (slot, (_, src)) in plan.iter().enumerate() {
            let v = match src {
                Source::Numeric(j) => {
                    let raw = cell(rec, *j, r, &headers[*j])?;
                    parse_number(raw, r, &headers[*j])?
                }
                Source::Dummy(j, level) => {
                    let raw = cell(rec, *j, r, &headers[*j])?;
                    let mapped = value_map(&headers[*j], raw);
                    f64::from(mapped.as_ref() == level)
                }
            };
            columns[slot].push(v);
        }

        let label = cell(rec, treat_idx, r, &schema.treatment)?;
        let code = code_of.get(label).copied().ok_or_else(|| {
            Error::Labeling(format!(
                "row {}: treatment label '{}' not among declared arms",
                r + 1,
                label
            ))
        })?;
        treatment.push(code);

        let y = parse_number(cell(rec, outcome_idx, r, &schema.outcome)?, r, &schema.outcome)?;
        if schema.outcome_kind == OutcomeKind::Conversion && y != 0.0 && y != 1.0 {
            return Err(Error::Parse {
                row: r + 1,
                column: schema.outcome.clone(),
                msg: format!("conversion outcome must be 0 or 1, got {y}"),
            });
        }
        outcome.push(y);

        unit_ids.push(match id_idx {
            Some(j) => {
                let raw = cell(rec, j, r, schema.id.as_deref().unwrap())?;
                raw.parse::<u64>().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: schema.id.clone().unwrap(),
                    msg: format!("unit id '{raw}' is not a non-negative integer"),
                })?
            }
            None => r as u64,
        });
    }

    if !treatment.contains(&0) {
        return Err(Error::Labeling(format!(
            "control label '{}' never occurs in the data",
            schema.control_label
        )));
    }

    // ---- optional constant-column drop ------------------------------------
    let mut names: Vec<String> = plan.into_iter().map(|(name, _)| name).collect();
    if schema.drop_constant_columns {
        let constant: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, col)| col.iter().all(|v| *v == col[0]))
            .map(|(j, _)| j)
            .collect();
        for &j in constant.iter().rev() {
            warnings.push(format!("dropped constant column '{}'", names[j]));
            names.remove(j);
            columns.remove(j);
        }
        if columns.is_empty() {
            return Err(Error::Schema(
                "all covariate columns are constant; nothing to model on".into(),
            ));
        }
    }

    let arm_names: BTreeMap<u32, String> = code_of.into_iter().map(|(l, c)| (c, l)).collect();
    let ds = Dataset::new(
        unit_ids,
        Matrix::from_columns(columns)?,
        names,
        treatment,
        outcome,
        schema.outcome_kind,
        arm_names,
    )?;
    Ok((ds, warnings))
}

fn cell<'a>(
    rec: &'a ::csv::StringRecord,
    j: usize,
    row: usize,
    column: &str,
) -> Result<&'a str> {
    match rec.get(j) {
        Some(v) if !v.trim().is_empty() => Ok(v.trim()),
        Some(_) => Err(Error::Parse {
            row: row + 1,
            column: column.to_string(),
            msg: "missing value".into(),
        }),
        None => Err(Error::Parse {
            row: row + 1,
            column: column.to_string(),
            msg: "row has too few fields".into(),
        }),
    }
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        row: row + 1,
        column: column.to_string(),
        msg: format!("'{raw}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row: row + 1,
            column: column.to_string(),
            msg: format!("non-finite value {v}"),
        });
    }
    Ok(v)
}

// ============================================================================
// Tests
// ============================================================================
