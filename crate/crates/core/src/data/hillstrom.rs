//! Loader for the e-mail campaign dataset (64,000 customers, two e-mail
//! arms plus holdout) and a deterministic stand-in generator for
//! environments where the original file is not available.
//!
//! The loader pins the published schema: `segment` holds the arm labels
//! ("No E-Mail" control, "Mens E-Mail", "Womens E-Mail" → codes 0/1/2),
//! `spend` is the revenue outcome, `conversion` the binary one, and the
//! response columns (`visit`, `conversion`, `spend`) are never covariates.
//! `history_segment` values carry ordinal prefixes like `"2) $100 - $200"`;
//! the prefix is stripped before encoding so dummy names are plain ranges.

use std::borrow::Cow;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::csv::{encode_table, CsvSchema};
use super::{Dataset, OutcomeKind};
use crate::error::Result;
use crate::rng::stream_rng;

/// Expected row count of the published file; deviations load with a warning.
pub const EXPECTED_ROWS: usize = 64_000;

const ARM_CONTROL: &str = "No E-Mail";
const ARM_MENS: &str = "Mens E-Mail";
const ARM_WOMENS: &str = "Womens E-Mail";

/// Fixed schema for the campaign file under the chosen outcome reading.
pub fn campaign_schema(kind: OutcomeKind) -> CsvSchema {
    CsvSchema {
        treatment: "segment".into(),
        outcome: match kind {
            OutcomeKind::Revenue => "spend".into(),
            OutcomeKind::Conversion => "conversion".into(),
        },
        control_label: ARM_CONTROL.into(),
        outcome_kind: kind,
        id: None,
        covariates: Some(
            [
                "recency",
                "history_segment",
                "history",
                "mens",
                "womens",
                "zip_code",
                "newbie",
                "channel",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        ),
        categorical: vec![
            "history_segment".into(),
            "zip_code".into(),
            "channel".into(),
        ],
        arms: Some(vec![
            ARM_CONTROL.into(),
            ARM_MENS.into(),
            ARM_WOMENS.into(),
        ]),
        drop_constant_columns: false,
    }
}

/// Load the campaign CSV with the outcome read as `kind`.
/// Returns integrity warnings (e.g. unexpected row count) alongside.
pub fn load_campaign_csv(path: &Path, kind: OutcomeKind) -> Result<(Dataset, Vec<String>)> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (ds, mut warnings) =
        encode_table(&headers, &records, &campaign_schema(kind), &|col, raw| {
            if col == "history_segment" {
                Cow::Owned(strip_ordinal_prefix(raw).to_string())
            } else {
                Cow::Borrowed(raw)
            }
        })?;
    if ds.n() != EXPECTED_ROWS {
        warnings.push(format!(
            "expected {} rows, found {} — file may be truncated or modified",
            EXPECTED_ROWS,
            ds.n()
        ));
    }
    Ok((ds, warnings))
}

/// Drop a leading `"N) "` ordinal marker if present.
fn strip_ordinal_prefix(raw: &str) -> &str {
    match raw.split_once(") ") {
        Some((prefix, rest)) if !prefix.is_empty() && prefix.bytes().all(|b| b.is_ascii_digit()) => {
            rest
        }
        _ => raw,
    }
}

// ============================================================================
// Stand-in generator
// ============================================================================

// Published aggregates the stand-in reproduces exactly.
const N_CONTROL: usize = 21_306;
const N_MENS: usize = 21_307;
const N_WOMENS: usize = 21_387;
const TREATED_PURCHASERS: usize = 456;
const TREATED_SPEND_CENTS: i64 = 5_334_980; // 53,349.80
const CONTROL_PURCHASERS: usize = 122;
const CONTROL_SPEND_CENTS: i64 = 1_390_833; // 13,908.33

/// Write a synthetic file in the published campaign schema.
///
/// The output matches the real file's audit aggregates exactly — row count,
/// per-arm assignment counts, purchaser counts, and spend totals to the cent —
/// and bakes in covariate-dependent treatment effects (gender-match and
/// purchase-history lift), so pipelines exercised against it see realistic
/// positive uplift. It is NOT the real data; use it where the original file
/// cannot be distributed.
pub fn write_demo_campaign_csv(path: &Path, seed: u64) -> Result<()> {
    let n = N_CONTROL + N_MENS + N_WOMENS;
    let mut rng = stream_rng(seed, 0xDE30);

    // arm assignment with exact counts
    let mut arm: Vec<u8> = Vec::with_capacity(n);
    arm.extend(std::iter::repeat(0u8).take(N_CONTROL));
    arm.extend(std::iter::repeat(1u8).take(N_MENS));
    arm.extend(std::iter::repeat(2u8).take(N_WOMENS));
    arm.shuffle(&mut rng);

    // covariates
    let mut recency = Vec::with_capacity(n);
    let mut history = Vec::with_capacity(n);
    let mut mens = Vec::with_capacity(n);
    let mut womens = Vec::with_capacity(n);
    let mut zip_code = Vec::with_capacity(n);
    let mut newbie = Vec::with_capacity(n);
    let mut channel = Vec::with_capacity(n);
    for _ in 0..n {
        recency.push(rng.gen_range(1..=12u32));
        let h: f64 = 25.0 + (-(rng.gen::<f64>().max(1e-12)).ln()) * 180.0;
        history.push((h.min(3_000.0) * 100.0).round() / 100.0);
        let m = u8::from(rng.gen::<f64>() < 0.55);
        let mut w = u8::from(rng.gen::<f64>() < 0.45);
        if m == 0 && w == 0 {
            w = 1; // every customer bought from at least one department
        }
        mens.push(m);
        womens.push(w);
        let uz: f64 = rng.gen();
        zip_code.push(if uz < 0.45 {
            "Surburban"
        } else if uz < 0.85 {
            "Urban"
        } else {
            "Rural"
        });
        newbie.push(u8::from(rng.gen::<f64>() < 0.5));
        let uc: f64 = rng.gen();
        channel.push(if uc < 0.44 {
            "Web"
        } else if uc < 0.88 {
            "Phone"
        } else {
            "Multichannel"
        });
    }

    // Purchase propensity: base score everyone shares, plus a treatment boost
    // that is larger when the e-mail matches the customer's department
    // history — the heterogeneity an uplift model should find.
    let base_score = |i: usize| -> f64 {
        0.9 * (history[i] / 300.0).min(2.5)
            + 0.5 * f64::from(recency[i] <= 3)
            + 0.3 * f64::from(mens[i])
            + 0.25 * f64::from(channel[i] == "Web")
    };
    let boost = |i: usize| -> f64 {
        let gender_match = match arm[i] {
            1 => mens[i] == 1,
            2 => womens[i] == 1,
            _ => false,
        };
        0.9 * f64::from(gender_match) + 0.4 * (history[i] / 400.0).min(1.5)
    };

    // Weighted sampling without replacement (largest exponential keys).
    let pick = |rng: &mut rand_chacha::ChaCha8Rng, pool: Vec<usize>, k: usize, score: &dyn Fn(usize) -> f64| -> Vec<usize> {
        let mut keyed: Vec<(f64, usize)> = pool
            .into_iter()
            .map(|i| {
                let u: f64 = rng.gen::<f64>().max(1e-300);
                (u.ln() / score(i).exp(), i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = keyed[..k].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        chosen
    };

    let treated_pool: Vec<usize> = (0..n).filter(|&i| arm[i] > 0).collect();
    let control_pool: Vec<usize> = (0..n).filter(|&i| arm[i] == 0).collect();
    let treated_buyers = pick(&mut rng, treated_pool, TREATED_PURCHASERS, &|i| {
        base_score(i) + boost(i)
    });
    let control_buyers = pick(&mut rng, control_pool, CONTROL_PURCHASERS, &|i| base_score(i));

    // Spend amounts scaled to hit the published totals to the cent.
    let amounts = |rng: &mut rand_chacha::ChaCha8Rng, buyers: &[usize], total_cents: i64| -> Vec<i64> {
        let raw: Vec<f64> = buyers
            .iter()
            .map(|&i| {
                let u: f64 = rng.gen();
                20.0 + 90.0 * u * u + 0.12 * history[i]
            })
            .collect();
        let raw_sum: f64 = raw.iter().sum();
        let scale = total_cents as f64 / 100.0 / raw_sum;
        let mut cents: Vec<i64> = raw
            .iter()
            .map(|a| ((a * scale * 100.0).round() as i64).max(1))
            .collect();
        let drift: i64 = total_cents - cents.iter().sum::<i64>();
        // settle rounding drift on the largest amount (stays positive)
        let largest = (0..cents.len()).max_by_key(|&k| cents[k]).unwrap();
        cents[largest] += drift;
        cents
    };
    let treated_cents = amounts(&mut rng, &treated_buyers, TREATED_SPEND_CENTS);
    let control_cents = amounts(&mut rng, &control_buyers, CONTROL_SPEND_CENTS);

    let mut spend_cents = vec![0i64; n];
    for (k, &i) in treated_buyers.iter().enumerate() {
        spend_cents[i] = treated_cents[k];
    }
    for (k, &i) in control_buyers.iter().enumerate() {
        spend_cents[i] = control_cents[k];
    }

    // site visits: all purchasers plus a score-driven share of the rest
    let mut visit = vec![0u8; n];
    for i in 0..n {
        let z = 0.08 + 0.05 * base_score(i) + if arm[i] > 0 { 0.02 + 0.01 * boost(i) } else { 0.0 };
        if spend_cents[i] > 0 || rng.gen::<f64>() < z {
            visit[i] = 1;
        }
    }

    let segment_label = |h: f64| -> &'static str {
        if h < 100.0 {
            "1) $0 - $100"
        } else if h < 200.0 {
            "2) $100 - $200"
        } else if h < 350.0 {
            "3) $200 - $350"
        } else if h < 500.0 {
            "4) $350 - $500"
        } else if h < 750.0 {
            "5) $500 - $750"
        } else if h < 1000.0 {
            "6) $750 - $1,000"
        } else {
            "7) $1,000 +"
        }
    };
    let arm_label = |a: u8| -> &'static str {
        match a {
            0 => ARM_CONTROL,
            1 => ARM_MENS,
            _ => ARM_WOMENS,
        }
    };

    let mut w = ::csv::Writer::from_path(path)?;
    w.write_record([
        "recency",
        "history_segment",
        "history",
        "mens",
        "womens",
        "zip_code",
        "newbie",
        "channel",
        "segment",
        "visit",
        "conversion",
        "spend",
    ])?;
    for i in 0..n {
        let conversion = u8::from(spend_cents[i] > 0);
        w.write_record([
            recency[i].to_string(),
            segment_label(history[i]).to_string(),
            format!("{:.2}", history[i]),
            mens[i].to_string(),
            womens[i].to_string(),
            zip_code[i].to_string(),
            newbie[i].to_string(),
            channel[i].to_string(),
            arm_label(arm[i]).to_string(),
            visit[i].to_string(),
            conversion.to_string(),
            format_cents(spend_cents[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn format_cents(cents: i64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

// ============================================================================
// Tests
// ============================================================================
