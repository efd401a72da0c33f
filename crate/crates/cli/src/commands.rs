//! Subcommand implementations: prepare, train, score, run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use uplift_forest::data::hillstrom::{load_campaign_csv, write_demo_campaign_csv};
use uplift_forest::data::OutcomeKind;
use uplift_forest::eval::{run_experiment, ExperimentConfig, ExperimentInput, UpliftReport};
use uplift_forest::multi::{fit_multi, predict_all, recommend_treatment, MultiForestModel};
use uplift_forest::{Error, Matrix, Result};

use crate::config::{load_data, LoadedData, ModeChoice, Resolved, Source};

const MODEL_FORMAT_VERSION: u32 = 1;

// ============================================================================
// Shared helpers
// ============================================================================

/// File-name-safe form of an arm label.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn money(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

// ============================================================================
// prepare
// ============================================================================

/// Audit input data and write its canonical encoded form. With `write_demo`,
/// first generate the bundled demonstration campaign file at that path.
pub fn prepare(resolved: Option<&Resolved>, write_demo: Option<&Path>, seed: u64) -> Result<()> {
    if let Some(path) = write_demo {
        write_demo_campaign_csv(path, seed)?;
        let (ds, warnings) = load_campaign_csv(path, OutcomeKind::Revenue)?;
        print_warnings(&warnings);
        println!("wrote demo campaign to {}", path.display());
        println!("{}", ds.audit());
        return Ok(());
    }

    let resolved = resolved.ok_or_else(|| {
        Error::Config("prepare needs --config (or --write-demo <path>)".into())
    })?;
    let loaded = load_data(&resolved.file.data, resolved.data_path.as_deref())?;
    print_warnings(&loaded.warnings);
    ensure_dir(&resolved.out_dir)?;
    for ds in loaded.readings() {
        let kind = ds.outcome_kind;
        println!("== {kind} reading ==");
        println!("{}", ds.audit());
        let csv_path = resolved.out_dir.join(format!("canonical_{kind}.csv"));
        ds.write_canonical_csv(&csv_path)?;
        write_json(
            &resolved.out_dir.join(format!("schema_{kind}.json")),
            &ds.canonical_schema(),
        )?;
        println!("canonical form: {}", csv_path.display());
    }
    Ok(())
}

// ============================================================================
// train
// ============================================================================

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: MultiForestModel,
}

/// Fit the per-arm forests on the full dataset and persist one model per
/// outcome reading.
pub fn train(resolved: &Resolved) -> Result<()> {
    let loaded = load_data(&resolved.file.data, resolved.data_path.as_deref())?;
    print_warnings(&loaded.warnings);
    ensure_dir(&resolved.out_dir)?;
    let cfg = resolved.file.model.train_config(resolved.seed);
    for ds in loaded.readings() {
        let kind = ds.outcome_kind;
        let model = fit_multi(ds, resolved.file.model.scheme, kind, &cfg)?;
        println!("{kind} model ({}):", model.scheme);
        for arm in &model.arms {
            println!(
                "  arm {} \"{}\": {} training units, {} trees, {:.2}% propensities clamped",
                arm.arm_code,
                arm.arm_name,
                arm.n_train,
                arm.forest.num_trees(),
                100.0 * arm.centering.clamped_fraction
            );
        }
        let path = resolved.out_dir.join(format!("model_{kind}.json"));
        write_json(
            &path,
            &ModelFile {
                format_version: MODEL_FORMAT_VERSION,
                model,
            },
        )?;
        println!("saved {}", path.display());
    }
    Ok(())
}

// ============================================================================
// score
// ============================================================================

/// Parse a covariate CSV whose header must match the model's covariates
/// exactly (optionally preceded by a unit_id column).
fn read_covariates(input: &Path, names: &[String]) -> Result<(Vec<u64>, Matrix)> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(input)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let has_ids = headers.first().map(String::as_str) == Some("unit_id");
    let covariate_headers = if has_ids { &headers[1..] } else { &headers[..] };
    if covariate_headers != names {
        return Err(Error::Compatibility(format!(
            "input covariates {:?} do not match the model's {:?} (order matters)",
            covariate_headers, names
        )));
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |j: usize, cell: &str| -> Result<f64> {
            cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: r + 1,
                column: headers[j].clone(),
                msg: format!("expected a number, got {cell:?}"),
            })
        };
        let mut row = Vec::with_capacity(names.len());
        let offset = usize::from(has_ids);
        if has_ids {
            let cell = record.get(0).unwrap_or("");
            ids.push(cell.trim().parse::<u64>().map_err(|_| Error::Parse {
                row: r + 1,
                column: "unit_id".into(),
                msg: format!("expected an integer id, got {cell:?}"),
            })?);
        } else {
            ids.push(r as u64);
        }
        for j in 0..names.len() {
            let cell = record.get(j + offset).ok_or_else(|| Error::Parse {
                row: r + 1,
                column: headers[j + offset].clone(),
                msg: "missing cell".into(),
            })?;
            row.push(parse(j + offset, cell)?);
        }
        rows.push(row);
    }
    Ok((ids, Matrix::from_rows(&rows)?))
}

/// Score fresh units with a saved model: per-arm effects plus the
/// recommended arm per unit.
pub fn score(model_path: &Path, input: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(model_path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Compatibility(format!("cannot read model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Compatibility(format!(
            "model format_version {} (this build reads {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let model = file.model;
    let (ids, x) = read_covariates(input, &model.covariate_names)?;
    if x.rows() == 0 {
        return Err(Error::Precondition("no rows to score".into()));
    }

    let preds = predict_all(&model, &x)?;
    let scores: BTreeMap<u32, Vec<f64>> = preds
        .iter()
        .map(|(&code, p)| (code, p.tau.clone()))
        .collect();
    let recommended = recommend_treatment(&scores)?;
    let arm_label = |code: u32| -> &str {
        if code == 0 {
            &model.control_name
        } else {
            &model
                .arms
                .iter()
                .find(|a| a.arm_code == code)
                .expect("recommendation codes come from the model")
                .arm_name
        }
    };

    ensure_dir(out_dir)?;
    let path = out_dir.join("scores.csv");
    let mut w = fs::File::create(&path)?;
    let arm_cols: Vec<String> = model
        .arms
        .iter()
        .map(|a| format!("tau_{}", slug(&a.arm_name)))
        .collect();
    writeln!(w, "unit_id,{},recommended", arm_cols.join(","))?;
    for (i, id) in ids.iter().enumerate() {
        let taus: Vec<String> = model
            .arms
            .iter()
            .map(|a| format!("{}", scores[&a.arm_code][i]))
            .collect();
        writeln!(w, "{id},{},{}", taus.join(","), arm_label(recommended[i]))?;
    }
    let degenerate: usize = preds.values().map(|p| p.degenerate_count).sum();
    if degenerate > 0 {
        eprintln!("warning: {degenerate} predictions fell back to zero (degenerate forest weights)");
    }
    println!(
        "scored {} units against {} arm model(s): {}",
        x.rows(),
        model.arms.len(),
        path.display()
    );
    Ok(())
}

// ============================================================================
// run
// ============================================================================

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    config_sha256: String,
    resolved: ResolvedSummary<'a>,
}

#[derive(Serialize)]
struct ResolvedSummary<'a> {
    source: &'a str,
    mode: &'a str,
    data_path: Option<String>,
    out_dir: String,
    seed: u64,
    threads: usize,
    scheme: String,
    partitions: usize,
    train_fraction: f64,
    causal_trees: usize,
    nuisance_trees: usize,
}

fn write_tables(report: &UpliftReport, out_dir: &Path) -> Result<usize> {
    let mut files = 0usize;

    // per-decile treated/control comparison, one file per arm, mode, partition
    for arm in &report.arms {
        let arm_slug = slug(&arm.arm_name);
        for (mode, mr) in &arm.modes {
            for part in &mr.partitions {
                let path =
                    out_dir.join(format!("table1_{mode}_{arm_slug}_p{}.csv", part.partition));
                let mut w = fs::File::create(&path)?;
                writeln!(
                    w,
                    "decile,records_t,records_c,purchasers_t,purchasers_c,\
                     outcome_sum_t,outcome_sum_c,per_person_t,per_person_c,\
                     delta_per_person,delta_sum"
                )?;
                for row in &part.board.deciles {
                    writeln!(
                        w,
                        "{},{},{},{},{},{:.2},{:.2},{},{},{},{}",
                        row.decile,
                        row.records_t,
                        row.records_c,
                        row.purchasers_t,
                        row.purchasers_c,
                        row.outcome_sum_t,
                        row.outcome_sum_c,
                        money(row.per_person_t),
                        money(row.per_person_c),
                        money(row.delta_per_person),
                        money(row.delta_sum),
                    )?;
                }
                files += 1;
            }

            let hist_path = out_dir.join(format!("ite_hist_{mode}_{arm_slug}.csv"));
            let mut w = fs::File::create(&hist_path)?;
            writeln!(w, "bin_lo,bin_hi,count")?;
            let h = &mr.ite_histogram;
            for (b, count) in h.counts.iter().enumerate() {
                writeln!(w, "{},{},{count}", h.edges[b], h.edges[b + 1])?;
            }
            files += 1;

            let imp_path = out_dir.join(format!("importance_{mode}_{arm_slug}.csv"));
            let mut w = fs::File::create(&imp_path)?;
            writeln!(w, "variable,raw,scaled")?;
            for (v, name) in report.metadata.covariates.iter().enumerate() {
                writeln!(w, "{name},{},{}", mr.importance_raw[v], mr.importance_scaled[v])?;
            }
            files += 1;
        }
    }

    // headline medians and the revenue-vs-conversion comparison
    let path = out_dir.join("table2.csv");
    let mut w = fs::File::create(&path)?;
    writeln!(
        w,
        "arm,revenue_median_icr,conversion_median_icr,percent_difference"
    )?;
    for arm in &report.arms {
        let rev = arm.modes.get("revenue").map(|m| m.median_icr);
        let conv = arm.modes.get("conversion").map(|m| m.median_icr);
        let pct = arm
            .mode_comparison
            .as_ref()
            .and_then(|c| c.percent_difference)
            .map(|p| format!("{p:+.1}"))
            .unwrap_or_default();
        writeln!(w, "{},{},{},{pct}", arm.arm_name, money(rev), money(conv))?;
    }
    files += 1;
    Ok(files)
}

/// The full evaluation protocol: partition, train per partition and mode,
/// score held-out units, aggregate, and write the report bundle.
pub fn run(resolved: &Resolved) -> Result<()> {
    let loaded = load_data(&resolved.file.data, resolved.data_path.as_deref())?;
    print_warnings(&loaded.warnings);

    let cfg = ExperimentConfig {
        scheme: resolved.file.model.scheme,
        partitions: resolved.file.evaluation.partition_scheme(resolved.seed),
        train: resolved.file.model.train_config(resolved.seed),
    };
    let LoadedData {
        revenue,
        conversion,
        ..
    } = loaded;
    let input = ExperimentInput {
        revenue,
        conversion,
    };
    let report = run_experiment(&input, &cfg)?;

    ensure_dir(&resolved.out_dir)?;
    write_json(&resolved.out_dir.join("report.json"), &report)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(&resolved.config_bytes),
        resolved: ResolvedSummary {
            source: match resolved.file.data.source {
                Source::Hillstrom => "hillstrom",
                Source::Csv => "csv",
                Source::Synthetic => "synthetic",
            },
            mode: match resolved.file.data.mode {
                ModeChoice::Revenue => "revenue",
                ModeChoice::Conversion => "conversion",
                ModeChoice::Both => "both",
            },
            data_path: resolved
                .data_path
                .as_ref()
                .map(|p| p.display().to_string()),
            out_dir: resolved.out_dir.display().to_string(),
            seed: resolved.seed,
            threads: resolved.threads,
            scheme: cfg.scheme.to_string(),
            partitions: cfg.partitions.num_partitions,
            train_fraction: cfg.partitions.train_fraction,
            causal_trees: cfg.train.causal.num_trees,
            nuisance_trees: cfg.train.nuisance.num_trees,
        },
    };
    write_json(&resolved.out_dir.join("manifest.json"), &manifest)?;
    let table_files = write_tables(&report, &resolved.out_dir)?;

    for arm in &report.arms {
        println!("arm {} \"{}\":", arm.arm_code, arm.arm_name);
        for (mode, mr) in &arm.modes {
            println!(
                "  {mode:<10} median ICR {:>12.2}   top-3 deciles {:>12.2}",
                mr.median_icr, mr.top_three_mean
            );
        }
        if let Some(cmp) = &arm.mode_comparison {
            match cmp.percent_difference {
                Some(p) => println!("  revenue vs conversion targeting: {p:+.1}%"),
                None => println!("  revenue vs conversion targeting: undefined (zero baseline)"),
            }
        }
    }
    println!(
        "report: {} (+ manifest, {table_files} table/diagnostic files)",
        resolved.out_dir.join("report.json").display()
    );
    Ok(())
}
