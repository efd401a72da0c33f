//! TOML run configuration and its resolution against environment variables
//! and command-line flags (config < `UPLIFT_SEED`/`UPLIFT_THREADS` < flags).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use uplift_forest::data::csv::{load_csv, CsvSchema};
use uplift_forest::data::hillstrom::load_campaign_csv;
use uplift_forest::data::{Dataset, OutcomeKind, PartitionScheme};
use uplift_forest::multi::{MultiTrainConfig, Scheme};
use uplift_forest::regression::ForestConfig;
use uplift_forest::synthetic::{generate, SyntheticSpec};
use uplift_forest::{Error, Result};

pub const ENV_SEED: &str = "UPLIFT_SEED";
pub const ENV_THREADS: &str = "UPLIFT_THREADS";

// ============================================================================
// File format
// ============================================================================

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Hillstrom,
    Csv,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Revenue,
    Conversion,
    Both,
}

impl ModeChoice {
    pub fn wants(self, kind: OutcomeKind) -> bool {
        matches!(
            (self, kind),
            (ModeChoice::Both, _)
                | (ModeChoice::Revenue, OutcomeKind::Revenue)
                | (ModeChoice::Conversion, OutcomeKind::Conversion)
        )
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: Source,
    /// Input file for `hillstrom` and `csv` sources.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub mode: ModeChoice,
    /// Column mapping for the `csv` source.
    #[serde(default)]
    pub schema: Option<SchemaSection>,
    /// Generator spec for the `synthetic` source (revenue mode only).
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

fn default_mode() -> ModeChoice {
    ModeChoice::Both
}

/// Mirrors [`CsvSchema`] minus `outcome_kind` (the run mode decides it) plus
/// `conversion_outcome`, the second outcome column a `mode = "both"` run
/// reads from the same file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub treatment: String,
    pub outcome: String,
    pub control_label: String,
    #[serde(default)]
    pub conversion_outcome: Option<String>,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub arms: Option<Vec<String>>,
    #[serde(default)]
    pub drop_constant_columns: bool,
}

impl SchemaSection {
    fn to_schema(&self, kind: OutcomeKind, outcome: &str) -> CsvSchema {
        CsvSchema {
            treatment: self.treatment.clone(),
            outcome: outcome.to_string(),
            control_label: self.control_label.clone(),
            outcome_kind: kind,
            id: self.id.clone(),
            covariates: self.covariates.clone(),
            categorical: self.categorical.clone(),
            arms: self.arms.clone(),
            drop_constant_columns: self.drop_constant_columns,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub scheme: Scheme,
    pub causal_trees: usize,
    pub nuisance_trees: usize,
    pub subsample_fraction: f64,
    pub honesty: bool,
    pub honesty_fraction: f64,
    pub min_node_size: usize,
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let causal = ForestConfig::causal_default();
        let nuisance = ForestConfig::default();
        ModelSection {
            scheme: Scheme::TreatmentComparison,
            causal_trees: causal.num_trees,
            nuisance_trees: nuisance.num_trees,
            subsample_fraction: causal.subsample_fraction,
            honesty: causal.honesty,
            honesty_fraction: causal.honesty_fraction,
            min_node_size: causal.min_node_size,
            mtry: causal.mtry,
            max_depth: causal.max_depth,
            seed: causal.seed,
        }
    }
}

impl ModelSection {
    /// Both forests share every knob except the tree count; role and arm
    /// separation happens inside the engine via seed streams.
    pub fn train_config(&self, seed: u64) -> MultiTrainConfig {
        let shared = ForestConfig {
            num_trees: 0,
            subsample_fraction: self.subsample_fraction,
            honesty: self.honesty,
            honesty_fraction: self.honesty_fraction,
            min_node_size: self.min_node_size,
            mtry: self.mtry,
            max_depth: self.max_depth,
            seed,
        };
        MultiTrainConfig {
            causal: ForestConfig {
                num_trees: self.causal_trees,
                ..shared.clone()
            },
            nuisance: ForestConfig {
                num_trees: self.nuisance_trees,
                ..shared
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub partitions: usize,
    pub train_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let p = PartitionScheme::default();
        EvaluationSection {
            partitions: p.num_partitions,
            train_fraction: p.train_fraction,
        }
    }
}

impl EvaluationSection {
    pub fn partition_scheme(&self, seed: u64) -> PartitionScheme {
        PartitionScheme {
            num_partitions: self.partitions,
            train_fraction: self.train_fraction,
            seed,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

// ============================================================================
// Resolution
// ============================================================================

/// A parsed config plus everything the flags and environment decided.
pub struct Resolved {
    pub file: FileConfig,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub data_path: Option<PathBuf>,
    /// Raw bytes of the config file, for provenance hashing.
    pub config_bytes: Vec<u8>,
}

fn env_number(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{name}={s:?} is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

pub fn resolve(
    config_path: &Path,
    seed_flag: Option<u64>,
    threads_flag: Option<usize>,
    out_flag: Option<&Path>,
    data_flag: Option<&Path>,
) -> Result<Resolved> {
    let config_bytes = std::fs::read(config_path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let text = std::str::from_utf8(&config_bytes)
        .map_err(|_| Error::Config("config file is not valid UTF-8".into()))?;
    let file: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;

    let mut seed = file.model.seed;
    if let Some(s) = env_number(ENV_SEED)? {
        seed = s;
    }
    if let Some(s) = seed_flag {
        seed = s;
    }

    let mut threads = 0usize;
    if let Some(t) = env_number(ENV_THREADS)? {
        threads = t as usize;
    }
    if let Some(t) = threads_flag {
        threads = t;
    }

    let out_dir = out_flag
        .map(Path::to_path_buf)
        .unwrap_or_else(|| file.output.dir.clone());
    let data_path = data_flag
        .map(Path::to_path_buf)
        .or_else(|| file.data.path.clone());

    Ok(Resolved {
        file,
        seed,
        threads,
        out_dir,
        data_path,
        config_bytes,
    })
}

// ============================================================================
// Data loading
// ============================================================================

pub struct LoadedData {
    pub revenue: Option<Dataset>,
    pub conversion: Option<Dataset>,
    pub warnings: Vec<String>,
}

impl LoadedData {
    pub fn readings(&self) -> Vec<&Dataset> {
        [self.revenue.as_ref(), self.conversion.as_ref()]
            .into_iter()
            .flatten()
            .collect()
    }

    fn set(&mut self, kind: OutcomeKind, ds: Dataset) {
        match kind {
            OutcomeKind::Revenue => self.revenue = Some(ds),
            OutcomeKind::Conversion => self.conversion = Some(ds),
        }
    }
}

/// Load the dataset(s) the config's mode asks for.
pub fn load_data(data: &DataSection, path_override: Option<&Path>) -> Result<LoadedData> {
    let path = path_override.or(data.path.as_deref());
    let need_path = || {
        path.ok_or_else(|| {
            Error::Config("data.path (or --data) is required for file sources".into())
        })
    };
    let mut out = LoadedData {
        revenue: None,
        conversion: None,
        warnings: Vec::new(),
    };
    match data.source {
        Source::Hillstrom => {
            let path = need_path()?;
            for kind in [OutcomeKind::Revenue, OutcomeKind::Conversion] {
                if data.mode.wants(kind) {
                    let (ds, mut warnings) = load_campaign_csv(path, kind)?;
                    out.warnings.append(&mut warnings);
                    out.set(kind, ds);
                }
            }
        }
        Source::Csv => {
            let path = need_path()?;
            let section = data.schema.as_ref().ok_or_else(|| {
                Error::Config("[data.schema] is required for the csv source".into())
            })?;
            if data.mode.wants(OutcomeKind::Revenue) {
                let schema = section.to_schema(OutcomeKind::Revenue, &section.outcome);
                let (ds, mut warnings) = load_csv(path, &schema)?;
                out.warnings.append(&mut warnings);
                out.set(OutcomeKind::Revenue, ds);
            }
            if data.mode.wants(OutcomeKind::Conversion) {
                let column = match data.mode {
                    ModeChoice::Conversion => section
                        .conversion_outcome
                        .as_deref()
                        .unwrap_or(&section.outcome),
                    _ => section.conversion_outcome.as_deref().ok_or_else(|| {
                        Error::Config(
                            "mode = \"both\" needs data.schema.conversion_outcome".into(),
                        )
                    })?,
                };
                let schema = section.to_schema(OutcomeKind::Conversion, column);
                let (ds, mut warnings) = load_csv(path, &schema)?;
                out.warnings.append(&mut warnings);
                out.set(OutcomeKind::Conversion, ds);
            }
        }
        Source::Synthetic => {
            let spec = data.synthetic.as_ref().ok_or_else(|| {
                Error::Config("[data.synthetic] is required for the synthetic source".into())
            })?;
            if data.mode != ModeChoice::Revenue {
                return Err(Error::Config(
                    "the synthetic source generates revenue outcomes; set data.mode = \"revenue\""
                        .into(),
                ));
            }
            out.revenue = Some(generate(spec)?.dataset);
        }
    }
    Ok(out)
}
