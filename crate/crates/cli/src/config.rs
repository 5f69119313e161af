//! JSON run configuration.
//!
//! ```json
//! {
//!   "data": "../data/UCI_Credit_Card.csv",
//!   "preprocessing": {
//!     "label_column": "default.payment.next.month",
//!     "positive_value": 0,
//!     "actionable": ["PAY_0", "BILL_AMT1"],
//!     "drop": ["ID"]
//!   },
//!   "intercept": true,
//!   "grid": { "sigmas": [0.1, 1, 10], "lambdas": [0.1, 1], "betas": [0] },
//!   "context": { "kind": "fn_tn_split", "tn_floor": 0.0188 },
//!   "objectives": ["fn_cost", "neg_log_prob"],
//!   "subsample": { "size": 1000 },
//!   "output_dir": "../out/fn_tn",
//!   "seed": 7
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use beliefcal::posterior::add_intercept;
use beliefcal::{
    parse_objectives, BeliefGrid, ContextKind, ContextSpec, CostAveraging, CostWeights, Dataset,
    Filters, Objective, Preprocessing, SubsampleSpec,
};
use serde::Deserialize;

use crate::error::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "BELIEFCAL_OUT_DIR";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub preprocessing: Preprocessing,
    /// Append a constant bias column (excluded from recourse).
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default = "BeliefGrid::reference")]
    pub grid: BeliefGrid,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default = "default_objectives")]
    pub objectives: Vec<String>,
    #[serde(default)]
    pub subsample: Option<SubsampleConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub kind: ContextKind,
    /// D entry for actionable features (actionable context only).
    #[serde(default = "default_actionable_weight")]
    pub actionable_weight: f64,
    /// D entry for the remaining features (actionable context only).
    #[serde(default = "default_immutable_weight")]
    pub immutable_weight: f64,
    #[serde(default)]
    pub tn_floor: Option<f64>,
    #[serde(default)]
    pub averaging: CostAveraging,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            kind: ContextKind::Plain,
            actionable_weight: default_actionable_weight(),
            immutable_weight: default_immutable_weight(),
            tn_floor: None,
            averaging: CostAveraging::AllRows,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub size: usize,
    /// Falls back to the top-level seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_true() -> bool {
    true
}

fn default_objectives() -> Vec<String> {
    vec!["avg_cost".into(), "neg_log_prob".into()]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_actionable_weight() -> f64 {
    1.0
}

fn default_immutable_weight() -> f64 {
    100.0
}

/// A parsed and checked configuration with absolute paths.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub data: PathBuf,
    pub output_dir: PathBuf,
    pub objectives: Vec<Objective>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    /// Read, parse and validate `path`, resolving relative paths against its
    /// directory. The data file must exist.
    pub fn load(path: &Path) -> Result<Resolved, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let data = base.join(&config.data);
        let output_dir = match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => base.join(&config.output_dir),
        };
        let objectives = config.validate()?;
        if !data.is_file() {
            return Err(CliError::Data(format!(
                "data file not found: {}",
                data.display()
            )));
        }
        Ok(Resolved {
            config,
            data,
            output_dir,
            objectives,
        })
    }

    /// Checks that need no data; returns the parsed objectives.
    pub fn validate(&self) -> Result<Vec<Objective>, CliError> {
        self.grid
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let objectives =
            parse_objectives(&self.objectives).map_err(|e| CliError::Config(e.to_string()))?;
        let ctx = &self.context;
        if ctx.kind != ContextKind::Policy && self.grid.betas != [0.0] {
            return Err(CliError::Config(
                "non-zero betas require the policy context".into(),
            ));
        }
        for (name, w) in [
            ("actionable_weight", ctx.actionable_weight),
            ("immutable_weight", ctx.immutable_weight),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::Config(format!(
                    "{name} must be positive, got {w}"
                )));
            }
        }
        if let Some(f) = ctx.tn_floor {
            if ctx.kind != ContextKind::FnTnSplit {
                return Err(CliError::Config(
                    "tn_floor requires the fn_tn_split context".into(),
                ));
            }
            if !(f >= 0.0 && f.is_finite()) {
                return Err(CliError::Config(format!(
                    "tn_floor must be non-negative, got {f}"
                )));
            }
        }
        if let Some(s) = self.subsample {
            if s.size == 0 {
                return Err(CliError::Config("subsample size must be positive".into()));
            }
        }
        Ok(objectives)
    }

    pub fn subsample_spec(&self) -> Option<SubsampleSpec> {
        self.subsample.map(|s| SubsampleSpec {
            size: s.size,
            seed: s.seed.unwrap_or(self.seed),
        })
    }

    /// Context for a dataset that already carries its intercept column.
    pub fn context_spec(&self, ds: &Dataset) -> Result<ContextSpec, CliError> {
        let c = &self.context;
        let mut spec = match c.kind {
            ContextKind::Plain => ContextSpec::plain(),
            ContextKind::Actionable => {
                let w = CostWeights::from_actionability(
                    &ds.actionable,
                    ds.intercept,
                    c.actionable_weight,
                    c.immutable_weight,
                )
                .map_err(|e| CliError::Config(e.to_string()))?;
                ContextSpec::actionable(w)
            }
            ContextKind::FnTnSplit => ContextSpec::fn_tn_split(c.tn_floor),
            ContextKind::Policy => ContextSpec::policy(),
        };
        spec.averaging = c.averaging;
        spec.validate(ds.d())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn filters(&self) -> Filters {
        Filters {
            tn_floor: self.context.tn_floor,
        }
    }
}

/// Dataset as the sweep sees it, with the original row index of each row.
pub struct Prepared {
    pub dataset: Dataset,
    pub row_ids: Vec<usize>,
    /// Rows and features before subsampling and the intercept.
    pub full_rows: usize,
    pub raw_features: usize,
}

impl Resolved {
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let cfg = &self.config;
        let raw = beliefcal::load_csv(&self.data, &cfg.preprocessing.label_column)?;
        let full = Dataset::from_raw(&raw, &cfg.preprocessing)?;
        let (full_rows, raw_features) = (full.n(), full.d());
        let (ds, row_ids) = match cfg.subsample_spec() {
            Some(spec) => {
                let idx = beliefcal::data::subsample_indices(full.n(), spec)?;
                (full.select_rows(&idx), idx)
            }
            None => {
                let ids = (0..full.n()).collect();
                (full, ids)
            }
        };
        let dataset = if cfg.intercept {
            add_intercept(&ds)
        } else {
            ds
        };
        Ok(Prepared {
            dataset,
            row_ids,
            full_rows,
            raw_features,
        })
    }
}
