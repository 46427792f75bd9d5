//! TOML experiment files.
//!
//! Every section and key is optional; absent keys take the standard values
//! (one `info` notice per defaulted key) and unknown keys are rejected.
//!
//! ```toml
//! [stream]
//! dimension = 2
//! horizon = 400
//! target_radius = 2.0
//! drift_rate = 0.01
//! noise_std = 0.1
//!
//! [ogd]
//! eta0 = 0.6
//! radius = 5.0
//! environments = ["stationary", "drifting"]
//!
//! [ons]
//! eta = 1.0
//! delta = 1.0
//! radius = 5.0
//! environments = ["drifting"]
//! alpha_grid = [0.3, 0.5, 0.7]
//! beta_grid = [0.5, 0.7, 0.9]
//! include_baseline = true
//! correct_parameters = true
//!
//! [deletion]
//! tau = 200
//! count = 10
//!
//! [metrics]
//! smoothing_window = 10
//! recovery_tolerance = 0.1
//! reference_window = 50
//!
//! [run]
//! seeds = 20
//! models = ["ogd", "ons"]
//! format = "csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{treatment_cells, DeletionPlan, SweepPlan, DEFAULT_ALPHA_GRID, DEFAULT_BETA_GRID};
use crate::metrics::MetricParams;
use crate::optim::{ModelKind, OgdParams, OnsParams};
use crate::stream::{Environment, StreamConfig};
use crate::unlearn::Intervention;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub dimension: usize,
    pub horizon: usize,
    pub target_radius: f64,
    pub drift_rate: f64,
    pub noise_std: f64,
}

impl Default for StreamSection {
    fn default() -> Self {
        let s = StreamConfig::default();
        StreamSection {
            dimension: s.dimension,
            horizon: s.horizon,
            target_radius: s.target_radius,
            drift_rate: s.drift_rate,
            noise_std: s.noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OgdSection {
    pub eta0: f64,
    pub radius: f64,
    pub environments: Vec<Environment>,
}

impl Default for OgdSection {
    fn default() -> Self {
        let p = OgdParams::default();
        OgdSection { eta0: p.eta0, radius: p.radius, environments: vec![Environment::Stationary, Environment::Drifting] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnsSection {
    pub eta: f64,
    /// Regularizer of the initial preconditioner `delta * I`.
    #[serde(alias = "lambda")]
    pub delta: f64,
    pub radius: f64,
    pub environments: Vec<Environment>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub include_baseline: bool,
    /// Apply the first-order parameter correction when deleting.
    pub correct_parameters: bool,
}

impl Default for OnsSection {
    fn default() -> Self {
        let p = OnsParams::default();
        OnsSection {
            eta: p.eta,
            delta: p.lambda,
            radius: p.radius,
            environments: vec![Environment::Drifting],
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            beta_grid: DEFAULT_BETA_GRID.to_vec(),
            include_baseline: true,
            correct_parameters: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeletionSection {
    pub tau: usize,
    pub count: usize,
    /// Explicit deleted rounds; overrides `count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<usize>>,
}

impl Default for DeletionSection {
    fn default() -> Self {
        let d = DeletionPlan::default();
        DeletionSection { tau: d.tau, count: d.count, rounds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!("unknown output format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Number of seeds, run as `0..seeds`.
    pub seeds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_list: Option<Vec<u64>>,
    pub models: Vec<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads; absent means one per core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: 20,
            seed_list: None,
            models: vec![ModelKind::Ogd, ModelKind::Ons],
            output_dir: None,
            format: OutputFormat::Csv,
            parallelism: None,
        }
    }
}

/// A fully resolved experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stream: StreamSection,
    pub ogd: OgdSection,
    pub ons: OnsSection,
    pub deletion: DeletionSection,
    pub metrics: MetricParams,
    pub run: RunSection,
}

/// Command-line overrides layered on top of a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seeds: Option<usize>,
    pub seed_list: Option<Vec<u64>>,
    pub models: Option<Vec<ModelKind>>,
    pub environments: Option<Vec<Environment>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub format: Option<OutputFormat>,
    pub parallelism: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses TOML text. `origin` names the source in diagnostics.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(format!("{origin}: {e}")))?;
        let table: toml::Table = text.parse().map_err(|e| Error::config(format!("{origin}: {e}")))?;
        for key in defaulted_keys(&table) {
            log::info!("{origin}: `{key}` not set, using the default");
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.seeds {
            self.run.seeds = n;
            self.run.seed_list = None;
        }
        if let Some(list) = &o.seed_list {
            self.run.seed_list = Some(list.clone());
        }
        if let Some(models) = &o.models {
            self.run.models = models.clone();
        }
        if let Some(envs) = &o.environments {
            self.ogd.environments = envs.clone();
            self.ons.environments = envs.clone();
        }
        if let Some(a) = &o.alpha_grid {
            self.ons.alpha_grid = a.clone();
        }
        if let Some(b) = &o.beta_grid {
            self.ons.beta_grid = b.clone();
        }
        if let Some(f) = o.format {
            self.run.format = f;
        }
        if let Some(p) = o.parallelism {
            self.run.parallelism = Some(p);
        }
        if let Some(dir) = &o.output_dir {
            self.run.output_dir = Some(dir.clone());
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.run.seed_list {
            Some(list) => list.clone(),
            None => (0..self.run.seeds as u64).collect(),
        }
    }

    /// The sweep described by this file, unvalidated.
    pub fn plan(&self) -> SweepPlan {
        let mut cells = Vec::new();
        for &model in &self.run.models {
            match model {
                ModelKind::Ogd => cells.extend(treatment_cells(model, &self.ogd.environments, &[], &[])),
                ModelKind::Ons => {
                    let mut ons = treatment_cells(model, &self.ons.environments, &self.ons.alpha_grid, &self.ons.beta_grid);
                    if !self.ons.include_baseline {
                        ons.retain(|c| c.intervention != Intervention::None);
                    }
                    cells.extend(ons);
                }
            }
        }
        let s = &self.stream;
        SweepPlan {
            stream: StreamConfig {
                dimension: s.dimension,
                horizon: s.horizon,
                target_radius: s.target_radius,
                drift_rate: s.drift_rate,
                noise_std: s.noise_std,
                ..StreamConfig::default()
            },
            ogd: OgdParams { eta0: self.ogd.eta0, radius: self.ogd.radius },
            ons: OnsParams { eta: self.ons.eta, lambda: self.ons.delta, radius: self.ons.radius },
            deletion: DeletionPlan {
                tau: self.deletion.tau,
                count: self.deletion.count,
                rounds: self.deletion.rounds.clone(),
                correct_parameters: self.ons.correct_parameters,
            },
            metrics: self.metrics,
            seeds: self.seeds(),
            cells,
        }
    }

    /// All violations at once; empty when the file is runnable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.run.models.is_empty() {
            out.push("run.models is empty".to_string());
        }
        if self.run.parallelism == Some(0) {
            out.push("run.parallelism must be at least 1".to_string());
        }
        if let Some(list) = &self.run.seed_list {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                out.push("run.seed_list contains duplicates".to_string());
            }
        }
        for (name, envs) in [("ogd", &self.ogd.environments), ("ons", &self.ons.environments)] {
            let model: ModelKind = name.parse().expect("known model");
            if self.run.models.contains(&model) && envs.is_empty() {
                out.push(format!("{name}.environments is empty"));
            }
        }
        if self.stream.dimension < 2
            && self.run.models.iter().any(|m| {
                let envs = if *m == ModelKind::Ogd { &self.ogd.environments } else { &self.ons.environments };
                envs.contains(&Environment::Drifting)
            })
        {
            out.push(format!("the drifting stream needs dimension >= 2, got {}", self.stream.dimension));
        }
        for v in self.plan().violations() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<SweepPlan> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self.plan())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Dotted keys that the defaults define but `table` omits.
fn defaulted_keys(table: &toml::Table) -> Vec<String> {
    let defaults = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    let mut out = Vec::new();
    for (section, value) in &defaults {
        let Some(keys) = value.as_table() else { continue };
        let given = table.get(section).and_then(|v| v.as_table());
        for key in keys.keys() {
            if !given.is_some_and(|g| g.contains_key(key)) {
                out.push(format!("{section}.{key}"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_the_standard_sweep() {
        let cfg = RunConfig::from_toml_str("", "empty").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let plan = cfg.validate().unwrap();
        assert_eq!(plan, SweepPlan::standard());
        assert_eq!(defaulted_keys(&toml::Table::new()).len(), 24);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = RunConfig::from_toml_str("[stream]\nhorizon = 300\n[run]\nseeds = 3\n", "t").unwrap();
        assert_eq!(cfg.stream.horizon, 300);
        assert_eq!(cfg.stream.dimension, 2);
        assert_eq!(cfg.seeds(), vec![0, 1, 2]);
        let t: toml::Table = "[stream]\nhorizon = 300\n".parse().unwrap();
        let missing = defaulted_keys(&t);
        assert!(missing.contains(&"stream.dimension".to_string()));
        assert!(!missing.contains(&"stream.horizon".to_string()));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::from_toml_str("[ons]\nzeta = 1.0\n", "f.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("zeta") && msg.contains("f.toml") && msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::from_toml_str("[bogus]\n", "f").is_err());
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let msg = RunConfig::from_toml_str("[stream]\nhorizon = = 3\n", "f").unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn early_tau_names_the_deletion_window() {
        let mut cfg = RunConfig::default();
        cfg.deletion.tau = 5;
        let v = cfg.violations().join("; ");
        assert!(v.contains("deletion set precedes stream start"), "{v}");
    }

    #[test]
    fn all_violations_are_reported_together() {
        let mut cfg = RunConfig::default();
        cfg.ons.beta_grid = vec![1.2];
        cfg.ogd.eta0 = -1.0;
        cfg.deletion.tau = 500;
        let v = cfg.violations();
        let joined = v.join("; ");
        assert!(joined.contains("beta must lie in (0,1)"), "{joined}");
        assert!(joined.contains("ogd.eta0"), "{joined}");
        assert!(joined.contains("tau"), "{joined}");
        assert!(v.len() >= 3);
    }

    #[test]
    fn overrides_reshape_the_grid() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seeds: Some(1),
            models: Some(vec![ModelKind::Ons]),
            alpha_grid: Some(vec![0.5]),
            beta_grid: Some(vec![]),
            ..Default::default()
        });
        let plan = cfg.validate().unwrap();
        assert_eq!(plan.seeds, vec![0]);
        assert_eq!(plan.cells.len(), 2);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.run.seed_list = Some(vec![4, 9]);
        cfg.deletion.rounds = Some(vec![150, 160]);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string(), "echo").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn model_names_accept_either_case() {
        let cfg = RunConfig::from_toml_str("[run]\nmodels = [\"ONS\", \"ogd\"]\n", "t").unwrap();
        assert_eq!(cfg.run.models, vec![ModelKind::Ons, ModelKind::Ogd]);
    }
}
