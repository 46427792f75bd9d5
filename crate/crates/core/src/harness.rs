//! Twin-run experiments and seed x treatment sweeps.
//!
//! A run generates one stream and drives two learners over it: the realized
//! learner sees every round and undergoes the deletion event after round `tau`,
//! the counterfactual learner skips the deleted rounds (its state stays frozen
//! there) so both trajectories stay indexed by the same `t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, MeanStd, MetricParams, Recovery, RoundRecord, SummaryRecord};
use crate::optim::{Learner, ModelKind, OgdParams, OgdState, OnsParams, OnsState};
use crate::stream::{gen_stream, Environment, StreamConfig};
use crate::unlearn::{apply_deletion_event, DeletionEvent, Intervention};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Stream settings; the `seed` field is replaced by the run seed.
    pub stream: StreamConfig,
    pub model: ModelKind,
    pub ogd: OgdParams,
    pub ons: OnsParams,
    /// `None` runs the twins without any deletion.
    pub event: Option<DeletionEvent>,
    pub metrics: MetricParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            stream: StreamConfig::default(),
            model: ModelKind::Ons,
            ogd: OgdParams::default(),
            ons: OnsParams::default(),
            event: Some(DeletionEvent::most_recent(200, 10, Intervention::None).expect("valid default event")),
            metrics: MetricParams::default(),
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {value}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        match self.model {
            ModelKind::Ogd => {
                positive("ogd.eta0", self.ogd.eta0)?;
                positive("ogd.radius", self.ogd.radius)?;
            }
            ModelKind::Ons => {
                positive("ons.eta", self.ons.eta)?;
                positive("ons.lambda", self.ons.lambda)?;
                positive("ons.radius", self.ons.radius)?;
            }
        }
        self.metrics.validate()?;
        if let Some(ev) = &self.event {
            ev.validate(Some(self.stream.horizon))?;
            self.metrics.check_tau(ev.tau, self.stream.horizon)?;
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        match self.model {
            ModelKind::Ogd => self.ogd.radius,
            ModelKind::Ons => self.ons.radius,
        }
    }

    fn learner(&self) -> Learner {
        let d = self.stream.dimension;
        match self.model {
            ModelKind::Ogd => Learner::Ogd(OgdState::new(d, self.ogd)),
            ModelKind::Ons => Learner::Ons(OnsState::new(d, self.ons)),
        }
    }

    pub fn intervention(&self) -> Intervention {
        self.event.as_ref().map_or(Intervention::None, |e| e.intervention)
    }
}

/// Deletion-response scalars of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeletionOutcome {
    pub recovery: Recovery,
    pub overshoot: f64,
    pub param_shock: f64,
}

/// Recomputes the deletion scalars from a run's own records.
pub fn outcome_from_records(records: &[RoundRecord], tau: usize, params: &MetricParams) -> Result<DeletionOutcome> {
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    Ok(DeletionOutcome {
        recovery: metrics::recovery_time(&losses, tau, params)?,
        overshoot: metrics::overshoot(&losses, tau, params)?,
        param_shock: metrics::parameter_shock(records, tau)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    /// Present whenever the run had a deletion event.
    pub outcome: Option<DeletionOutcome>,
    pub final_regret: f64,
}

impl RunResult {
    pub fn model(&self) -> ModelKind {
        self.config.model
    }

    pub fn environment(&self) -> Environment {
        self.config.stream.environment
    }

    pub fn intervention_label(&self) -> String {
        self.config.intervention().label()
    }
}

/// Runs the realized learner and its counterfactual twin on one seeded stream.
pub fn run_pair(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let stream_cfg = StreamConfig { seed, ..cfg.stream.clone() };
    let stream = gen_stream(&stream_cfg)?;

    let mut realized = cfg.learner();
    let mut counterfactual = cfg.learner();
    let event = cfg.event.as_ref();
    let skip = |t: usize| event.is_some_and(|e| e.contains(t));

    let mut losses = Vec::with_capacity(stream.len());
    let mut partial = Vec::with_capacity(stream.len());
    for obs in &stream {
        let t = obs.t;
        let tracking = metrics::tracking_error(realized.params(), counterfactual.params());

        let out = realized.step(obs).map_err(|e| e.with_context(format!("realized round {t}")))?;
        let out_cf = if skip(t) {
            None
        } else {
            Some(counterfactual.step(obs).map_err(|e| e.with_context(format!("counterfactual round {t}")))?)
        };

        let spectral = match (realized.preconditioner(), counterfactual.preconditioner()) {
            (Some(a), Some(a_cf)) => Some(metrics::spectral_row(
                a,
                a_cf,
                Some(&out.gradient),
                out_cf.as_ref().map(|o| &o.gradient),
            )?),
            _ => None,
        };

        if let Some(ev) = event.filter(|e| e.tau == t) {
            apply_deletion_event(&mut realized, t, ev).map_err(|e| e.with_context(format!("deletion at round {t}")))?;
        }

        losses.push(out.loss);
        partial.push((t, out.loss, tracking, spectral));
    }

    let regret = metrics::regret_series(&losses, &stream, cfg.radius())?;
    let records: Vec<RoundRecord> = partial
        .into_iter()
        .zip(regret)
        .map(|((t, loss, tracking_error, spectral), cum_regret)| RoundRecord {
            t,
            loss,
            cum_regret,
            tracking_error,
            trace_a: spectral.map(|s| s.trace),
            cond_a: spectral.map(|s| s.cond),
            cos_state: spectral.map(|s| s.cos_state),
            cos_update: spectral.and_then(|s| s.cos_update),
        })
        .collect();

    let outcome = match event {
        Some(ev) => Some(outcome_from_records(&records, ev.tau, &cfg.metrics)?),
        None => None,
    };
    let final_regret = records.last().map_or(0.0, |r| r.cum_regret);
    Ok(RunResult { config: cfg.clone(), seed, records, outcome, final_regret })
}

/// One (model, environment, intervention) cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelKind,
    pub environment: Environment,
    pub intervention: Intervention,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.model, self.environment, self.intervention)
    }
}

/// How the deleted set is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionPlan {
    pub tau: usize,
    /// Delete the `count` most recent rounds ending at `tau`, unless `rounds` is given.
    pub count: usize,
    pub rounds: Option<Vec<usize>>,
    pub correct_parameters: bool,
}

impl Default for DeletionPlan {
    fn default() -> Self {
        DeletionPlan { tau: 200, count: 10, rounds: None, correct_parameters: true }
    }
}

impl DeletionPlan {
    pub fn event(&self, intervention: Intervention) -> Result<DeletionEvent> {
        let mut ev = match &self.rounds {
            Some(rounds) => DeletionEvent {
                tau: self.tau,
                deleted_rounds: rounds.iter().copied().collect(),
                intervention,
                correct_parameters: true,
            },
            None => DeletionEvent::most_recent(self.tau, self.count, intervention)?,
        };
        ev.correct_parameters = self.correct_parameters;
        ev.validate(None)?;
        Ok(ev)
    }
}

/// A full sweep: shared settings, the cells to run, and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub stream: StreamConfig,
    pub ogd: OgdParams,
    pub ons: OnsParams,
    pub deletion: DeletionPlan,
    pub metrics: MetricParams,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
}

/// Cells for one model: baseline first, then partial resets, then decays.
pub fn treatment_cells(model: ModelKind, environments: &[Environment], alphas: &[f64], betas: &[f64]) -> Vec<Cell> {
    let mut interventions = vec![Intervention::None];
    if model == ModelKind::Ons {
        interventions.extend(alphas.iter().map(|&alpha| Intervention::PartialReset { alpha }));
        interventions.extend(betas.iter().map(|&beta| Intervention::Decay { beta }));
    }
    environments
        .iter()
        .flat_map(|&environment| {
            interventions
                .iter()
                .map(move |&intervention| Cell { model, environment, intervention })
        })
        .collect()
}

pub const DEFAULT_ALPHA_GRID: [f64; 3] = [0.3, 0.5, 0.7];
pub const DEFAULT_BETA_GRID: [f64; 3] = [0.5, 0.7, 0.9];

impl SweepPlan {
    /// OGD on both environments plus ONS on the drifting stream under the
    /// baseline and every partial-reset and decay setting, 20 seeds.
    pub fn standard() -> Self {
        let mut cells = treatment_cells(ModelKind::Ogd, &[Environment::Stationary, Environment::Drifting], &[], &[]);
        cells.extend(treatment_cells(
            ModelKind::Ons,
            &[Environment::Drifting],
            &DEFAULT_ALPHA_GRID,
            &DEFAULT_BETA_GRID,
        ));
        SweepPlan {
            stream: StreamConfig::default(),
            ogd: OgdParams::default(),
            ons: OnsParams::default(),
            deletion: DeletionPlan::default(),
            metrics: MetricParams::default(),
            seeds: (0..20).collect(),
            cells,
        }
    }

    pub fn experiment(&self, cell: &Cell) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            stream: StreamConfig { environment: cell.environment, ..self.stream.clone() },
            model: cell.model,
            ogd: self.ogd,
            ons: self.ons,
            event: Some(self.deletion.event(cell.intervention)?),
            metrics: self.metrics,
        })
    }

    /// Every invariant violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.seeds.is_empty() {
            out.push("at least one seed is required".to_string());
        }
        if self.cells.is_empty() {
            out.push("the treatment grid is empty".to_string());
        }
        if let Err(e) = self.stream.validate() {
            out.push(e.to_string());
        }
        for (name, value) in [
            ("ogd.eta0", self.ogd.eta0),
            ("ogd.radius", self.ogd.radius),
            ("ons.eta", self.ons.eta),
            ("ons.lambda", self.ons.lambda),
            ("ons.radius", self.ons.radius),
        ] {
            if let Err(e) = positive(name, value) {
                out.push(e.to_string());
            }
        }
        match self.deletion.event(Intervention::None) {
            Ok(ev) => {
                if let Err(e) = ev.validate(Some(self.stream.horizon)) {
                    out.push(e.to_string());
                }
            }
            Err(e) => out.push(e.to_string()),
        }
        if let Err(e) = self.metrics.check_tau(self.deletion.tau, self.stream.horizon) {
            out.push(e.to_string());
        }
        let mut seen = Vec::new();
        for cell in &self.cells {
            if let Err(e) = cell.intervention.validate() {
                let msg = e.to_string();
                if !seen.contains(&msg) {
                    seen.push(msg.clone());
                    out.push(msg);
                }
            }
            if cell.model == ModelKind::Ogd && cell.intervention != Intervention::None {
                out.push(format!("spectral treatments apply to ONS only (cell {})", cell.label()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Result of one (cell, seed) unit of a sweep.
#[derive(Debug)]
pub struct CellRun {
    pub cell_index: usize,
    pub cell: Cell,
    pub seed: u64,
    pub result: Result<RunResult>,
}

/// Runs every cell x seed. Output order is (cell order, seed order) regardless
/// of `parallelism`; a failing unit is recorded and the sweep continues.
pub fn run_sweep(plan: &SweepPlan, parallelism: Option<usize>) -> Result<Vec<CellRun>> {
    plan.validate()?;
    let units: Vec<(usize, Cell, u64)> = plan
        .cells
        .iter()
        .enumerate()
        .flat_map(|(i, cell)| plan.seeds.iter().map(move |&seed| (i, *cell, seed)))
        .collect();
    let run_unit = |&(cell_index, cell, seed): &(usize, Cell, u64)| CellRun {
        cell_index,
        cell,
        seed,
        result: plan
            .experiment(&cell)
            .and_then(|cfg| run_pair(&cfg, seed))
            .map_err(|e| e.with_context(format!("cell {} seed {seed}", cell.label()))),
    };
    match parallelism {
        Some(1) => Ok(units.iter().map(run_unit).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot build a pool of {n} threads: {e}")))?;
            Ok(pool.install(|| units.par_iter().map(run_unit).collect()))
        }
        None => Ok(units.par_iter().map(run_unit).collect()),
    }
}

/// Table-style summaries grouped by (model, environment, intervention), in
/// order of first appearance. Runs without a deletion event are skipped.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRecord> {
    let rows: Vec<SummaryInput> = results
        .iter()
        .filter_map(|r| {
            r.outcome.map(|o| SummaryInput {
                model: r.model().label().to_string(),
                environment: r.environment().label().to_string(),
                intervention: r.intervention_label(),
                outcome: o,
                final_regret: r.final_regret,
            })
        })
        .collect();
    summarize_inputs(&rows)
}

/// Per-run inputs to [`summarize_inputs`], independent of how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryInput {
    pub model: String,
    pub environment: String,
    pub intervention: String,
    pub outcome: DeletionOutcome,
    pub final_regret: f64,
}

pub fn summarize_inputs(rows: &[SummaryInput]) -> Vec<SummaryRecord> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in rows {
        let key = (r.model.as_str(), r.environment.as_str(), r.intervention.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(model, environment, intervention)| {
            let group: Vec<&SummaryInput> = rows
                .iter()
                .filter(|r| r.model == model && r.environment == environment && r.intervention == intervention)
                .collect();
            let stat = |f: &dyn Fn(&SummaryInput) -> f64| {
                MeanStd::from_samples(&group.iter().map(|r| f(r)).collect::<Vec<_>>()).expect("nonempty group")
            };
            SummaryRecord {
                model: model.to_string(),
                environment: environment.to_string(),
                intervention: intervention.to_string(),
                n_seeds: group.len(),
                recovery_time: stat(&|r| r.outcome.recovery.rounds as f64),
                overshoot: stat(&|r| r.outcome.overshoot),
                param_shock: stat(&|r| r.outcome.param_shock),
                final_regret: stat(&|r| r.final_regret),
                censored_runs: group.iter().filter(|r| r.outcome.recovery.censored).count(),
            }
        })
        .collect()
}
