//! Deletion events: removing a set of past gradients from both components of
//! the learner state, followed (for ONS) by an optional spectral treatment of
//! the preconditioner.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SymMatrix};
use crate::optim::{GradRecord, Learner, OgdState, OnsState};

/// Eigenvalue floor used by the spectral treatments.
pub const INTERVENTION_FLOOR: f64 = 1e-6;
/// Upper bound on the floor applied after standard gradient removal.
pub const REMOVAL_FLOOR: f64 = 1e-6;

/// Deletion-time treatment of the ONS preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intervention {
    None,
    /// Subtract `alpha` from every eigenvalue.
    PartialReset { alpha: f64 },
    /// Destroy the fraction `beta` of every eigenvalue, keeping `(1 - beta) * lambda`.
    Decay { beta: f64 },
}

impl Intervention {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Intervention::None => Ok(()),
            Intervention::PartialReset { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            Intervention::PartialReset { alpha } => {
                Err(Error::config(format!("alpha must be positive and finite, got {alpha}")))
            }
            Intervention::Decay { beta } if beta > 0.0 && beta < 1.0 => Ok(()),
            Intervention::Decay { beta } => Err(Error::config(format!("beta must lie in (0,1), got {beta}"))),
        }
    }

    /// Stable label used in output files.
    pub fn label(&self) -> String {
        match *self {
            Intervention::None => "baseline".to_string(),
            Intervention::PartialReset { alpha } => format!("partial_reset(alpha={alpha})"),
            Intervention::Decay { beta } => format!("decay(beta={beta})"),
        }
    }
}

impl std::fmt::Display for Intervention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionEvent {
    /// The event fires after round `tau`'s update.
    pub tau: usize,
    pub deleted_rounds: BTreeSet<usize>,
    pub intervention: Intervention,
    /// Apply the Newton-style parameter correction during ONS deletion. Turning it
    /// off leaves `w` untouched and only edits the preconditioner.
    pub correct_parameters: bool,
}

impl DeletionEvent {
    /// Deletes the `count` most recent rounds `tau - count + 1 ..= tau`.
    pub fn most_recent(tau: usize, count: usize, intervention: Intervention) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("deletion set must contain at least one round"));
        }
        if count > tau {
            return Err(Error::config(format!(
                "deletion set precedes stream start: {count} rounds cannot end at tau = {tau}"
            )));
        }
        let ev = DeletionEvent {
            tau,
            deleted_rounds: (tau + 1 - count..=tau).collect(),
            intervention,
            correct_parameters: true,
        };
        ev.validate(None)?;
        Ok(ev)
    }

    /// Checks the event invariants, plus the stream bounds when a horizon is given.
    pub fn validate(&self, horizon: Option<usize>) -> Result<()> {
        self.intervention.validate()?;
        if self.deleted_rounds.is_empty() {
            return Err(Error::config("deletion set must contain at least one round"));
        }
        if self.tau < self.deleted_rounds.len() || self.deleted_rounds.first() == Some(&0) {
            return Err(Error::config(format!(
                "deletion set precedes stream start (tau = {}, |U| = {})",
                self.tau,
                self.deleted_rounds.len()
            )));
        }
        if let Some(&last) = self.deleted_rounds.last() {
            if last > self.tau {
                return Err(Error::config(format!("deleted round {last} is after tau = {}", self.tau)));
            }
        }
        if let Some(t_max) = horizon {
            if self.tau >= t_max {
                return Err(Error::config(format!(
                    "deletion time tau = {} must be before the horizon T = {t_max}",
                    self.tau
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, round: usize) -> bool {
        self.deleted_rounds.contains(&round)
    }
}

/// Splits the log into (deleted, surviving), failing on the first missing round.
fn take_deleted(log: &[GradRecord], rounds: &BTreeSet<usize>) -> Result<(Vec<GradRecord>, Vec<GradRecord>)> {
    for &r in rounds {
        if !log.iter().any(|rec| rec.round == r) {
            return Err(Error::MissingRound { round: r });
        }
    }
    Ok(log.iter().cloned().partition(|rec| rounds.contains(&rec.round)))
}

/// Re-adds the recorded steps `eta_s g_s` of the deleted rounds.
pub fn delete_ogd(state: &OgdState, event: &DeletionEvent) -> Result<OgdState> {
    let (deleted, surviving) = take_deleted(&state.grad_log, &event.deleted_rounds)?;
    let mut correction = DVector::zeros(state.w.len());
    for rec in &deleted {
        correction += &rec.grad * rec.step_size;
    }
    Ok(OgdState {
        w: geometry::project_ball_euclid(&(&state.w + correction), state.params.radius),
        grad_log: surviving,
        ..state.clone()
    })
}

/// Standard ONS deletion, in this order:
/// 1. `w <- Proj^A_R(w + eta A^{-1} sum g_s)` using the pre-removal `A`;
/// 2. `A <- psd_floor(A - sum g_s g_s^T, min(lambda, 1e-6))`;
/// 3. drop the deleted entries from the log.
pub fn delete_ons_standard(state: &OnsState, event: &DeletionEvent) -> Result<OnsState> {
    let (deleted, surviving) = take_deleted(&state.grad_log, &event.deleted_rounds)?;
    let spec = geometry::eig_sym(&state.a)?;
    if spec.min().is_nan() || spec.min() <= 0.0 {
        return Err(Error::numeric(format!(
            "deletion from a preconditioner that is not positive definite (lambda_min = {})",
            spec.min()
        )));
    }

    let mut w = state.w.clone();
    if event.correct_parameters {
        let mut total = DVector::zeros(w.len());
        for rec in &deleted {
            total += &rec.grad;
        }
        let target = &w + spec.solve(&total) * state.params.eta;
        w = geometry::project_ball_metric_with(&target, &state.a, &spec, state.params.radius)?;
    }

    let mut a = state.a.clone();
    for rec in &deleted {
        a.sub_outer(&rec.grad);
    }
    let a = geometry::psd_floor(&a, state.params.lambda.min(REMOVAL_FLOOR))?;

    Ok(OnsState { w, a, grad_log: surviving, ..state.clone() })
}

/// Applies a spectral treatment, preserving eigenvectors.
pub fn intervene(a: &SymMatrix, spec: &Intervention) -> Result<SymMatrix> {
    spec.validate()?;
    let eig = geometry::eig_sym(a)?;
    if eig.min().is_nan() || eig.min() <= 0.0 {
        return Err(Error::numeric(format!(
            "intervention on a matrix that is not positive definite (lambda_min = {})",
            eig.min()
        )));
    }
    Ok(match *spec {
        Intervention::None => a.clone(),
        Intervention::PartialReset { alpha } => eig.map(|l| (l - alpha).max(INTERVENTION_FLOOR)),
        Intervention::Decay { beta } => eig.map(|l| ((1.0 - beta) * l).max(INTERVENTION_FLOOR)),
    })
}

/// What the event did to the realized learner.
#[derive(Debug, Clone, PartialEq)]
pub struct DeletionReport {
    /// Parameters right after the deletion correction, i.e. `w_{tau+1}`.
    pub w_after_deletion: DVector<f64>,
    /// Preconditioner after removal but before the spectral treatment (ONS only).
    pub a_after_removal: Option<SymMatrix>,
}

/// Fires a deletion event on a learner whose last completed round is `event.tau`.
///
/// Order: standard deletion, then capture of `w_{tau+1}`, then the spectral
/// treatment of `A`. The treatment never touches `w`, so the parameter shock is
/// the same for every intervention.
pub fn apply_deletion_event(learner: &mut Learner, current_round: usize, event: &DeletionEvent) -> Result<DeletionReport> {
    event.validate(None)?;
    if current_round != event.tau {
        return Err(Error::config(format!(
            "deletion event for tau = {} fired at round {current_round}",
            event.tau
        )));
    }
    match learner {
        Learner::Ogd(state) => {
            *state = delete_ogd(state, event)?;
            Ok(DeletionReport { w_after_deletion: state.w.clone(), a_after_removal: None })
        }
        Learner::Ons(state) => {
            let mut next = delete_ons_standard(state, event)?;
            let report = DeletionReport {
                w_after_deletion: next.w.clone(),
                a_after_removal: Some(next.a.clone()),
            };
            next.a = intervene(&next.a, &event.intervention)?;
            *state = next;
            Ok(report)
        }
    }
}
