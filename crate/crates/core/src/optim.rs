//! The two online learners as explicit state machines.
//!
//! Learner state is `(w, A)`: OGD carries no auxiliary state, ONS carries the
//! preconditioner `A_t = lambda I + sum_{s<=t} g_s g_s^T`. Both also keep a
//! gradient log. The log is experiment bookkeeping read by the deletion
//! operators in [`crate::unlearn`]; the update rules never consult it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SymMatrix};
use crate::stream::{loss_grad, loss_value, Observation};

/// Smallest eigenvalue an ONS preconditioner may reach before a step is refused.
pub const MIN_PRECONDITIONER_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdParams {
    /// Base step size; round `k` uses `eta0 / sqrt(k)`.
    pub eta0: f64,
    pub radius: f64,
}

impl Default for OgdParams {
    fn default() -> Self {
        OgdParams { eta0: 0.6, radius: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsParams {
    pub eta: f64,
    /// Identity regularizer of the preconditioner (configured as `delta`).
    pub lambda: f64,
    pub radius: f64,
}

impl Default for OnsParams {
    fn default() -> Self {
        OnsParams { eta: 1.0, lambda: 1.0, radius: 5.0 }
    }
}

/// One retained gradient. `round` is the stream index of the observation,
/// `step_size` the OGD step that consumed it (1 for ONS).
#[derive(Debug, Clone, PartialEq)]
pub struct GradRecord {
    pub round: usize,
    pub grad: DVector<f64>,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub gradient: DVector<f64>,
    /// Step added to `w` before projection.
    pub update_direction: DVector<f64>,
    pub w_after: DVector<f64>,
}

/// Deep copy of a learner's state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub w: DVector<f64>,
    /// `None` for OGD, whose auxiliary state is empty.
    pub preconditioner: Option<SymMatrix>,
    pub steps: usize,
}

fn finite_grad(obs: &Observation, g: &DVector<f64>) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("non-finite gradient at round {}", obs.t)))
    }
}

fn check_params_dim(w: &DVector<f64>, obs: &Observation) -> Result<()> {
    if w.len() != obs.dimension() {
        return Err(Error::usage(format!(
            "learner dimension {} does not match observation dimension {}",
            w.len(),
            obs.dimension()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OgdState {
    pub w: DVector<f64>,
    /// Completed steps; the next step uses `eta0 / sqrt(steps + 1)`.
    pub steps: usize,
    pub params: OgdParams,
    pub grad_log: Vec<GradRecord>,
}

impl OgdState {
    pub fn new(dim: usize, params: OgdParams) -> Self {
        OgdState { w: DVector::zeros(dim), steps: 0, params, grad_log: Vec::new() }
    }

    /// `w <- Proj_R(w - eta_k g)` with `eta_k = eta0 / sqrt(k)`.
    pub fn step(&mut self, obs: &Observation) -> Result<StepOutcome> {
        check_params_dim(&self.w, obs)?;
        let loss = loss_value(&self.w, obs)?;
        let g = loss_grad(&self.w, obs)?;
        finite_grad(obs, &g)?;

        let k = self.steps + 1;
        let eta = self.params.eta0 / (k as f64).sqrt();
        let dir = &g * -eta;
        let w_after = geometry::project_ball_euclid(&(&self.w + &dir), self.params.radius);

        self.w = w_after.clone();
        self.steps = k;
        self.grad_log.push(GradRecord { round: obs.t, grad: g.clone(), step_size: eta });
        Ok(StepOutcome { loss, gradient: g, update_direction: dir, w_after })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { w: self.w.clone(), preconditioner: None, steps: self.steps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsState {
    pub w: DVector<f64>,
    pub a: SymMatrix,
    pub steps: usize,
    pub params: OnsParams,
    pub grad_log: Vec<GradRecord>,
}

impl OnsState {
    pub fn new(dim: usize, params: OnsParams) -> Self {
        OnsState {
            w: DVector::zeros(dim),
            a: SymMatrix::scaled_identity(dim, params.lambda),
            steps: 0,
            params,
            grad_log: Vec::new(),
        }
    }

    /// Accumulate-then-step: `A <- A + g g^T`, then
    /// `w <- Proj^A_R(w - eta A^{-1} g)` with the updated `A`.
    pub fn step(&mut self, obs: &Observation) -> Result<StepOutcome> {
        check_params_dim(&self.w, obs)?;
        let loss = loss_value(&self.w, obs)?;
        let g = loss_grad(&self.w, obs)?;
        finite_grad(obs, &g)?;

        let mut a = self.a.clone();
        a.add_outer(&g);
        let spec = geometry::eig_sym(&a)?;
        if spec.min() < MIN_PRECONDITIONER_EIGENVALUE {
            return Err(Error::numeric(format!(
                "ONS preconditioner numerically singular at round {} (lambda_min = {})",
                obs.t,
                spec.min()
            )));
        }
        let dir = spec.solve(&g) * -self.params.eta;
        let w_after = geometry::project_ball_metric_with(&(&self.w + &dir), &a, &spec, self.params.radius)?;

        self.a = a;
        self.w = w_after.clone();
        self.steps += 1;
        self.grad_log.push(GradRecord { round: obs.t, grad: g.clone(), step_size: 1.0 });
        Ok(StepOutcome { loss, gradient: g, update_direction: dir, w_after })
    }

    /// `lambda I + sum g g^T` recomputed from the gradient log.
    pub fn rebuild_preconditioner(&self) -> SymMatrix {
        let mut a = SymMatrix::scaled_identity(self.w.len(), self.params.lambda);
        for rec in &self.grad_log {
            a.add_outer(&rec.grad);
        }
        a
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { w: self.w.clone(), preconditioner: Some(self.a.clone()), steps: self.steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(alias = "OGD")]
    Ogd,
    #[serde(alias = "ONS")]
    Ons,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ogd => "OGD",
            ModelKind::Ons => "ONS",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ogd" => Ok(ModelKind::Ogd),
            "ons" => Ok(ModelKind::Ons),
            other => Err(Error::config(format!("unknown model `{other}` (expected ogd or ons)"))),
        }
    }
}

/// Either learner, so the harness can drive both through one loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Ogd(OgdState),
    Ons(OnsState),
}

impl Learner {
    pub fn step(&mut self, obs: &Observation) -> Result<StepOutcome> {
        match self {
            Learner::Ogd(s) => s.step(obs),
            Learner::Ons(s) => s.step(obs),
        }
    }

    pub fn params(&self) -> &DVector<f64> {
        match self {
            Learner::Ogd(s) => &s.w,
            Learner::Ons(s) => &s.w,
        }
    }

    pub fn preconditioner(&self) -> Option<&SymMatrix> {
        match self {
            Learner::Ogd(_) => None,
            Learner::Ons(s) => Some(&s.a),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        match self {
            Learner::Ogd(s) => s.snapshot(),
            Learner::Ons(s) => s.snapshot(),
        }
    }

    pub fn model(&self) -> ModelKind {
        match self {
            Learner::Ogd(_) => ModelKind::Ogd,
            Learner::Ons(_) => ModelKind::Ons,
        }
    }
}
