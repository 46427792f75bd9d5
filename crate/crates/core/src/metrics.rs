//! Comparators and diagnostics computed from paired realized/counterfactual runs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SymMatrix};
use crate::stream::{loss_value, Observation};

/// Per-round metrics of one realized run against its counterfactual twin.
///
/// `loss` is the realized `l_t(w_t)`; `tracking_error` compares the parameters
/// played at round `t`; the spectral fields describe the preconditioner used by
/// round `t`'s update and are present only for ONS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub loss: f64,
    pub cum_regret: f64,
    pub tracking_error: f64,
    pub trace_a: Option<f64>,
    pub cond_a: Option<f64>,
    pub cos_state: Option<f64>,
    pub cos_update: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// Trailing moving-average window applied to the loss series.
    pub smoothing_window: usize,
    /// Relative tolerance of the re-entry band around the reference level.
    pub recovery_tolerance: f64,
    /// The reference level averages the smoothed loss over `[tau - L, tau]`.
    pub reference_window: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { smoothing_window: 10, recovery_tolerance: 0.1, reference_window: 50 }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 {
            return Err(Error::config("smoothing window must be at least 1"));
        }
        if !(self.recovery_tolerance >= 0.0 && self.recovery_tolerance.is_finite()) {
            return Err(Error::config(format!(
                "recovery tolerance must be finite and nonnegative, got {}",
                self.recovery_tolerance
            )));
        }
        Ok(())
    }

    /// Checks that `tau` leaves room for the reference and smoothing windows.
    pub fn check_tau(&self, tau: usize, horizon: usize) -> Result<()> {
        self.validate()?;
        if tau <= self.reference_window {
            return Err(Error::config(format!(
                "tau = {tau} leaves no reference window of {} rounds before deletion",
                self.reference_window
            )));
        }
        if tau + self.smoothing_window > horizon {
            return Err(Error::config(format!(
                "tau + smoothing window ({} + {}) exceeds the horizon {horizon}",
                tau, self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 when `n = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

/// Table-style aggregate of one (model, environment, intervention) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub model: String,
    pub environment: String,
    pub intervention: String,
    pub n_seeds: usize,
    pub recovery_time: MeanStd,
    pub overshoot: MeanStd,
    pub param_shock: MeanStd,
    pub final_regret: MeanStd,
    /// Runs whose recovery time was censored at `T - tau`.
    pub censored_runs: usize,
}

/// Best fixed parameter in hindsight: `argmin_{|w| <= R} sum_t l_t(w)`.
///
/// Solved exactly for squared loss as the ball-constrained least-squares
/// problem `(X^T X + mu I) w = X^T y`; rank-deficient prefixes use the
/// pseudo-solution at `mu = 0`.
pub fn hindsight_comparator(stream: &[Observation], radius: f64) -> Result<DVector<f64>> {
    let d = stream
        .first()
        .map(Observation::dimension)
        .ok_or_else(|| Error::usage("hindsight comparator of an empty stream"))?;
    let mut gram = SymMatrix::zeros(d);
    let mut xty = DVector::zeros(d);
    for obs in stream {
        gram.add_outer(&obs.x);
        xty += &obs.x * obs.y;
    }
    comparator_from_moments(&gram, &xty, radius)
}

fn comparator_from_moments(gram: &SymMatrix, xty: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    let spec = geometry::eig_sym(gram)?;
    geometry::ball_constrained_min(&spec, xty, radius)
}

fn check_aligned(losses: &[f64], stream: &[Observation]) -> Result<()> {
    if losses.len() != stream.len() {
        return Err(Error::usage(format!(
            "{} losses for a stream of {} rounds",
            losses.len(),
            stream.len()
        )));
    }
    Ok(())
}

/// `R_T = sum_t l_t(w_t) - min_{|w| <= R} sum_t l_t(w)`.
pub fn cumulative_regret(losses: &[f64], stream: &[Observation], radius: f64) -> Result<f64> {
    check_aligned(losses, stream)?;
    let w = hindsight_comparator(stream, radius)?;
    let mut best = 0.0;
    for obs in stream {
        best += loss_value(&w, obs)?;
    }
    Ok(losses.iter().sum::<f64>() - best)
}

/// `R_t` for every prefix `t = 1..=T`, each against its own hindsight comparator.
pub fn regret_series(losses: &[f64], stream: &[Observation], radius: f64) -> Result<Vec<f64>> {
    check_aligned(losses, stream)?;
    let Some(d) = stream.first().map(Observation::dimension) else {
        return Ok(Vec::new());
    };
    let mut gram = SymMatrix::zeros(d);
    let mut xty = DVector::zeros(d);
    let mut played = 0.0;
    let mut out = Vec::with_capacity(stream.len());
    for (t, (obs, loss)) in stream.iter().zip(losses).enumerate() {
        gram.add_outer(&obs.x);
        xty += &obs.x * obs.y;
        played += loss;
        let w = comparator_from_moments(&gram, &xty, radius)?;
        let mut best = 0.0;
        for prev in &stream[..=t] {
            best += loss_value(&w, prev)?;
        }
        out.push(played - best);
    }
    Ok(out)
}

/// `E_t = |w_t - w_t^cf|_2`.
pub fn tracking_error(w_realized: &DVector<f64>, w_cf: &DVector<f64>) -> f64 {
    debug_assert_eq!(w_realized.len(), w_cf.len());
    (w_realized - w_cf).norm()
}

/// Tracking error at round `tau + 1`, the first parameter played after deletion.
pub fn parameter_shock(records: &[RoundRecord], tau: usize) -> Result<f64> {
    records
        .get(tau)
        .filter(|r| r.t == tau + 1)
        .map(|r| r.tracking_error)
        .ok_or_else(|| Error::config(format!("tau = {tau} is outside the recorded rounds")))
}

/// Trailing mean over `[t - W + 1, t]`, truncated at the start of the series.
pub fn smooth_losses(losses: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..losses.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            losses[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub rounds: usize,
    /// The smoothed loss never re-entered the band; `rounds` is `T - tau`.
    pub censored: bool,
}

fn reference_level(smoothed: &[f64], tau: usize, params: &MetricParams) -> f64 {
    let window = &smoothed[tau - params.reference_window - 1..tau];
    window.iter().sum::<f64>() / window.len() as f64
}

/// Rounds after deletion until the smoothed loss is back within
/// `reference * (1 + tolerance)`: `min { k >= 0 : s(tau + 1 + k) <= band }`.
/// Round `tau + 1` is the first loss incurred after the event, so `0` means the
/// very first post-deletion round was already inside the band.
pub fn recovery_time(losses: &[f64], tau: usize, params: &MetricParams) -> Result<Recovery> {
    let horizon = losses.len();
    params.check_tau(tau, horizon)?;
    let smoothed = smooth_losses(losses, params.smoothing_window);
    let band = reference_level(&smoothed, tau, params) * (1.0 + params.recovery_tolerance);
    let hit = (tau + 1..=horizon).position(|t| smoothed[t - 1] <= band);
    Ok(match hit {
        Some(k) => Recovery { rounds: k, censored: false },
        None => Recovery { rounds: horizon - tau, censored: true },
    })
}

/// `max_{t in (tau, T]} (s(t) - reference)`; negative when deletion lowered the loss.
pub fn overshoot(losses: &[f64], tau: usize, params: &MetricParams) -> Result<f64> {
    let horizon = losses.len();
    params.check_tau(tau, horizon)?;
    let smoothed = smooth_losses(losses, params.smoothing_window);
    let reference = reference_level(&smoothed, tau, params);
    Ok(smoothed[tau..].iter().map(|s| s - reference).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRow {
    pub trace: f64,
    pub cond: f64,
    pub cos_state: f64,
    pub cos_update: Option<f64>,
}

/// Diagnostics of one round: trace and condition number of the realized `A_t`,
/// Frobenius alignment with the counterfactual `A_t`, and the cosine between
/// the update directions `-A_t^{-1} g_t` of the two runs. `cos_update` is absent
/// when either gradient is missing or zero.
pub fn spectral_row(
    a: &SymMatrix,
    a_cf: &SymMatrix,
    grad: Option<&DVector<f64>>,
    grad_cf: Option<&DVector<f64>>,
) -> Result<SpectralRow> {
    if a.dim() != a_cf.dim() {
        return Err(Error::usage("realized and counterfactual preconditioners differ in dimension"));
    }
    let spec = geometry::eig_sym(a)?;
    let cond = geometry::cond_from_spectrum(&spec)?;
    let cos_state = geometry::cos_frobenius(a, a_cf)?;
    let cos_update = match (grad, grad_cf) {
        (Some(g), Some(gc)) if g.norm() > 0.0 && gc.norm() > 0.0 => {
            let spec_cf = geometry::eig_sym(a_cf)?;
            geometry::vector_cosine(&(-spec.solve(g)), &(-spec_cf.solve(gc)))
        }
        _ => None,
    };
    Ok(SpectralRow { trace: a.trace(), cond, cos_state, cos_update })
}

/// [`spectral_row`] over aligned series.
pub fn spectral_series(
    realized: &[SymMatrix],
    counterfactual: &[SymMatrix],
    grads: &[Option<DVector<f64>>],
    grads_cf: &[Option<DVector<f64>>],
) -> Result<Vec<SpectralRow>> {
    let n = realized.len();
    if counterfactual.len() != n || grads.len() != n || grads_cf.len() != n {
        return Err(Error::usage("spectral series inputs are not aligned on t"));
    }
    (0..n)
        .map(|i| spectral_row(&realized[i], &counterfactual[i], grads[i].as_ref(), grads_cf[i].as_ref()))
        .collect()
}
