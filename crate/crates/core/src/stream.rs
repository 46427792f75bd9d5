//! Seeded observation streams and the squared-error loss they induce.
//!
//! Features are i.i.d. isotropic standard normal, targets are
//! `y = <x, w_star(t)> + N(0, noise_std^2)`. Every source of randomness is drawn
//! from its own SplitMix64 substream keyed by `(seed, purpose)`, so a stream is a
//! pure function of its [`StreamConfig`]. Realized and counterfactual runs share
//! one generated stream, which is what keeps their per-round randomness aligned.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Stationary,
    Drifting,
}

impl Environment {
    pub fn label(self) -> &'static str {
        match self {
            Environment::Stationary => "stationary",
            Environment::Drifting => "drifting",
        }
    }
}

impl std::fmt::Display for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stationary" => Ok(Environment::Stationary),
            "drifting" => Ok(Environment::Drifting),
            other => Err(Error::config(format!(
                "unknown environment `{other}` (expected stationary or drifting)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub dimension: usize,
    pub horizon: usize,
    pub environment: Environment,
    /// Euclidean norm of the ground-truth parameter.
    pub target_radius: f64,
    /// Rotation rate of the drifting target, radians per round.
    pub drift_rate: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            dimension: 2,
            horizon: 400,
            environment: Environment::Stationary,
            target_radius: 2.0,
            drift_rate: 0.01,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::config("stream dimension must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("stream horizon must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config(format!(
                "noise_std must be finite and nonnegative, got {}",
                self.noise_std
            )));
        }
        if !(self.target_radius >= 0.0 && self.target_radius.is_finite()) {
            return Err(Error::config(format!(
                "target_radius must be finite and nonnegative, got {}",
                self.target_radius
            )));
        }
        if !self.drift_rate.is_finite() {
            return Err(Error::config("drift_rate must be finite"));
        }
        if self.environment == Environment::Drifting && self.dimension < 2 {
            return Err(Error::config("the drifting environment needs dimension >= 2"));
        }
        Ok(())
    }
}

/// One stream element.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// 1-based round index.
    pub t: usize,
    pub x: DVector<f64>,
    pub y: f64,
    /// Ground truth at round `t`; diagnostics only, learners never read it.
    pub w_star: DVector<f64>,
}

impl Observation {
    pub fn dimension(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Features = 1,
    Noise = 2,
    Target = 3,
}

fn substream(seed: u64, purpose: Purpose) -> SplitMix64 {
    const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut mixer = SplitMix64::seed_from_u64(seed ^ (purpose as u64).wrapping_mul(GOLDEN_GAMMA));
    SplitMix64::seed_from_u64(mixer.next_u64())
}

fn stationary_target(cfg: &StreamConfig) -> DVector<f64> {
    let mut rng = substream(cfg.seed, Purpose::Target);
    loop {
        let dir = DVector::from_fn(cfg.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm > 1e-12 {
            return dir * (cfg.target_radius / norm);
        }
    }
}

/// Ground truth of the drifting environment: `r_star * (cos(wt), sin(wt), 0, ..)`.
///
/// `t` may be any real; integer rounds are the usual argument.
pub fn drift_target(t: f64, cfg: &StreamConfig) -> Result<DVector<f64>> {
    if cfg.environment != Environment::Drifting {
        return Err(Error::usage("drift_target called with a stationary stream config"));
    }
    if cfg.dimension < 2 {
        return Err(Error::usage("drift_target needs dimension >= 2"));
    }
    let phase = cfg.drift_rate * t;
    let mut w = DVector::zeros(cfg.dimension);
    w[0] = cfg.target_radius * phase.cos();
    w[1] = cfg.target_radius * phase.sin();
    Ok(w)
}

/// Generates the `horizon` observations of a stream.
pub fn gen_stream(cfg: &StreamConfig) -> Result<Vec<Observation>> {
    cfg.validate()?;
    let mut features = substream(cfg.seed, Purpose::Features);
    let mut noise = substream(cfg.seed, Purpose::Noise);
    let fixed = match cfg.environment {
        Environment::Stationary => Some(stationary_target(cfg)),
        Environment::Drifting => None,
    };

    let mut out = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let x = DVector::from_fn(cfg.dimension, |_, _| features.sample::<f64, _>(StandardNormal));
        let eps: f64 = noise.sample(StandardNormal);
        let w_star = match &fixed {
            Some(w) => w.clone(),
            None => drift_target(t as f64, cfg)?,
        };
        let y = x.dot(&w_star) + cfg.noise_std * eps;
        out.push(Observation { t, x, y, w_star });
    }
    Ok(out)
}

fn check_dim(w: &DVector<f64>, obs: &Observation) -> Result<()> {
    if w.len() != obs.x.len() {
        return Err(Error::usage(format!(
            "parameter has length {} but observation {} has dimension {}",
            w.len(),
            obs.t,
            obs.x.len()
        )));
    }
    Ok(())
}

/// Squared error `0.5 * (<x, w> - y)^2`.
pub fn loss_value(w: &DVector<f64>, obs: &Observation) -> Result<f64> {
    check_dim(w, obs)?;
    let r = obs.x.dot(w) - obs.y;
    Ok(0.5 * r * r)
}

/// Gradient of [`loss_value`]: `(<x, w> - y) * x`.
pub fn loss_grad(w: &DVector<f64>, obs: &Observation) -> Result<DVector<f64>> {
    check_dim(w, obs)?;
    let r = obs.x.dot(w) - obs.y;
    Ok(&obs.x * r)
}

/// Writes `t, x_1..x_d, y, wstar_1..wstar_d` rows with a header.
pub fn write_stream_csv<W: Write>(stream: &[Observation], writer: W) -> Result<()> {
    let d = stream.first().map_or(0, Observation::dimension);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.push("y".into());
    header.extend((1..=d).map(|i| format!("wstar_{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for obs in stream {
        let mut row = vec![obs.t.to_string()];
        row.extend(obs.x.iter().map(f64::to_string));
        row.push(obs.y.to_string());
        row.extend(obs.w_star.iter().map(f64::to_string));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}
