//! Scheduled dataset mixture: uniform at the start of training, target
//! weights at the end, `W_i = w_i^a / sum_j w_j^a`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    #[default]
    Linear,
    /// Half-cosine ease-in/ease-out between 0 and 1.
    Cosine,
}

/// Contents of `sampler.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSchedule {
    pub dataset_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub ramp_steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub ramp_shape: RampShape,
}

impl SamplerSchedule {
    pub fn check(&self) -> Result<()> {
        if self.dataset_ids.is_empty() {
            return Err(Error::Domain("schedule has no datasets".into()));
        }
        if self.dataset_ids.len() != self.weights.len() {
            return Err(Error::Dim {
                expected: self.dataset_ids.len(),
                actual: self.weights.len(),
            });
        }
        check_weights(&self.weights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: SamplerSchedule = serde_json::from_str(&text).map_err(|e| Error::Config {
            file: path.display().to_string(),
            message: format!("{}:{}: {e}", e.line(), e.column()),
        })?;
        s.check().map_err(|e| Error::Config {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(s)
    }

    /// Mixing exponent at a training step; 1 from `ramp_steps` on, and always 1
    /// when `ramp_steps` is 0.
    pub fn alpha_at(&self, step: u64) -> f64 {
        if self.ramp_steps == 0 {
            return 1.0;
        }
        let x = (step as f64 / self.ramp_steps as f64).min(1.0);
        match self.ramp_shape {
            RampShape::Linear => x,
            RampShape::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * x).cos()),
        }
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Domain("no weights".into()));
    }
    if let Some((i, v)) = w
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::Domain(format!("weight {i} = {v} is not positive")));
    }
    Ok(())
}

pub fn mixture_weights(w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_weights(w)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(vec![1.0 / w.len() as f64; w.len()]);
    }
    let powered: Vec<f64> = w.iter().map(|v| v.powf(alpha)).collect();
    let total: f64 = powered.iter().sum();
    Ok(powered.into_iter().map(|v| v / total).collect())
}

/// Draws `n_draws` dataset indices for `step` by inverse CDF. The generator is
/// ChaCha keyed by the schedule seed with the step as its stream id, so a plan
/// depends only on `(seed, step, n_draws)`.
pub fn sample_plan(sched: &SamplerSchedule, step: u64, n_draws: usize) -> Result<Vec<usize>> {
    sample_plan_with_alpha(sched, sched.alpha_at(step), step, n_draws)
}

pub fn sample_plan_with_alpha(
    sched: &SamplerSchedule,
    alpha: f64,
    step: u64,
    n_draws: usize,
) -> Result<Vec<usize>> {
    sched.check()?;
    if n_draws == 0 {
        return Err(Error::Domain("n_draws must be at least 1".into()));
    }
    let probs = mixture_weights(&sched.weights, alpha)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    rng.set_stream(step);
    let last = probs.len() - 1;
    Ok((0..n_draws)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}
