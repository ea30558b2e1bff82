//! Offline value-learning losses and critic-guided action refinement.
//!
//! Critics are oracles returning `Q(s, a)` and `grad_a Q`; the crate ships
//! analytic critics so every update can be checked exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guards::GmmDensityModel;
use crate::matrix::Matrix;

pub trait Critic {
    /// `(Q(s, a), grad_a Q(s, a))`.
    fn evaluate(&self, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)>;
}

pub trait StateValue {
    fn value(&self, s: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> StateValue for F {
    fn value(&self, s: &[f64]) -> f64 {
        self(s)
    }
}

/// `Q = -scale * |a - target|^2`, independent of the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCritic {
    pub target: Vec<f64>,
    pub scale: f64,
}

impl Critic for QuadraticCritic {
    fn evaluate(&self, _s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
        if a.len() != self.target.len() {
            return Err(Error::Dim {
                expected: self.target.len(),
                actual: a.len(),
            });
        }
        let diff: Vec<f64> = a.iter().zip(&self.target).map(|(a, t)| a - t).collect();
        let q = -self.scale * diff.iter().map(|d| d * d).sum::<f64>();
        Ok((q, diff.iter().map(|d| -2.0 * self.scale * d).collect()))
    }
}

/// `Q = ln p(a)` under a mixture fitted on actions.
#[derive(Clone, Debug)]
pub struct GmmLogDensityCritic {
    pub model: GmmDensityModel,
}

impl Critic for GmmLogDensityCritic {
    fn evaluate(&self, _s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.model.density_grad(a)?;
        Ok((p.ln(), g.iter().map(|g| g / p).collect()))
    }
}

/// Largest relative deviation between the critic gradient and central
/// differences with step `h`, relative to `max(|grad|_inf, 1)`.
pub fn gradient_check(critic: &dyn Critic, s: &[f64], a: &[f64], h: f64) -> Result<f64> {
    let (_, g) = critic.evaluate(s, a)?;
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let mut probe = a.to_vec();
    for i in 0..a.len() {
        probe[i] = a[i] + h;
        let up = critic.evaluate(s, &probe)?.0;
        probe[i] = a[i] - h;
        let down = critic.evaluate(s, &probe)?.0;
        probe[i] = a[i];
        worst = worst.max(((up - down) / (2.0 * h) - g[i]).abs() / scale);
    }
    Ok(worst)
}

/// `|tau - [u < 0]| * u^2`.
pub fn expectile_loss(u: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau {tau} outside (0, 1)")));
    }
    let w = if u < 0.0 { 1.0 - tau } else { tau };
    Ok(w * u * u)
}

/// The `tau`-expectile of a sample: the minimizer of the mean expectile loss,
/// found by bisection on its monotone derivative.
pub fn sample_expectile(samples: &[f64], tau: f64) -> Result<f64> {
    expectile_loss(0.0, tau)?;
    if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("expectile needs finite samples".into()));
    }
    // d/dm of the mean loss, up to a positive factor
    let slope = |m: f64| -> f64 {
        samples
            .iter()
            .map(|x| {
                let u = x - m;
                if u < 0.0 {
                    (1.0 - tau) * u
                } else {
                    tau * u
                }
            })
            .sum()
    };
    let mut lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transitions `(s, a, r, s', terminal)` from an offline dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineBatch {
    states: Matrix,
    actions: Matrix,
    rewards: Vec<f64>,
    next_states: Matrix,
    terminal: Vec<bool>,
}

impl OfflineBatch {
    pub fn new(
        states: Matrix,
        actions: Matrix,
        rewards: Vec<f64>,
        next_states: Matrix,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let n = states.rows();
        for got in [
            actions.rows(),
            rewards.len(),
            next_states.rows(),
            terminal.len(),
        ] {
            if got != n {
                return Err(Error::Dim {
                    expected: n,
                    actual: got,
                });
            }
        }
        if next_states.cols() != states.cols() {
            return Err(Error::Dim {
                expected: states.cols(),
                actual: next_states.cols(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Domain("rewards must be finite".into()));
        }
        Ok(OfflineBatch {
            states,
            actions,
            rewards,
            next_states,
            terminal,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqlLosses {
    pub value: f64,
    pub q: f64,
}

/// `L_V = mean L2^tau(Q_target(s, a) - V(s))`,
/// `L_Q = mean (r + gamma (1 - terminal) V(s') - Q(s, a))^2`.
pub fn iql_losses(
    batch: &OfflineBatch,
    v: &dyn StateValue,
    q_target: &dyn Critic,
    q: &dyn Critic,
    tau: f64,
    gamma: f64,
) -> Result<IqlLosses> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma {gamma} outside [0, 1]")));
    }
    let (mut lv, mut lq) = (0.0, 0.0);
    for i in 0..batch.len() {
        let s = batch.states.row(i);
        let a = batch.actions.row(i);
        let qt = q_target.evaluate(s, a).map_err(|e| critic_err(i, e))?.0;
        lv += expectile_loss(qt - v.value(s), tau)?;
        let boot = if batch.terminal[i] {
            0.0
        } else {
            gamma * v.value(batch.next_states.row(i))
        };
        let qi = q.evaluate(s, a).map_err(|e| critic_err(i, e))?.0;
        lq += (batch.rewards[i] + boot - qi).powi(2);
    }
    let n = batch.len() as f64;
    Ok(IqlLosses {
        value: lv / n,
        q: lq / n,
    })
}

fn critic_err(step: usize, e: Error) -> Error {
    match e {
        Error::Critic { message, .. } => Error::Critic { step, message },
        other => Error::Critic {
            step,
            message: other.to_string(),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub eta: f64,
    pub n_steps: usize,
    #[serde(default = "default_floor")]
    pub grad_floor: f64,
}

fn default_floor() -> f64 {
    1e-9
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            eta: 0.05,
            n_steps: 5,
            grad_floor: default_floor(),
        }
    }
}

impl RefineConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!(
                "eta {} must be non-negative",
                self.eta
            )));
        }
        if !(self.grad_floor >= 0.0) {
            return Err(Error::Domain("grad_floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// One entry of `refine_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub action: Vec<f64>,
    pub q_before: f64,
    pub q_after: f64,
    /// Gradient norm at the original action.
    pub grad_norm: f64,
    pub steps_taken: usize,
}

fn checked(critic: &dyn Critic, s: &[f64], a: &[f64], step: usize) -> Result<(f64, Vec<f64>)> {
    let (q, g) = critic.evaluate(s, a).map_err(|e| critic_err(step, e))?;
    if !q.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Critic {
            step,
            message: format!("non-finite critic output (Q = {q})"),
        });
    }
    if g.len() != a.len() {
        return Err(Error::Critic {
            step,
            message: format!(
                "gradient has {} entries for a {}-dim action",
                g.len(),
                a.len()
            ),
        });
    }
    Ok((q, g))
}

/// Up to `n_steps` normalized ascent steps `a += eta * g / |g|`, stopping
/// once `|g| < grad_floor`. Errors carry the inner iteration index.
pub fn refine_action(
    critic: &dyn Critic,
    s: &[f64],
    a: &[f64],
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    cfg.check()?;
    let mut cur = a.to_vec();
    let (q_before, g0) = checked(critic, s, &cur, 0)?;
    let grad_norm = norm(&g0);
    let (mut q, mut g, mut steps) = (q_before, g0, 0);
    while steps < cfg.n_steps {
        let n = norm(&g);
        if n < cfg.grad_floor {
            break;
        }
        for (x, gi) in cur.iter_mut().zip(&g) {
            *x += cfg.eta * gi / n;
        }
        steps += 1;
        (q, g) = checked(critic, s, &cur, steps)?;
    }
    Ok(RefineOutcome {
        action: cur,
        q_before,
        q_after: q,
        grad_norm,
        steps_taken: steps,
    })
}

/// [`refine_action`] at every step of a trajectory; states are untouched.
/// Errors carry the trajectory step index.
pub fn refine_trajectory(
    critic: &dyn Critic,
    traj: &[(Vec<f64>, Vec<f64>)],
    cfg: &RefineConfig,
) -> Result<Vec<RefineOutcome>> {
    traj.iter()
        .enumerate()
        .map(|(i, (s, a))| refine_action(critic, s, a, cfg).map_err(|e| critic_err_keep(i, e)))
        .collect()
}

fn critic_err_keep(step: usize, e: Error) -> Error {
    match e {
        Error::Critic { message, .. } => Error::Critic { step, message },
        other => other,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
