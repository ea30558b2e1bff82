use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_ALPHA_STEP: f64 = 0.2;
pub const DEFAULT_OOD_QUANTILE: f64 = 0.005;
pub const RIDGE: f64 = 1e-6;
pub const MAX_CORRECTION_STEPS: usize = 10;

/// Per-dimension affine map into the space the mixture lives in:
/// `z = (s - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations; constant columns get
    /// a scale of 1.
    pub fn from_data(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for c in 0..x.cols() {
            let col = x.column(c);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            std.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        Standardization { mean, std }
    }

    fn apply(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, sd))| (v - m) / sd)
            .collect()
    }
}

/// On-disk form of `gmm_model.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModelFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub tau_ood: f64,
    #[serde(default = "default_alpha")]
    pub alpha_step: f64,
    pub standardization: Standardization,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA_STEP
}

#[derive(Clone)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `-0.5 * (D ln 2pi + ln det)`
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
        let log_det: f64 = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(Component {
            weight,
            mean,
            chol,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    /// Log density and `Sigma^-1 (mu - z)`.
    fn log_pdf_and_pull(&self, z: &DVector<f64>) -> (f64, DVector<f64>) {
        let diff = &self.mean - z;
        let pull = self.chol.solve(&diff);
        let maha = diff.dot(&pull);
        (self.log_norm - 0.5 * maha, pull)
    }

    fn log_pdf(&self, z: &DVector<f64>) -> f64 {
        self.log_pdf_and_pull(z).0
    }
}

/// Gaussian mixture over robot states with an OOD threshold and correction step.
#[derive(Clone)]
pub struct GmmDensityModel {
    file: GmmModelFile,
    components: Vec<Component>,
}

impl std::fmt::Debug for GmmDensityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.file.fmt(f)
    }
}

impl GmmDensityModel {
    pub fn from_file_struct(file: GmmModelFile) -> Result<Self> {
        let bad = |m: String| Err(Error::Domain(m));
        if file.k == 0
            || file.weights.len() != file.k
            || file.means.len() != file.k
            || file.covariances.len() != file.k
        {
            return bad(format!(
                "model must have K = {} weights, means and covariances",
                file.k
            ));
        }
        let d = file.means[0].len();
        if d == 0 || file.standardization.mean.len() != d || file.standardization.std.len() != d {
            return bad("dimension mismatch between means and standardization".into());
        }
        if file
            .standardization
            .std
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad("standardization std must be positive".into());
        }
        let total: f64 = file.weights.iter().sum();
        if file.weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!(
                "weights must be a probability vector (sum {total})"
            ));
        }
        if !(file.alpha_step >= 0.0 && file.alpha_step.is_finite()) {
            return bad("alpha_step must be non-negative".into());
        }
        let mut components = Vec::with_capacity(file.k);
        for k in 0..file.k {
            let cov = &file.covariances[k];
            if file.means[k].len() != d || cov.len() != d || cov.iter().any(|r| r.len() != d) {
                return bad(format!("component {k} has wrong dimensions"));
            }
            let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
            if (0..d).any(|i| {
                (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * (1.0 + m[(i, j)].abs()))
            }) {
                return bad(format!("covariance {k} is not symmetric"));
            }
            components.push(Component::new(
                file.weights[k],
                DVector::from_column_slice(&file.means[k]),
                m,
            )?);
        }
        Ok(GmmDensityModel { file, components })
    }

    pub fn to_file_struct(&self) -> &GmmModelFile {
        &self.file
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GmmModelFile = serde_json::from_str(&text).map_err(|e| Error::Config {
            file: path.display().to_string(),
            message: format!("{}:{}: {e}", e.line(), e.column()),
        })?;
        Self::from_file_struct(file).map_err(|e| Error::Config {
            file: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.file.means[0].len()
    }

    pub fn k(&self) -> usize {
        self.file.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.file.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.file.means
    }

    pub fn covariances(&self) -> &[Vec<Vec<f64>>] {
        &self.file.covariances
    }

    pub fn tau_ood(&self) -> f64 {
        self.file.tau_ood
    }

    pub fn alpha_step(&self) -> f64 {
        self.file.alpha_step
    }

    pub fn set_tau_ood(&mut self, tau: f64) {
        self.file.tau_ood = tau;
    }

    pub fn set_alpha_step(&mut self, alpha: f64) {
        self.file.alpha_step = alpha;
    }

    fn standardized(&self, s: &[f64]) -> Result<DVector<f64>> {
        if s.len() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                actual: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("state contains non-finite values".into()));
        }
        Ok(DVector::from_vec(self.file.standardization.apply(s)))
    }

    /// Mixture density at `s` (evaluated in the standardized space) and its
    /// gradient with respect to the raw state.
    pub fn density_grad(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.standardized(s)?;
        let mut p = 0.0;
        let mut grad = DVector::zeros(z.len());
        for c in &self.components {
            let (lp, pull) = c.log_pdf_and_pull(&z);
            let wp = c.weight * lp.exp();
            p += wp;
            grad.axpy(wp, &pull, 1.0);
        }
        let g = grad
            .iter()
            .zip(&self.file.standardization.std)
            .map(|(g, sd)| g / sd)
            .collect();
        Ok((p, g))
    }

    pub fn density(&self, s: &[f64]) -> Result<f64> {
        Ok(self.density_grad(s)?.0)
    }
}

/// `p(s)` and `grad p(s)` for the mixture.
pub fn gmm_density_grad(model: &GmmDensityModel, s: &[f64]) -> Result<(f64, Vec<f64>)> {
    model.density_grad(s)
}

/// One gradient-ascent step `s + alpha * grad p(s)` when `p(s) < tau_ood`.
pub fn ood_correct(model: &GmmDensityModel, s: &[f64]) -> Result<(Vec<f64>, bool)> {
    let (p, g) = model.density_grad(s)?;
    if p >= model.tau_ood() {
        return Ok((s.to_vec(), false));
    }
    let a = model.alpha_step();
    Ok((s.iter().zip(&g).map(|(v, g)| v + a * g).collect(), true))
}

/// Repeats [`ood_correct`] until the state is in distribution or `max_steps`
/// (at most [`MAX_CORRECTION_STEPS`]) steps were taken. Returns the state and
/// the number of steps applied.
pub fn ood_correct_iterate(
    model: &GmmDensityModel,
    s: &[f64],
    max_steps: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut cur = s.to_vec();
    let mut steps = 0;
    while steps < max_steps.min(MAX_CORRECTION_STEPS) {
        let (next, corrected) = ood_correct(model, &cur)?;
        if !corrected {
            break;
        }
        cur = next;
        steps += 1;
    }
    Ok((cur, steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFitConfig {
    pub k: usize,
    pub seed: u64,
    /// Fit on per-dimension z-scores instead of raw states.
    pub standardize: bool,
    pub quantile: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub alpha_step: f64,
}

impl GmmFitConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        GmmFitConfig {
            k,
            seed,
            standardize: false,
            quantile: DEFAULT_OOD_QUANTILE,
            max_iter: 200,
            tol: 1e-6,
            alpha_step: DEFAULT_ALPHA_STEP,
        }
    }
}

pub struct GmmFit {
    pub model: GmmDensityModel,
    /// Mean per-point penalized log-likelihood after initialization and after
    /// every EM iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Fits a mixture on raw states with the default threshold quantile.
pub fn fit_gmm(states: &Matrix, k: usize, seed: u64) -> Result<GmmDensityModel> {
    Ok(fit_gmm_with(states, &GmmFitConfig::new(k, seed))?.model)
}

/// Fits a mixture on z-scored states, the form used for OOD checks on
/// states that mix units.
pub fn fit_ood_model(states: &Matrix, k: usize, seed: u64) -> Result<GmmDensityModel> {
    let mut cfg = GmmFitConfig::new(k, seed);
    cfg.standardize = true;
    Ok(fit_gmm_with(states, &cfg)?.model)
}

struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

/// k-means++ style seeding followed by one hard-assignment M-step.
fn init_responsibilities(x: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut centers = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = x
        .iter()
        .map(|p| (p - &x[centers[0]]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|d| {
                    acc += d;
                    acc > u
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (d, p) in d2.iter_mut().zip(x) {
            *d = d.min((p - &x[next]).norm_squared());
        }
    }
    x.iter()
        .map(|p| {
            let best = (0..k)
                .min_by(|&a, &b| {
                    (p - &x[centers[a]])
                        .norm_squared()
                        .total_cmp(&(p - &x[centers[b]]).norm_squared())
                })
                .unwrap();
            (0..k).map(|j| if j == best { 1.0 } else { 0.0 }).collect()
        })
        .collect()
}

/// MAP M-step. The covariance prior `-(ridge * N / 2) tr(Sigma_k^-1)` gives
/// `Sigma_k = S_k + ridge * (N / N_k) I`, i.e. exactly `S + ridge I` for K = 1,
/// and keeps EM monotone in the penalized objective.
fn m_step(x: &[DVector<f64>], resp: &[Vec<f64>], k: usize, ridge: f64) -> Params {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp.iter().map(|r| r[j]).sum::<f64>().max(1e-12);
        let mut mu = DVector::zeros(d);
        for (p, r) in x.iter().zip(resp) {
            mu.axpy(r[j], p, 1.0);
        }
        mu /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for (p, r) in x.iter().zip(resp) {
            let diff = p - &mu;
            cov.ger(r[j], &diff, &diff, 1.0);
        }
        cov /= nk;
        for i in 0..d {
            cov[(i, i)] += ridge * n / nk;
        }
        weights.push(nk / n);
        means.push(mu);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Params {
        weights,
        means,
        covs,
    }
}

fn components(p: &Params) -> Result<Vec<Component>> {
    p.weights
        .iter()
        .zip(p.means.iter().zip(&p.covs))
        .map(|(w, (m, c))| Component::new(*w, m.clone(), c.clone()))
        .collect()
}

/// E-step: responsibilities and mean penalized log-likelihood.
fn e_step(x: &[DVector<f64>], comps: &[Component], ridge: f64) -> (Vec<Vec<f64>>, f64) {
    let n = x.len() as f64;
    let mut total = 0.0;
    let resp = x
        .iter()
        .map(|p| {
            let logs: Vec<f64> = comps.iter().map(|c| c.weight.ln() + c.log_pdf(p)).collect();
            let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
            let lse = mx + sum.ln();
            total += lse;
            logs.iter().map(|l| (l - lse).exp()).collect()
        })
        .collect();
    let penalty: f64 =
        comps.iter().map(|c| c.chol.inverse().trace()).sum::<f64>() * ridge * n / 2.0;
    (resp, (total - penalty) / n)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// EM fit. Iterates until the mean penalized log-likelihood improves by less
/// than `tol` or `max_iter` is reached; an iteration that would lower the
/// objective (rounding only) is discarded and ends the fit.
pub fn fit_gmm_with(states: &Matrix, cfg: &GmmFitConfig) -> Result<GmmFit> {
    let (n, d) = (states.rows(), states.cols());
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::Domain(format!(
            "need 1 <= K <= N, got K = {} with N = {n}",
            cfg.k
        )));
    }
    if d == 0 {
        return Err(Error::Domain("states have no columns".into()));
    }
    if states.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("states contain non-finite values".into()));
    }
    if !(0.0..=1.0).contains(&cfg.quantile) {
        return Err(Error::Domain(format!(
            "quantile {} outside [0, 1]",
            cfg.quantile
        )));
    }
    let standardization = if cfg.standardize {
        Standardization::from_data(states)
    } else {
        Standardization::identity(d)
    };
    let x: Vec<DVector<f64>> = states
        .iter_rows()
        .map(|r| DVector::from_vec(standardization.apply(r)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let resp0 = init_responsibilities(&x, cfg.k, &mut rng);
    let mut params = m_step(&x, &resp0, cfg.k, RIDGE);
    let mut comps = components(&params)?;
    let (mut resp, mut ll) = e_step(&x, &comps, RIDGE);
    let mut history = vec![ll];
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let next = m_step(&x, &resp, cfg.k, RIDGE);
        let next_comps = components(&next)?;
        let (next_resp, next_ll) = e_step(&x, &next_comps, RIDGE);
        if next_ll < ll {
            converged = true;
            break;
        }
        let gain = next_ll - ll;
        params = next;
        comps = next_comps;
        resp = next_resp;
        ll = next_ll;
        history.push(ll);
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }

    let mut dens: Vec<f64> = x
        .iter()
        .map(|p| comps.iter().map(|c| c.weight * c.log_pdf(p).exp()).sum())
        .collect();
    dens.sort_by(f64::total_cmp);
    let file = GmmModelFile {
        k: cfg.k,
        weights: params.weights,
        means: params
            .means
            .iter()
            .map(|m| m.iter().copied().collect())
            .collect(),
        covariances: params
            .covs
            .iter()
            .map(|c| {
                (0..d)
                    .map(|i| (0..d).map(|j| c[(i, j)]).collect())
                    .collect()
            })
            .collect(),
        tau_ood: quantile(&dens, cfg.quantile),
        alpha_step: cfg.alpha_step,
        standardization,
        seed: cfg.seed,
    };
    Ok(GmmFit {
        model: GmmDensityModel::from_file_struct(file)?,
        log_likelihood: history,
        converged,
    })
}
