use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use roboprep::align::resample_trajectory;
use roboprep::guards::{fit_gmm_with, ood_correct, GmmDensityModel, GmmFitConfig};
use roboprep::sampler::mixture_weights;
use roboprep::Matrix;

pub const DEFAULT_WEIGHTS: [f64; 12] = [
    0.054, 0.080, 0.210, 0.102, 0.089, 0.025, 0.037, 0.052, 0.124, 0.041, 0.129, 0.056,
];

const N_POINTS: usize = 400;

pub fn resample(values: &[f64], stride: f64) -> Result<Vec<f64>, String> {
    let m = Matrix::from_vec(values.len(), 1, values.to_vec()).map_err(|e| e.to_string())?;
    let r = resample_trajectory(&m, stride).map_err(|e| e.to_string())?;
    Ok(r.column(0))
}

pub fn mixture(weights: &[f64], alpha: f64) -> Result<Vec<f64>, String> {
    mixture_weights(weights, alpha).map_err(|e| e.to_string())
}

pub struct Field {
    pub model: GmmDensityModel,
    pub points: Vec<f64>,
}

/// States along two noisy reaching arcs.
fn arcs(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.12).unwrap();
    let mut out = Vec::with_capacity(2 * N_POINTS);
    for i in 0..N_POINTS {
        let t: f64 = rng.random();
        let (x, y) = if i % 2 == 0 {
            let a = std::f64::consts::PI * (0.1 + 0.6 * t);
            (a.cos() - 0.2, a.sin() - 0.3)
        } else {
            (-0.8 + 1.4 * t, -0.6 + 0.3 * t * t)
        };
        out.push(x + noise.sample(&mut rng));
        out.push(y + noise.sample(&mut rng));
    }
    out
}

impl Field {
    pub fn fit(seed: u64, k: usize, alpha: f64) -> Result<Field, String> {
        let points = arcs(seed);
        let states = Matrix::from_vec(N_POINTS, 2, points.clone()).map_err(|e| e.to_string())?;
        let cfg = GmmFitConfig {
            alpha_step: alpha,
            ..GmmFitConfig::new(k, seed)
        };
        let model = fit_gmm_with(&states, &cfg)
            .map_err(|e| e.to_string())?
            .model;
        Ok(Field { model, points })
    }

    pub fn grid(
        &self,
        nx: usize,
        ny: usize,
        xr: [f64; 2],
        yr: [f64; 2],
    ) -> Result<Vec<f64>, String> {
        if nx < 2 || ny < 2 {
            return Err(format!("grid needs at least 2x2 cells, got {nx}x{ny}"));
        }
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = yr[0] + (yr[1] - yr[0]) * j as f64 / (ny - 1) as f64;
            for i in 0..nx {
                let x = xr[0] + (xr[1] - xr[0]) * i as f64 / (nx - 1) as f64;
                out.push(self.model.density(&[x, y]).map_err(|e| e.to_string())?);
            }
        }
        Ok(out)
    }

    pub fn path(&self, start: [f64; 2], max_steps: usize) -> Result<Vec<f64>, String> {
        let mut s = start.to_vec();
        let mut out = Vec::new();
        for step in 0..=max_steps {
            let p = self.model.density(&s).map_err(|e| e.to_string())?;
            out.extend([s[0], s[1], p]);
            if step == max_steps {
                break;
            }
            let (next, corrected) = ood_correct(&self.model, &s).map_err(|e| e.to_string())?;
            if !corrected {
                break;
            }
            s = next;
        }
        Ok(out)
    }
}
