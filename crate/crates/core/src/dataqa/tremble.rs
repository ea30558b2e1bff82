use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Normalized Gaussian kernel truncated at `4 * sigma` (radius rounded to nearest sample).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5).floor() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    k
}

/// Maps an out-of-range index back into `0..n` with edge-repeating reflection
/// (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

pub fn gaussian_smooth(signal: &[f64], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let n = signal.len();
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * signal[reflect(i + j as isize - radius, n)])
                .sum()
        })
        .collect()
}

/// Jitter score: flat mean over steps and dimensions of
/// `|v_smooth - v| / (|v_smooth| + |v|)` where `v` are forward-difference
/// velocities. Terms with a zero denominator contribute 0.
pub fn tremble_score(states: &Matrix, smoothing_sigma: f64) -> Result<f64> {
    if states.rows() < 3 || states.cols() == 0 {
        return Err(Error::InsufficientData(format!(
            "tremble needs at least 3 steps and 1 dim, got {}x{}",
            states.rows(),
            states.cols()
        )));
    }
    if !(smoothing_sigma > 0.0 && smoothing_sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "smoothing_sigma must be positive, got {smoothing_sigma}"
        )));
    }
    let t = states.rows();
    let mut total = 0.0;
    for d in 0..states.cols() {
        let velocity: Vec<f64> = (0..t - 1)
            .map(|r| states.get(r + 1, d) - states.get(r, d))
            .collect();
        let smooth = gaussian_smooth(&velocity, smoothing_sigma);
        for (v, s) in velocity.iter().zip(&smooth) {
            let denom = s.abs() + v.abs();
            if denom > 0.0 {
                total += (s - v).abs() / denom;
            }
        }
    }
    Ok(total / ((t - 1) * states.cols()) as f64)
}
