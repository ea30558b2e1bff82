use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pchip::Pchip;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MIN_STRIDE: f64 = 0.25;
pub const MAX_STRIDE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFactor {
    /// Source steps per output step.
    pub stride: f64,
    /// Set when the dataset showed no motion and the stride fell back to the maximum.
    pub degenerate: bool,
}

/// `reference_flow / dataset_flow`, clamped to `[0.25, 4]`.
pub fn alignment_factor(dataset_flow: f64, reference_flow: f64) -> Result<AlignmentFactor> {
    if !(reference_flow > 0.0 && reference_flow.is_finite()) {
        return Err(Error::Domain(format!(
            "reference_flow must be positive, got {reference_flow}"
        )));
    }
    if !(dataset_flow > 0.0) || !dataset_flow.is_finite() {
        return Ok(AlignmentFactor {
            stride: MAX_STRIDE,
            degenerate: true,
        });
    }
    Ok(AlignmentFactor {
        stride: (reference_flow / dataset_flow).clamp(MIN_STRIDE, MAX_STRIDE),
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub stride: f64,
    pub output_length: usize,
    pub query_times: Vec<f64>,
}

impl ResamplePlan {
    /// Query times `j * stride` for `j = 0..M` with `M = floor((T-1)/stride) + 1`.
    pub fn new(t: usize, stride: f64) -> Result<Self> {
        if t < 2 {
            return Err(Error::InsufficientData(format!(
                "resampling needs at least 2 steps, got {t}"
            )));
        }
        if !(MIN_STRIDE..=MAX_STRIDE).contains(&stride) {
            return Err(Error::Domain(format!(
                "stride {stride} outside [{MIN_STRIDE}, {MAX_STRIDE}]"
            )));
        }
        let last = (t - 1) as f64;
        // tolerate representation error when (T-1) is a multiple of the stride
        let m = ((last / stride) * (1.0 + 1e-12)).floor() as usize + 1;
        let query_times = (0..m).map(|j| (j as f64 * stride).min(last)).collect();
        Ok(ResamplePlan {
            stride,
            output_length: m,
            query_times,
        })
    }
}

/// Resamples every column of `traj` at the plan's query times.
pub fn resample_trajectory(traj: &Matrix, stride: f64) -> Result<Matrix> {
    resample_with_quaternions(traj, stride, &[])
}

/// As [`resample_trajectory`], then renormalizes each listed group of four
/// columns (quaternion components) to unit length.
pub fn resample_with_quaternions(
    traj: &Matrix,
    stride: f64,
    quaternions: &[[usize; 4]],
) -> Result<Matrix> {
    let plan = ResamplePlan::new(traj.rows(), stride)?;
    let knots: Vec<f64> = (0..traj.rows()).map(|i| i as f64).collect();
    let mut out = Matrix::zeros(plan.output_length, traj.cols());
    for c in 0..traj.cols() {
        let p = Pchip::new(&knots, &traj.column(c))?;
        for (j, &q) in plan.query_times.iter().enumerate() {
            out.set(j, c, p.eval(q)?);
        }
    }
    for group in quaternions {
        if let Some(&bad) = group.iter().find(|&&c| c >= traj.cols()) {
            return Err(Error::Dim {
                expected: traj.cols(),
                actual: bad + 1,
            });
        }
        for j in 0..out.rows() {
            let norm = group
                .iter()
                .map(|&c| out.get(j, c).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for &c in group {
                    out.set(j, c, out.get(j, c) / norm);
                }
            }
        }
    }
    Ok(out)
}

/// Time warp for a speed factor `v`: stride `1 / v`.
pub fn speed_warp(traj: &Matrix, speed_factor: f64) -> Result<Matrix> {
    if !(speed_factor > 0.0) {
        return Err(Error::Domain(format!(
            "speed factor must be positive, got {speed_factor}"
        )));
    }
    resample_trajectory(traj, 1.0 / speed_factor)
}

/// Distribution the speed factor is drawn from during augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedDistribution {
    LogUniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

impl Default for SpeedDistribution {
    fn default() -> Self {
        SpeedDistribution::LogUniform { lo: 0.5, hi: 2.0 }
    }
}

impl SpeedDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            SpeedDistribution::LogUniform { lo, hi } => {
                let u: f64 = rng.random();
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            }
            SpeedDistribution::Fixed { value } => value,
        }
    }

    pub fn sample_seeded(&self, seed: u64) -> f64 {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|i| vec![(i as f64).powi(2) * 0.1, (i as f64 * 0.7).sin()])
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn factor_examples() {
        assert_eq!(alignment_factor(3.0, 3.0).unwrap().stride, 1.0);
        assert_eq!(alignment_factor(6.0, 3.0).unwrap().stride, 0.5);
        assert_eq!(alignment_factor(0.3, 3.0).unwrap().stride, 4.0);
        let d = alignment_factor(0.0, 3.0).unwrap();
        assert!(d.degenerate && d.stride == 4.0);
        assert!(alignment_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn unit_stride_is_identity() {
        let m = ramp(9);
        assert_eq!(resample_trajectory(&m, 1.0).unwrap(), m);
    }

    #[test]
    fn stride_two_takes_even_rows() {
        let m = ramp(11);
        let out = resample_trajectory(&m, 2.0).unwrap();
        assert_eq!(out.rows(), 6);
        for j in 0..6 {
            assert_eq!(out.row(j), m.row(2 * j));
        }
    }

    #[test]
    fn plan_lengths() {
        assert_eq!(ResamplePlan::new(11, 0.5).unwrap().output_length, 21);
        assert_eq!(ResamplePlan::new(10, 4.0).unwrap().output_length, 3);
        let p = ResamplePlan::new(4, 0.3).unwrap();
        assert_eq!(p.output_length, 11);
        assert!(*p.query_times.last().unwrap() <= 3.0);
        assert!(ResamplePlan::new(1, 1.0).is_err());
        assert!(ResamplePlan::new(5, 5.0).is_err());
    }

    #[test]
    fn quaternions_renormalized() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                let a = i as f64 * 0.4;
                vec![0.0, 0.0, a.sin(), a.cos()]
            })
            .collect();
        let out =
            resample_with_quaternions(&Matrix::from_rows(&rows).unwrap(), 0.5, &[[0, 1, 2, 3]])
                .unwrap();
        for r in out.iter_rows() {
            let n: f64 = r.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_samples_in_range() {
        let d = SpeedDistribution::default();
        for seed in 0..100 {
            let v = d.sample_seeded(seed);
            assert!((0.5..=2.0).contains(&v));
        }
        assert_eq!(d.sample_seeded(7), d.sample_seeded(7));
    }
}
